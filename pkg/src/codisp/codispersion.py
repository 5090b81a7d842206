"""Codispersion coefficient and codispersion maps.

For a lag ``h`` the coefficient is

    rho(h) = S_xy(h) / sqrt(S_xx(h) * S_yy(h)),
    S_ab(h) = sum_s (a(s+h) - a(s)) * (b(s+h) - b(s)),

with the sum over sites ``s`` where ``s`` and ``s+h`` are observed in both
grids. A lag is undefined (NaN) when fewer than ``min_pairs`` pairs
contribute or when either self-sum falls below ``denom_epsilon``.

Each lag is reduced by one sequential pass in row-major site order, so
values do not depend on how lags are spread over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .errors import DimensionMismatch, LagOutOfRange, MissingBinWidth
from .grid import CodispMap, Grid, LagWindow, MarkedPointSet


@dataclass(frozen=True)
class CodispConfig:
    min_pairs: int = 30
    denom_epsilon: float = 1e-12
    bin_halfwidth: float | None = None

    def __post_init__(self):
        if self.min_pairs < 1:
            raise ValueError("min_pairs must be >= 1")
        if not self.denom_epsilon > 0:
            raise ValueError("denom_epsilon must be > 0")
        if self.bin_halfwidth is not None and not self.bin_halfwidth > 0:
            raise ValueError("bin_halfwidth must be > 0")


@numba.njit(cache=True, nogil=True)
def _ratio(sxy, sxx, syy, n, min_pairs, eps):
    if n < min_pairs or sxx < eps or syy < eps:
        return np.nan
    r = sxy / math.sqrt(sxx * syy)
    # rounding can push |r| a few ulps past 1
    if r > 1.0:
        r = 1.0
    elif r < -1.0:
        r = -1.0
    return r


@numba.njit(cache=True, nogil=True)
def _grid_kernel(x, y, m, lags, min_pairs, eps, out, counts):
    nr, nc = x.shape
    for k in range(lags.shape[0]):
        h1 = lags[k, 0]
        h2 = lags[k, 1]
        r_lo = max(0, -h2)
        r_hi = min(nr, nr - h2)
        c_lo = max(0, -h1)
        c_hi = min(nc, nc - h1)
        sxy = 0.0
        sxx = 0.0
        syy = 0.0
        n = 0
        for r in range(r_lo, r_hi):
            r2 = r + h2
            for c in range(c_lo, c_hi):
                c2 = c + h1
                if m[r, c] and m[r2, c2]:
                    dx = x[r2, c2] - x[r, c]
                    dy = y[r2, c2] - y[r, c]
                    sxy += dx * dy
                    sxx += dx * dx
                    syy += dy * dy
                    n += 1
        counts[k] = n
        out[k] = _ratio(sxy, sxx, syy, n, min_pairs, eps)


@numba.njit(cache=True, nogil=True)
def _point_kernel(xy, a, b, lag_index, max_x, max_y, spacing, bw, min_pairs, eps, out, counts):
    nb = out.shape[0]
    sxy = np.zeros(nb)
    sxx = np.zeros(nb)
    syy = np.zeros(nb)
    cnt = np.zeros(nb, dtype=np.int64)
    n = xy.shape[0]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dx = xy[j, 0] - xy[i, 0]
            dy = xy[j, 1] - xy[i, 1]
            k1_lo = max(-max_x, int(math.ceil((dx - bw) / spacing)))
            k1_hi = min(max_x, int(math.floor((dx + bw) / spacing)))
            k2_lo = max(0, int(math.ceil((dy - bw) / spacing)))
            k2_hi = min(max_y, int(math.floor((dy + bw) / spacing)))
            if k1_lo > k1_hi or k2_lo > k2_hi:
                continue
            da = a[j] - a[i]
            db = b[j] - b[i]
            for k2 in range(k2_lo, k2_hi + 1):
                for k1 in range(k1_lo, k1_hi + 1):
                    # floor/ceil can admit an edge bin by rounding; recheck exactly
                    if abs(dx - k1 * spacing) > bw or abs(dy - k2 * spacing) > bw:
                        continue
                    idx = lag_index[k2, k1 + max_x]
                    if idx < 0:
                        continue
                    sxy[idx] += da * db
                    sxx[idx] += da * da
                    syy[idx] += db * db
                    cnt[idx] += 1
    for k in range(nb):
        counts[k] = cnt[k]
        out[k] = _ratio(sxy[k], sxx[k], syy[k], cnt[k], min_pairs, eps)


def _check_pair(X: Grid, Y: Grid):
    if X.shape != Y.shape:
        raise DimensionMismatch(f"grid shapes differ: {X.shape} vs {Y.shape}")


def _check_lags(lags: np.ndarray, shape):
    nr, nc = shape
    bad = (np.abs(lags[:, 0]) >= nc) | (np.abs(lags[:, 1]) >= nr)
    if bad.any():
        h = tuple(int(v) for v in lags[np.flatnonzero(bad)[0]])
        raise LagOutOfRange(f"lag {h} does not fit a {nr}x{nc} grid")


def _run_grid(X: Grid, Y: Grid, lags: np.ndarray, cfg: CodispConfig, workers: int = 1):
    _check_pair(X, Y)
    lags = np.ascontiguousarray(lags, dtype=np.int64).reshape(-1, 2)
    _check_lags(lags, X.shape)
    m = X.mask & Y.mask
    out = np.empty(len(lags))
    counts = np.empty(len(lags), dtype=np.int64)
    args = (X.values, Y.values, m, cfg.min_pairs, cfg.denom_epsilon)
    if workers <= 1 or len(lags) < 2:
        _grid_kernel(X.values, Y.values, m, lags, cfg.min_pairs, cfg.denom_epsilon, out, counts)
        return out, counts
    # interleaved chunks balance cost: short lags have more pairs
    chunks = [np.arange(w, len(lags), workers) for w in range(workers)]

    def run(idx):
        o = np.empty(len(idx))
        c = np.empty(len(idx), dtype=np.int64)
        _grid_kernel(args[0], args[1], args[2], np.ascontiguousarray(lags[idx]), args[3], args[4], o, c)
        return idx, o, c

    with ThreadPoolExecutor(max_workers=workers) as pool:
        for idx, o, c in pool.map(run, chunks):
            out[idx] = o
            counts[idx] = c
    return out, counts


def codisp_at_lag(X: Grid, Y: Grid, h, cfg: CodispConfig | None = None) -> float:
    """Codispersion of `X` and `Y` at lag ``h = (h1, h2)``.

    ``h1`` is the column offset and ``h2`` the row offset. Returns NaN
    when the lag is undefined.
    """
    cfg = cfg or CodispConfig()
    out, _ = _run_grid(X, Y, np.array([h]), cfg)
    return float(out[0])


def codisp_at_lag_with_count(X: Grid, Y: Grid, h, cfg: CodispConfig | None = None) -> tuple[float, int]:
    cfg = cfg or CodispConfig()
    out, counts = _run_grid(X, Y, np.array([h]), cfg)
    return float(out[0]), int(counts[0])


def codisp_map(
    X: Grid, Y: Grid, window: LagWindow, cfg: CodispConfig | None = None, workers: int = 1
) -> CodispMap:
    """Codispersion map over every lag of `window`.

    `workers` threads split the lag list; output is bit-identical for any
    worker count.
    """
    cfg = cfg or CodispConfig()
    out, counts = _run_grid(X, Y, window.lags, cfg, workers)
    return CodispMap(window, out, counts)


def point_codisp_map(
    P: MarkedPointSet,
    mark_x: str,
    mark_y: str,
    window: LagWindow,
    cfg: CodispConfig | None = None,
    lag_spacing: float | None = None,
) -> CodispMap:
    """Lag-binned codispersion map for a marked point pattern.

    Bin ``(h1, h2)`` of `window` is the square of half-width
    ``cfg.bin_halfwidth`` centred on offset ``(h1, h2) * lag_spacing``.
    Every ordered pair ``(i, j)`` whose offset ``p_j - p_i`` falls in a bin
    contributes the increments ``mark(j) - mark(i)`` to it.

    `lag_spacing` defaults to twice the bin half-width; the half-width
    defaults to half the spacing. One of the two must be given.
    """
    cfg = cfg or CodispConfig()
    a = np.ascontiguousarray(P.mark(mark_x))
    b = np.ascontiguousarray(P.mark(mark_y))
    bw = cfg.bin_halfwidth
    if bw is None and lag_spacing is None:
        raise MissingBinWidth("point-pattern maps need bin_halfwidth or lag_spacing")
    if lag_spacing is None:
        lag_spacing = 2.0 * bw
    if bw is None:
        bw = lag_spacing / 2.0
    if not lag_spacing > 0:
        raise ValueError("lag_spacing must be > 0")
    mx, my = window.max_lag_x, window.max_lag_y
    lag_index = np.full((my + 1, 2 * mx + 1), -1, dtype=np.int64)
    lag_index[window.lags[:, 1], window.lags[:, 0] + mx] = np.arange(len(window))
    out = np.empty(len(window))
    counts = np.empty(len(window), dtype=np.int64)
    _point_kernel(
        np.ascontiguousarray(P.xy), a, b, lag_index, mx, my, float(lag_spacing), float(bw),
        cfg.min_pairs, cfg.denom_epsilon, out, counts,
    )
    return CodispMap(window, out, counts)
