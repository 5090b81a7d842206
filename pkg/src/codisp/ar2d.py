"""Causal AR-2D models: block-wise fitting, approximated images and gap filling.

The model is

    X[r, s] = phi1 * X[r-1, s] + phi2 * X[r, s-1] + phi3 * X[r-1, s-1] + eps[r, s]

on mean-centred data, with ``r`` the row index and ``s`` the column index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import (
    GapNotRectangular,
    KOutOfRange,
    NeighborhoodOutOfBounds,
    SingularSystem,
    TooFewCells,
)
from .grid import Grid, masked_mean
from .rng import OP_AR2D, as_rng

# normal matrices with a worse condition number are treated as singular
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class Ar2dCoeffs:
    phi1: float
    phi2: float
    phi3: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("AR-2D coefficients must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.phi1, self.phi2, self.phi3])

    @classmethod
    def zero(cls) -> "Ar2dCoeffs":
        return cls(0.0, 0.0, 0.0)


def _design(x: np.ndarray, m: np.ndarray):
    """Regression rows for every cell whose three causal neighbours exist."""
    y = x[1:, 1:]
    f = np.stack([x[:-1, 1:], x[1:, :-1], x[:-1, :-1]], axis=-1)
    ok = m[1:, 1:] & m[:-1, 1:] & m[1:, :-1] & m[:-1, :-1]
    return f[ok], y[ok]


def _solve_normal(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(A)) or np.linalg.cond(A) > MAX_CONDITION:
        raise SingularSystem("AR-2D normal equations are singular")
    return np.linalg.solve(A, b)


def fit_ar2d_ls(region, mask=None) -> Ar2dCoeffs:
    """Least-squares AR-2D coefficients for a rectangular region.

    Every cell that has its north, west and north-west neighbours inside
    the region (and all four observed) contributes one regression row.

    Parameters
    ----------
    region : Grid or 2D array
        Values, already centred if a centred fit is wanted.
    mask : 2D bool array, optional
        Observation mask for array input; a Grid carries its own.
    """
    if isinstance(region, Grid):
        x, m = region.values, region.mask
    else:
        x = np.asarray(region, dtype=np.float64)
        m = np.ones(x.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if x.ndim != 2 or min(x.shape) < 2:
        raise TooFewCells("region must be at least 2x2")
    f, y = _design(x, m)
    if len(y) < 3:
        raise TooFewCells(f"only {len(y)} regression rows available, need 3")
    return Ar2dCoeffs(*_solve_normal(f.T @ f, f.T @ y))


def _fit_or_zero(x: np.ndarray) -> Ar2dCoeffs:
    try:
        return fit_ar2d_ls(x)
    except SingularSystem:
        return Ar2dCoeffs.zero()


def trimmed_dims(rows: int, cols: int, k: int) -> tuple[int, int]:
    return ((rows - 1) // (k - 1)) * (k - 1) + 1, ((cols - 1) // (k - 1)) * (k - 1) + 1


@dataclass(frozen=True)
class BlockPartition:
    """Tiling of the trimmed image into (k-1) x (k-1) blocks.

    Block ``(ib, jb)`` (1-based) covers rows ``(k-1)(ib-1)+1 .. (k-1)ib``
    and the matching columns; row 0 and column 0 are left as the causal
    boundary.
    """

    k: int
    rows: int
    cols: int

    def __post_init__(self):
        if not 4 <= self.k <= min(self.rows, self.cols):
            raise KOutOfRange(f"need 4 <= k <= {min(self.rows, self.cols)}, got {self.k}")

    @property
    def trimmed_dims(self) -> tuple[int, int]:
        return trimmed_dims(self.rows, self.cols, self.k)

    @property
    def n_blocks(self) -> tuple[int, int]:
        return (self.rows - 1) // (self.k - 1), (self.cols - 1) // (self.k - 1)

    @property
    def blocks(self) -> list[tuple[slice, slice]]:
        step = self.k - 1
        nbr, nbc = self.n_blocks
        return [
            (slice(step * (ib - 1) + 1, step * ib + 1), slice(step * (jb - 1) + 1, step * jb + 1))
            for ib in range(1, nbr + 1)
            for jb in range(1, nbc + 1)
        ]


def block_coefficients(x: np.ndarray, k: int) -> np.ndarray:
    """LS coefficients for every block of a centred, fully observed image.

    Returns an array of shape ``(nb_rows, nb_cols, 3)``; singular blocks
    get zeros.
    """
    part = BlockPartition(k, *x.shape)
    mt, nt = part.trimmed_dims
    nbr, nbc = part.n_blocks
    step = k - 1
    y = x[1:mt, 1:nt]
    f = np.stack([x[0 : mt - 1, 1:nt], x[1:mt, 0 : nt - 1], x[0 : mt - 1, 0 : nt - 1]], axis=-1)
    fb = f.reshape(nbr, step, nbc, step, 3)
    yb = y.reshape(nbr, step, nbc, step)
    A = np.einsum("iajbp,iajbq->ijpq", fb, fb)
    b = np.einsum("iajbp,iajb->ijp", fb, yb)
    phi = np.zeros((nbr, nbc, 3))
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(A)
    ok = np.isfinite(cond) & (cond <= MAX_CONDITION)
    if ok.any():
        phi[ok] = np.linalg.solve(A[ok], b[ok][..., None])[..., 0]
    return phi


def approximate_image(Z: Grid, k: int) -> Grid:
    """Local AR-2D approximation of `Z` built from (k-1) x (k-1) blocks.

    Each block cell is predicted one step ahead from the original centred
    values of its causal neighbours with that block's coefficients. The
    result has the trimmed size ``(M', N')``; row 0 and column 0, which
    have no causal neighbours, are copied from `Z`. Singular blocks fall
    back to zero coefficients, i.e. the image mean.
    """
    part = BlockPartition(k, Z.rows, Z.cols)
    mt, nt = part.trimmed_dims
    if not Z.mask[:mt, :nt].all():
        raise ValueError("approximate_image needs a fully observed trimmed extent")
    zbar = masked_mean(Z)
    x = Z.values - zbar
    phi = block_coefficients(x, k)
    step = k - 1
    # expand block coefficients to per-cell maps
    per_cell = np.repeat(np.repeat(phi, step, axis=0), step, axis=1)
    pred = (
        per_cell[..., 0] * x[0 : mt - 1, 1:nt]
        + per_cell[..., 1] * x[1:mt, 0 : nt - 1]
        + per_cell[..., 2] * x[0 : mt - 1, 0 : nt - 1]
    )
    out = Z.values[:mt, :nt].copy()
    out[1:, 1:] = pred + zbar
    return Grid.from_array(out)


def find_gap(mask: np.ndarray) -> tuple[int, int, int, int] | None:
    """Bounding box ``(r0, c0, rows, cols)`` of the single missing rectangle."""
    miss = ~mask
    if not miss.any():
        return None
    rr = np.flatnonzero(miss.any(axis=1))
    cc = np.flatnonzero(miss.any(axis=0))
    r0, r1, c0, c1 = rr[0], rr[-1] + 1, cc[0], cc[-1] + 1
    if miss.sum() != (r1 - r0) * (c1 - c0) or not miss[r0:r1, c0:c1].all():
        raise GapNotRectangular("missing cells do not form one filled rectangle")
    return int(r0), int(c0), int(r1 - r0), int(c1 - c0)


def _border_blocks(x: np.ndarray, K: int, gr: int, gc: int):
    """The four K x K blocks bordering the gap, oriented causally."""
    top = x[0:K, K - 1 : 2 * K - 1]
    left = x[K - 1 : 2 * K - 1, 0:K]
    bottom = x[K + gr : 2 * K + gr, K - 1 : 2 * K - 1][::-1, :]
    right = x[K - 1 : 2 * K - 1, K + gc : 2 * K + gc][:, ::-1]
    return top, left, bottom, right


def fill_rings(x: np.ndarray, K: int, gr: int, gc: int, coeffs) -> None:
    """Fill the ``gr x gc`` gap at offset ``(K, K)`` of `x` in place.

    The outermost unfilled ring is predicted from four directions: the top
    edge marching east from the north block's model, the left edge marching
    south from the west block's model, the bottom edge marching east with
    the (row-flipped) south block's model, and the right edge marching
    south with the (column-flipped) east block's model. Each predictor
    carries its own running estimate along its edge; cells reached by more
    than one predictor get the average. Rings shrink until the gap is full.
    """
    p_top, p_left, p_bottom, p_right = (c.as_array() for c in coeffs)
    top, bottom, left, right = K, K + gr - 1, K, K + gc - 1
    while top <= bottom and left <= right:
        acc = {}

        def put(cell, v):
            s, n = acc.get(cell, (0.0, 0))
            acc[cell] = (s + v, n + 1)

        prev = x[top, left - 1]
        for c in range(left, right + 1):
            prev = p_top[0] * x[top - 1, c] + p_top[1] * prev + p_top[2] * x[top - 1, c - 1]
            put((top, c), prev)
        prev = x[bottom, left - 1]
        for c in range(left, right + 1):
            prev = p_bottom[0] * x[bottom + 1, c] + p_bottom[1] * prev + p_bottom[2] * x[bottom + 1, c - 1]
            put((bottom, c), prev)
        prev = x[top - 1, left]
        for r in range(top, bottom + 1):
            prev = p_left[0] * prev + p_left[1] * x[r, left - 1] + p_left[2] * x[r - 1, left - 1]
            put((r, left), prev)
        prev = x[top - 1, right]
        for r in range(top, bottom + 1):
            prev = p_right[0] * prev + p_right[1] * x[r, right + 1] + p_right[2] * x[r - 1, right + 1]
            put((r, right), prev)
        # write after all four marches so no predictor sees another's output
        for (r, c), (s, n) in acc.items():
            x[r, c] = s / n
        top, bottom, left, right = top + 1, bottom - 1, left + 1, right - 1


def impute_gap(Z: Grid, K: int | None = None) -> Grid:
    """Fill the single rectangular gap of `Z` with directional AR-2D predictors.

    Parameters
    ----------
    Z : Grid
        Image whose only missing cells form one rectangle.
    K : int, optional
        Border block size; the gap may be at most ``(K-1) x (K-1)``.
        Defaults to one more than the longer gap side.

    The 3K x 3K neighbourhood placing the gap at offset ``(K, K)`` must fit
    inside `Z`. The neighbourhood is centred by its observed mean, the four
    bordering K x K blocks are fitted (singular blocks fall back to zero
    coefficients) and the gap is filled ring by ring. Observed cells are
    returned unchanged.
    """
    gap = find_gap(Z.mask)
    if gap is None:
        return Z
    r0, c0, gr, gc = gap
    if K is None:
        K = max(gr, gc) + 1
    if gr > K - 1 or gc > K - 1:
        raise ValueError(f"gap {gr}x{gc} exceeds (K-1)x(K-1) with K={K}")
    R0, C0 = r0 - K, c0 - K
    if R0 < 0 or C0 < 0 or R0 + 3 * K > Z.rows or C0 + 3 * K > Z.cols:
        raise NeighborhoodOutOfBounds(
            f"3K x 3K neighbourhood (K={K}) around gap at ({r0}, {c0}) leaves the {Z.rows}x{Z.cols} grid"
        )
    sub = Grid(Z.values[R0 : R0 + 3 * K, C0 : C0 + 3 * K], Z.mask[R0 : R0 + 3 * K, C0 : C0 + 3 * K])
    mean = masked_mean(sub)
    x = sub.values - mean
    coeffs = [_fit_or_zero(b) for b in _border_blocks(x, K, gr, gc)]
    fill_rings(x, K, gr, gc, coeffs)
    out = Z.values.copy()
    out[r0 : r0 + gr, c0 : c0 + gc] = x[K : K + gr, K : K + gc] + mean
    return Grid(out, np.ones(Z.shape, dtype=bool))


@numba.njit(cache=True)
def _ar2d_recursion(field, phi1, phi2, phi3):
    nr, nc = field.shape
    for r in range(1, nr):
        for s in range(1, nc):
            field[r, s] += phi1 * field[r - 1, s] + phi2 * field[r, s - 1] + phi3 * field[r - 1, s - 1]


def simulate_ar2d(rows: int, cols: int, phi, seed=0, noise_sd: float = 1.0, burn_in: int = 50) -> np.ndarray:
    """Simulate a causal AR-2D field driven by Gaussian white noise.

    The recursion starts from a zero boundary `burn_in` cells outside the
    returned window.
    """
    rng = as_rng(seed, OP_AR2D)
    phi = Ar2dCoeffs(*phi) if not isinstance(phi, Ar2dCoeffs) else phi
    f = noise_sd * rng.standard_normal((rows + burn_in, cols + burn_in))
    f[0, :] = 0.0
    f[:, 0] = 0.0
    _ar2d_recursion(f, phi.phi1, phi.phi2, phi.phi3)
    return f[burn_in:, burn_in:].copy()


def generate_ar2d(boundary_row, boundary_col, phi) -> np.ndarray:
    """Noise-free AR-2D field grown from a given first row and first column."""
    boundary_row = np.asarray(boundary_row, dtype=np.float64)
    boundary_col = np.asarray(boundary_col, dtype=np.float64)
    if boundary_row[0] != boundary_col[0]:
        raise ValueError("boundary row and column must share their first value")
    phi = Ar2dCoeffs(*phi) if not isinstance(phi, Ar2dCoeffs) else phi
    f = np.zeros((len(boundary_col), len(boundary_row)))
    f[0, :] = boundary_row
    f[:, 0] = boundary_col
    _ar2d_recursion(f, phi.phi1, phi.phi2, phi.phi3)
    return f
