"""Box-Cox, quadratic trend surfaces, variograms and ordinary kriging.

Variogram families (``d`` distance, ``c0`` nugget, ``c`` partial sill,
``a`` range parameter), all with ``gamma(0) = 0``:

    exponential  c0 + c * (1 - exp(-d / a))
    spherical    c0 + c * (1.5 d/a - 0.5 (d/a)^3)   for d < a, else c0 + c
    gaussian     c0 + c * (1 - exp(-(d / a)^2))
    wave         c0 + c * (1 - a sin(d / a) / d)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize
from scipy.spatial.distance import cdist, pdist

from .errors import (
    DegenerateFit,
    DuplicatePointsWithZeroNugget,
    NonPositiveInput,
    RankDeficient,
    SingularKrigingSystem,
    TooFewBins,
)
from .grid import MarkedPointSet

FAMILIES = ("exponential", "spherical", "gaussian", "wave")


def boxcox(y, lam: float):
    y = np.asarray(y, dtype=np.float64)
    if np.any(~(y > 0)):
        raise NonPositiveInput("Box-Cox needs strictly positive input")
    if lam == 0:
        return np.log(y)
    # expm1 keeps precision when lam is near zero
    return np.expm1(lam * np.log(y)) / lam


def boxcox_inverse(z, lam: float):
    """Inverse Box-Cox. Values below the transform's range map to 0."""
    z = np.asarray(z, dtype=np.float64)
    if lam == 0:
        return np.exp(z)
    t = np.maximum(lam * z, -1.0)
    with np.errstate(divide="ignore"):
        return np.exp(np.log1p(t) / lam)


@dataclass(frozen=True)
class TransformSpec:
    boxcox_lambda: float = 1.0
    detrend: str = "none"

    def __post_init__(self):
        if self.detrend not in ("none", "poly2"):
            raise ValueError(f"detrend must be 'none' or 'poly2', got {self.detrend!r}")


# --- trend surface -----------------------------------------------------------


def poly2_design(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return np.column_stack([np.ones_like(x), x, y, x * x, y * y, x * y])


@dataclass(frozen=True)
class TrendSurface:
    """Quadratic trend ``b0 + b1 x + b2 y + b3 x^2 + b4 y^2 + b5 xy``.

    Coordinates are shifted and scaled internally (`center`, `scale`) to
    keep the design well conditioned; `coefficients` refer to the original
    coordinates.
    """

    coefficients: np.ndarray
    center: tuple[float, float] = (0.0, 0.0)
    scale: float = 1.0
    _scaled: np.ndarray = field(default=None, repr=False)

    def predict(self, x, y) -> np.ndarray:
        u = (np.asarray(x, dtype=np.float64) - self.center[0]) / self.scale
        v = (np.asarray(y, dtype=np.float64) - self.center[1]) / self.scale
        return poly2_design(u, v) @ self._scaled


def _unscale_poly2(beta, cx, cy, s):
    """Coefficients in original coordinates from those in scaled ones."""
    g0, g1, g2, g3, g4, g5 = beta
    b3 = g3 / s**2
    b4 = g4 / s**2
    b5 = g5 / s**2
    b1 = g1 / s - 2 * b3 * cx - b5 * cy
    b2 = g2 / s - 2 * b4 * cy - b5 * cx
    b0 = g0 - g1 * cx / s - g2 * cy / s + b3 * cx**2 + b4 * cy**2 + b5 * cx * cy
    return np.array([b0, b1, b2, b3, b4, b5])


def fit_trend_poly2(P: MarkedPointSet, mark: str) -> tuple[TrendSurface, np.ndarray]:
    """Least-squares quadratic trend; returns the surface and the residuals."""
    z = P.mark(mark)
    if len(P) < 6:
        raise RankDeficient(f"need at least 6 points for a quadratic trend, got {len(P)}")
    cx, cy = float(P.x.mean()), float(P.y.mean())
    s = float(max(np.ptp(P.x), np.ptp(P.y), 1e-300))
    D = poly2_design((P.x - cx) / s, (P.y - cy) / s)
    beta, _, rank, _ = np.linalg.lstsq(D, z, rcond=None)
    if rank < 6:
        raise RankDeficient("points do not determine a quadratic surface")
    trend = TrendSurface(_unscale_poly2(beta, cx, cy, s), (cx, cy), s, beta)
    return trend, z - D @ beta


# --- variograms --------------------------------------------------------------


@dataclass(frozen=True)
class VariogramModel:
    family: str
    nugget: float
    partial_sill: float
    range_param: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown variogram family {self.family!r}")
        if self.nugget < 0 or not self.partial_sill > 0 or not self.range_param > 0:
            raise ValueError("need nugget >= 0, partial_sill > 0, range_param > 0")

    def __call__(self, d):
        return variogram(self.family, d, self.nugget, self.partial_sill, self.range_param)


def variogram(family: str, d, nugget, psill, rng):
    """Evaluate a variogram family, ``gamma(0) = 0`` exactly."""
    d = np.asarray(d, dtype=np.float64)
    u = d / rng
    if family == "exponential":
        shape = -np.expm1(-u)
    elif family == "spherical":
        uc = np.minimum(u, 1.0)
        shape = 1.5 * uc - 0.5 * uc**3
    elif family == "gaussian":
        shape = -np.expm1(-(u**2))
    elif family == "wave":
        shape = 1.0 - np.sinc(u / np.pi)
    else:
        raise ValueError(f"unknown variogram family {family!r}")
    return np.where(d > 0, nugget + psill * shape, 0.0)


@dataclass(frozen=True)
class EmpiricalVariogram:
    distance: np.ndarray
    gamma: np.ndarray
    pair_count: np.ndarray

    def __len__(self):
        return len(self.distance)


def empirical_variogram(P: MarkedPointSet, mark: str, bin_width: float, max_dist: float) -> EmpiricalVariogram:
    """Matheron estimator ``gamma_b = sum (z_i - z_j)^2 / (2 N_b)``.

    Bins are ``[k w, (k+1) w)`` for ``k w < max_dist``; `distance` is the
    mean pair distance in each bin and empty bins are dropped.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be > 0")
    z = P.mark(mark)
    d = pdist(P.xy)
    sq = pdist(z[:, None], "sqeuclidean")
    keep = d < max_dist
    d, sq = d[keep], sq[keep]
    idx = np.floor(d / bin_width).astype(np.int64)
    nbin = int(np.ceil(max_dist / bin_width))
    n = np.bincount(idx, minlength=nbin)
    sd = np.bincount(idx, weights=d, minlength=nbin)
    ss = np.bincount(idx, weights=sq, minlength=nbin)
    ok = n > 0
    return EmpiricalVariogram(sd[ok] / n[ok], ss[ok] / (2.0 * n[ok]), n[ok])


N_STARTS = 8
# log-range search box, relative to the largest bin distance
RANGE_BOUNDS = (1e-6, 1e4)


def _profile_sills(shape, g, w, nugget):
    """Best (nugget, partial sill) for a fixed range by weighted NNLS."""
    sw = np.sqrt(w)
    if nugget is None:
        A = np.column_stack([np.ones_like(shape), shape]) * sw[:, None]
        (c0, c), _ = optimize.nnls(A, g * sw)
        return c0, c
    t = g - nugget
    denom = float(np.sum(w * shape * shape))
    c = max(float(np.sum(w * shape * t)) / denom, 0.0) if denom > 0 else 0.0
    return float(nugget), c


def fit_variogram_wls(empirical: EmpiricalVariogram, family: str, nugget=None) -> VariogramModel:
    """Pair-count weighted least-squares variogram fit.

    Minimises ``sum_b N_b (gamma_b - gamma(d_b))^2``. The model is linear in
    nugget and partial sill, so for a trial range those come from a
    non-negative weighted least-squares solve; the range is searched in log
    space by Nelder-Mead from 8 fixed starts spread over the bin distances.
    The lowest objective wins, ties going to the earliest start. Pass a
    number as `nugget` to hold it fixed.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown variogram family {family!r}")
    if len(empirical) < 3:
        raise TooFewBins(f"need at least 3 non-empty bins, got {len(empirical)}")
    d, g = empirical.distance, empirical.gamma
    w = empirical.pair_count.astype(np.float64)
    w = w / w.sum()
    dmax = float(d.max())
    gscale = float(np.max(np.abs(g))) or 1.0
    lo, hi = np.log(RANGE_BOUNDS[0]), np.log(RANGE_BOUNDS[1])

    def solve(t):
        a = dmax * np.exp(np.clip(t, lo, hi))
        shape = variogram(family, d, 0.0, 1.0, a)
        c0, c = _profile_sills(shape, g, w, nugget)
        r = g - (c0 + c * shape)
        return float(np.sum(w * r * r)) / gscale**2, c0, c, a

    opts = {"xatol": 1e-13, "fatol": 1e-20, "maxiter": 5000}
    best = None
    for i in range(N_STARTS):
        t0 = np.log((i + 1) / (N_STARTS + 1))
        res = optimize.minimize(lambda t: solve(t[0])[0], [t0], method="Nelder-Mead", options=opts)
        if best is None or res.fun < best.fun:
            best = res
    _, c0, c, a = solve(best.x[0])
    t = float(np.log(a / dmax))
    if c <= 1e-12 * gscale or t <= lo + 1e-6 or t >= hi - 1e-6:
        raise DegenerateFit(f"fit ran to a parameter bound (sill={c:.3g}, range={a:.3g})")
    return VariogramModel(family, float(c0), float(c), float(a))


# --- ordinary kriging --------------------------------------------------------


class OrdinaryKriging:
    """Ordinary kriging system factorised once for many targets.

    Coincident data points use ``gamma(0+) = nugget`` between them, so they
    are allowed only when the nugget is positive.
    """

    def __init__(self, xy, z, model: VariogramModel):
        xy = np.asarray(xy, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        n = len(z)
        if n < 2:
            raise ValueError("ordinary kriging needs at least 2 data points")
        d = cdist(xy, xy)
        dup = (d == 0) & ~np.eye(n, dtype=bool)
        if dup.any() and model.nugget == 0:
            raise DuplicatePointsWithZeroNugget("duplicate data locations need a positive nugget")
        G = model(d)
        G[dup] = model.nugget
        A = np.ones((n + 1, n + 1))
        A[:n, :n] = G
        A[n, n] = 0.0
        try:
            with np.errstate(all="raise"):
                self._lu = linalg.lu_factor(A, check_finite=True)
        except (linalg.LinAlgError, FloatingPointError, ValueError) as err:
            raise SingularKrigingSystem(str(err)) from None
        if np.any(np.diag(self._lu[0]) == 0) or np.linalg.cond(A) > 1e14:
            raise SingularKrigingSystem("kriging matrix is singular")
        self.xy, self.z, self.model, self.n = xy, z, model, n

    def weights(self, targets) -> np.ndarray:
        """Kriging weights, shape ``(n_targets, n_data)``."""
        t = np.asarray(targets, dtype=np.float64).reshape(-1, 2)
        rhs = np.ones((self.n + 1, len(t)))
        rhs[: self.n] = self.model(cdist(self.xy, t))
        sol = linalg.lu_solve(self._lu, rhs)
        return sol[: self.n].T

    def predict(self, targets, chunk: int = 4096) -> np.ndarray:
        t = np.asarray(targets, dtype=np.float64).reshape(-1, 2)
        out = np.empty(len(t))
        for i in range(0, len(t), chunk):
            out[i : i + chunk] = self.weights(t[i : i + chunk]) @ self.z
        return out


def ordinary_krige(data: MarkedPointSet, mark: str, model: VariogramModel, targets) -> np.ndarray:
    return OrdinaryKriging(data.xy, data.mark(mark), model).predict(targets)


@dataclass(frozen=True)
class VariogramSpec:
    """How `krige_pipeline` obtains its variogram.

    Either a ready `model`, or a `family` to fit to the empirical
    variogram of the transformed, detrended data. `nugget` fixes the
    nugget during fitting; bin width and maximum distance default to
    1/15 and 1/2 of the largest inter-point distance.
    """

    family: str = "exponential"
    nugget: float | None = None
    bin_width: float | None = None
    max_dist: float | None = None
    model: VariogramModel | None = None


@dataclass(frozen=True)
class KrigeResult:
    predictions: np.ndarray
    model: VariogramModel
    trend: TrendSurface | None
    empirical: EmpiricalVariogram | None


def krige_pipeline(P: MarkedPointSet, mark: str, spec: TransformSpec, vspec: VariogramSpec, targets) -> KrigeResult:
    """Transform, detrend, fit, krige, re-add trend, back-transform."""
    targets = np.asarray(targets, dtype=np.float64).reshape(-1, 2)
    z = boxcox(P.mark(mark), spec.boxcox_lambda)
    work = P.with_marks(_z=z)
    trend = None
    if spec.detrend == "poly2":
        trend, resid = fit_trend_poly2(work, "_z")
        work = work.with_marks(_z=resid)
    emp = None
    model = vspec.model
    if model is None:
        span = float(pdist(P.xy).max())
        bw = vspec.bin_width or span / 15.0
        md = vspec.max_dist or span / 2.0
        emp = empirical_variogram(work, "_z", bw, md)
        model = fit_variogram_wls(emp, vspec.family, vspec.nugget)
    pred = ordinary_krige(work, "_z", model, targets)
    if trend is not None:
        pred = pred + trend.predict(targets[:, 0], targets[:, 1])
    return KrigeResult(boxcox_inverse(pred, spec.boxcox_lambda), model, trend, emp)
