"""Matérn correlation and bivariate Gaussian random field simulation.

The bivariate covariance is

    C11(h) = s1^2 M(h | nu1, a1)
    C22(h) = s2^2 M(h | nu2, a2)
    C12(h) = C21(h) = rho12 s1 s2 M(h | nu12, a12)

with ``M(h | nu, a) = 2^(1-nu) / Gamma(nu) * (a|h|)^nu K_nu(a|h|)``.

Fields live on a unit-spaced lattice; ``h`` is measured in cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from .errors import InadmissibleParams, MethodRequiresEqualParams, NotPositiveDefinite
from .grid import Grid
from .rng import OP_GRF, as_rng

CHOLESKY_MAX_CELLS = 16384


def _half_integer(x, nu):
    if nu == 0.5:
        return np.exp(-x)
    if nu == 1.5:
        return (1.0 + x) * np.exp(-x)
    if nu == 2.5:
        return (1.0 + x + x * x / 3.0) * np.exp(-x)
    return None


def matern_correlation(distance, nu: float, a: float):
    """Matérn correlation at `distance` (scalar or array).

    Half-integer smoothness 0.5, 1.5 and 2.5 use closed forms; other
    values go through the exponentially scaled Bessel function
    ``scipy.special.kve`` in log space, which stays accurate far into the
    tail where ``K_nu`` itself underflows.
    """
    if not (nu > 0 and a > 0):
        raise ValueError("nu and a must be > 0")
    d = np.asarray(distance, dtype=np.float64)
    if np.any(d < 0):
        raise ValueError("distance must be >= 0")
    x = a * d
    out = _half_integer(x, nu)
    if out is None:
        out = np.ones_like(x)
        pos = x > 0
        xp = x[pos]
        with np.errstate(divide="ignore"):
            log_m = (
                (1.0 - nu) * math.log(2.0) - special.gammaln(nu)
                + nu * np.log(xp) + np.log(special.kve(nu, xp)) - xp
            )
        out[pos] = np.exp(log_m)
        # K_nu blows up faster than x^nu vanishes near 0; clamp the series tail
        out = np.minimum(out, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def parsimonious_bound(nu1: float, nu2: float) -> float:
    """Largest admissible |rho12| when nu12 = (nu1 + nu2) / 2."""
    return math.sqrt(nu1 * nu2) / (0.5 * (nu1 + nu2))


@dataclass(frozen=True)
class MaternParams:
    nu1: float = 0.5
    nu2: float = 0.5
    nu12: float | None = None
    a1: float = 1.0
    a2: float = 1.0
    a12: float | None = None
    sigma1_sq: float = 1.0
    sigma2_sq: float = 1.0
    rho12: float = 0.0
    mu1: float = 0.0
    mu2: float = 0.0

    def __post_init__(self):
        for name in ("nu1", "nu2", "a1", "a2", "sigma1_sq", "sigma2_sq"):
            if not getattr(self, name) > 0:
                raise InadmissibleParams(f"{name} must be > 0")
        nu_mid = 0.5 * (self.nu1 + self.nu2)
        if self.nu12 is None:
            object.__setattr__(self, "nu12", nu_mid)
        elif abs(self.nu12 - nu_mid) > 1e-12 * nu_mid:
            raise InadmissibleParams(f"parsimonious model needs nu12 = {nu_mid}, got {self.nu12}")
        if self.a12 is None:
            a12 = self.a1 if self.a1 == self.a2 else math.sqrt(0.5 * (self.a1**2 + self.a2**2))
            object.__setattr__(self, "a12", a12)
        elif not self.a12 > 0:
            raise InadmissibleParams("a12 must be > 0")
        bound = parsimonious_bound(self.nu1, self.nu2)
        if not -1.0 <= self.rho12 <= 1.0 or abs(self.rho12) > bound:
            raise InadmissibleParams(f"|rho12| = {abs(self.rho12)} exceeds the bound {bound:.6f}")

    @property
    def equal_structure(self) -> bool:
        return self.nu1 == self.nu2 == self.nu12 and self.a1 == self.a2 == self.a12


def bivariate_covariance(h, p: MaternParams) -> np.ndarray:
    """2x2 covariance matrix at planar offset `h`."""
    d = float(np.hypot(*np.asarray(h, dtype=np.float64)))
    c11 = p.sigma1_sq * matern_correlation(d, p.nu1, p.a1)
    c22 = p.sigma2_sq * matern_correlation(d, p.nu2, p.a2)
    c12 = p.rho12 * math.sqrt(p.sigma1_sq * p.sigma2_sq) * matern_correlation(d, p.nu12, p.a12)
    return np.array([[c11, c12], [c12, c22]])


def _lattice_distances(rows, cols):
    r, c = np.divmod(np.arange(rows * cols), cols)
    return np.hypot(r[:, None] - r[None, :], c[:, None] - c[None, :])


def _cholesky(cov):
    try:
        return linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        pass
    jitter = 1e-10 * float(np.mean(np.diag(cov)))
    try:
        return linalg.cholesky(cov + jitter * np.eye(cov.shape[0]), lower=True)
    except linalg.LinAlgError:
        raise NotPositiveDefinite("joint covariance is not positive definite, even after jitter") from None


def _simulate_cholesky(rows, cols, p: MaternParams, rng):
    n = rows * cols
    if n > CHOLESKY_MAX_CELLS:
        raise ValueError(f"cholesky simulation is limited to {CHOLESKY_MAX_CELLS} cells, got {n}")
    d = _lattice_distances(rows, cols)
    s1, s2 = math.sqrt(p.sigma1_sq), math.sqrt(p.sigma2_sq)
    cov = np.empty((2 * n, 2 * n))
    cov[:n, :n] = p.sigma1_sq * matern_correlation(d, p.nu1, p.a1)
    cov[n:, n:] = p.sigma2_sq * matern_correlation(d, p.nu2, p.a2)
    cross = p.rho12 * s1 * s2 * matern_correlation(d, p.nu12, p.a12)
    cov[:n, n:] = cross
    cov[n:, :n] = cross
    del d, cross
    L = _cholesky(cov)
    z = L @ rng.standard_normal(2 * n)
    x = p.mu1 + z[:n].reshape(rows, cols)
    y = p.mu2 + z[n:].reshape(rows, cols)
    return x, y


def _embedding_eigenvalues(m1, m2, nu, a):
    i = np.minimum(np.arange(m1), m1 - np.arange(m1))
    j = np.minimum(np.arange(m2), m2 - np.arange(m2))
    base = matern_correlation(np.hypot(i[:, None], j[None, :]), nu, a)
    return np.fft.fft2(base).real


def simulate_matern_pair(rows: int, cols: int, nu: float, a: float, rng, max_pad: int = 8):
    """Two independent zero-mean unit-variance Matérn fields.

    Uses circulant embedding on a torus at least twice the lattice in each
    direction, growing the torus until the embedding is non-negative
    definite (up to `max_pad` times the lattice). Residual negative
    eigenvalues beyond that are clipped to zero.
    """
    rng = as_rng(rng, OP_GRF)
    factor = 2
    while True:
        m1 = 1 << int(math.ceil(math.log2(max(factor * rows, 2))))
        m2 = 1 << int(math.ceil(math.log2(max(factor * cols, 2))))
        lam = _embedding_eigenvalues(m1, m2, nu, a)
        if lam.min() >= -1e-10 * lam.max() or factor >= max_pad:
            break
        factor *= 2
    lam = np.clip(lam, 0.0, None)
    eps = rng.standard_normal((m1, m2)) + 1j * rng.standard_normal((m1, m2))
    w = np.fft.fft2(np.sqrt(lam / (m1 * m2)) * eps)
    return w.real[:rows, :cols].copy(), w.imag[:rows, :cols].copy()


def _simulate_mixing(rows, cols, p: MaternParams, rng):
    if not p.equal_structure:
        raise MethodRequiresEqualParams("mixing needs nu1 = nu2 = nu12 and a1 = a2 = a12")
    z1, z2 = simulate_matern_pair(rows, cols, p.nu1, p.a1, rng)
    s1, s2 = math.sqrt(p.sigma1_sq), math.sqrt(p.sigma2_sq)
    x = p.mu1 + s1 * z1
    y = p.mu2 + s2 * (p.rho12 * z1 + math.sqrt(1.0 - p.rho12**2) * z2)
    return x, y


def simulate_bivariate_grf(
    rows: int, cols: int, p: MaternParams, method: str = "mixing", seed=0
) -> tuple[Grid, Grid]:
    """Simulate ``(X, Y)`` with bivariate Matérn covariance.

    ``method="cholesky"`` factorises the dense joint covariance and works
    for any admissible parameters on small lattices. ``method="mixing"``
    combines two independent Matérn fields and is exact when both fields
    share smoothness and scale.
    """
    rng = as_rng(seed, OP_GRF)
    if method == "cholesky":
        x, y = _simulate_cholesky(rows, cols, p, rng)
    elif method == "mixing":
        x, y = _simulate_mixing(rows, cols, p, rng)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Grid.from_array(x), Grid.from_array(y)


def simulate_texture(rows: int, cols: int, nu: float = 1.5, a: float = 1 / 40, seed=0,
                     mean: float = 0.0, sd: float = 1.0) -> Grid:
    """A single smooth Matérn field, handy as a synthetic test image."""
    z, _ = simulate_matern_pair(rows, cols, nu, a, as_rng(seed, OP_GRF))
    return Grid.from_array(mean + sd * z)
