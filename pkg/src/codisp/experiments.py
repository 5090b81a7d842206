"""Experiment drivers: contaminate, treat, and map codispersion against a reference.

Each ``run_*`` function evaluates every parameter combination and returns
a list of :class:`MapResult` in a fixed order. Combination ``i`` draws its
randomness from the substream ``(seed, OP_*, i)``, so results do not
depend on how many workers evaluate the combinations.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ar2d import impute_gap
from .codispersion import CodispConfig, codisp_map, point_codisp_map
from .contamination import (
    GapSpec,
    MixtureNoiseSpec,
    RandomBlocksSpec,
    centered_gap,
    cut_gap,
    missing_random_blocks,
    salt_pepper_classic,
    salt_pepper_mixture,
    thin_points,
)
from .grid import CodispMap, Grid, LagWindow, MarkedPointSet
from .kriging import TransformSpec, VariogramSpec, krige_pipeline
from .randomfield import MaternParams, simulate_bivariate_grf, simulate_matern_pair
from .rng import OP_BLOCKS, OP_CLASSIC, OP_GAP, OP_GRF, OP_MIXTURE, OP_THIN, make_rng


@dataclass
class MapResult:
    params: dict
    cmap: CodispMap
    grids: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return "_".join(f"{k}{_tag(v)}" for k, v in self.params.items())

    def summary(self) -> dict:
        m = self.cmap
        return {
            **self.params,
            "mean_codisp": m.mean(),
            "min_codisp": m.min(),
            "max_codisp": m.max(),
            "defined_fraction": m.defined_fraction,
            "pair_floor": int(m.pair_counts.min()) if len(m.pair_counts) else 0,
        }


def _tag(v) -> str:
    if isinstance(v, float):
        return f"{v:g}"
    return str(v).replace(" ", "-")


def _pmap(fn, items, workers: int):
    if workers <= 1:
        return [fn(i, it) for i, it in enumerate(items)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(len(items)), items))


def run_saltpepper(
    reference: Grid,
    deltas,
    tau2s,
    window: LagWindow,
    cfg: CodispConfig,
    seed: int = 0,
    mode: str = "mixture",
    low: float = 0.0,
    high: float = 255.0,
    reps: int = 1,
    workers: int = 1,
) -> list[MapResult]:
    """Reference image vs its salt-and-pepper contaminated versions."""
    if mode == "mixture":
        combos = list(itertools.product(deltas, tau2s, range(reps)))
    elif mode == "classic":
        combos = list(itertools.product(deltas, [None], range(reps)))
    else:
        raise ValueError(f"unknown noise mode {mode!r}")

    def one(i, combo):
        delta, tau2, rep = combo
        if mode == "mixture":
            noisy = salt_pepper_mixture(
                reference, MixtureNoiseSpec(delta, tau2=tau2), rng=make_rng(seed, OP_MIXTURE, i)
            )
            params = {"delta": float(delta), "tau2": float(tau2)}
        else:
            noisy = salt_pepper_classic(reference, delta, low, high, seed=make_rng(seed, OP_CLASSIC, i))
            params = {"delta": float(delta)}
        if reps > 1:
            params["rep"] = rep
        return MapResult(params, codisp_map(reference, noisy, window, cfg))

    return _pmap(one, combos, workers)


def run_grf(
    rows: int,
    cols: int,
    params: MaternParams,
    deltas,
    tau2s,
    window: LagWindow,
    cfg: CodispConfig,
    seed: int = 0,
    method: str = "mixing",
    workers: int = 1,
) -> list[MapResult]:
    """Map X against Y, then X against contaminated versions of Y."""
    X, Y = simulate_bivariate_grf(rows, cols, params, method, seed=make_rng(seed, OP_GRF, 0))
    combos = list(itertools.product(deltas, tau2s))

    def one(i, combo):
        delta, tau2 = combo
        noisy = salt_pepper_mixture(Y, MixtureNoiseSpec(delta, tau2=tau2), rng=make_rng(seed, OP_MIXTURE, i))
        return MapResult({"delta": float(delta), "tau2": float(tau2)}, codisp_map(X, noisy, window, cfg))

    base = MapResult({"delta": 0.0, "tau2": 0.0}, codisp_map(X, Y, window, cfg), grids={"X": X, "Y": Y})
    return [base] + _pmap(one, combos, workers)


def run_missing(
    reference: Grid,
    block_sizes,
    proportions,
    window: LagWindow,
    cfg: CodispConfig,
    seed: int = 0,
    workers: int = 1,
) -> list[MapResult]:
    """Reference image vs copies with randomly placed missing blocks."""
    combos = list(itertools.product(block_sizes, proportions))

    def one(i, combo):
        b, prop = combo
        holed = missing_random_blocks(reference, RandomBlocksSpec(int(b), prop), rng=make_rng(seed, OP_BLOCKS, i))
        res = MapResult({"block": int(b), "prop": float(prop)}, codisp_map(reference, holed, window, cfg))
        res.info["missing_fraction"] = 1.0 - holed.n_observed / (holed.rows * holed.cols)
        return res

    return _pmap(one, combos, workers)


def run_gap(
    reference: Grid,
    gap_sizes,
    window: LagWindow,
    cfg: CodispConfig,
    seed: int = 0,
    anchor: str = "center",
    K: int | None = None,
    workers: int = 1,
) -> list[MapResult]:
    """Cut one square gap, impute it, and map reference vs imputed."""

    def one(i, size):
        size = int(size)
        if anchor == "center":
            spec = centered_gap(reference.shape, size)
        elif anchor == "random":
            spec = GapSpec(size, size, None, seed=int(make_rng(seed, OP_GAP, i).integers(2**63)))
        else:
            raise ValueError(f"unknown gap anchor {anchor!r}")
        holed = cut_gap(reference, spec)
        filled = impute_gap(holed, K)
        res = MapResult({"gap": size}, codisp_map(reference, filled, window, cfg), grids={"imputed": filled})
        gap = ~holed.mask
        res.info["gap_variance"] = float(filled.values[gap].var())
        res.info["reference_gap_variance"] = float(reference.values[gap].var())
        return res

    return _pmap(one, list(gap_sizes), workers)


@dataclass(frozen=True)
class ElementSetup:
    """Kriging settings for one soil element."""

    name: str
    transform: TransformSpec = TransformSpec()
    variogram: VariogramSpec = VariogramSpec()


def run_thinning(
    soil: MarkedPointSet,
    trees: MarkedPointSet,
    elements,
    keeps,
    window: LagWindow,
    cfg: CodispConfig,
    lag_spacing: float,
    tree_mark: str = "dbh",
    seed: int = 0,
    workers: int = 1,
) -> list[MapResult]:
    """Tree marks vs soil values kriged at the trees from full or thinned samples."""
    combos = list(itertools.product(elements, keeps))

    def one(i, combo):
        el, keep = combo
        sample = soil if keep >= 1.0 else thin_points(soil, keep, seed=make_rng(seed, OP_THIN, i))
        kr = krige_pipeline(sample, el.name, el.transform, el.variogram, trees.xy)
        pts = trees.with_marks(_soil=kr.predictions)
        cmap = point_codisp_map(pts, tree_mark, "_soil", window, cfg, lag_spacing)
        res = MapResult({"element": el.name, "keep": float(keep)}, cmap)
        m = kr.model
        res.info.update(
            n_soil=len(sample), family=m.family, nugget=m.nugget, partial_sill=m.partial_sill, range=m.range_param
        )
        return res

    return _pmap(one, combos, workers)


def synthetic_texture(rows: int, cols: int, seed: int = 0, nu: float = 1.5, a: float = 1 / 40) -> Grid:
    """Smooth zero-mean, unit-variance Matérn field used as a stand-in image."""
    z, _ = simulate_matern_pair(rows, cols, nu, a, make_rng(seed, OP_GRF, 0))
    return Grid.from_array(z)


def synthetic_forest_plot(seed: int = 0, n_trees: int = 3000, lattice=(25, 20), extent=(1000.0, 500.0)):
    """Synthetic stand-in for a forest plot with soil samples and trees.

    Soil points sit on a regular lattice; three positive soil "elements"
    (``Al``, ``Ca``, ``P``) and the tree diameters (``dbh``) all follow one
    smooth latent surface plus independent noise.

    Returns ``(soil, trees)``.
    """
    rng = make_rng(seed, OP_THIN, 10_000)
    w, h = extent
    kx = rng.uniform(1.0, 2.5, size=3) * 2 * np.pi / w
    ky = rng.uniform(1.0, 2.5, size=3) * 2 * np.pi / h
    ph = rng.uniform(0, 2 * np.pi, size=3)

    def surface(x, y):
        return sum(np.sin(kx[i] * x + ph[i]) * np.cos(ky[i] * y) for i in range(3)) / 3.0

    nx, ny = lattice
    gx, gy = np.meshgrid((np.arange(nx) + 0.5) * w / nx, (np.arange(ny) + 0.5) * h / ny)
    sx, sy = gx.ravel(), gy.ravel()
    s = surface(sx, sy)
    n = len(sx)
    soil = MarkedPointSet(
        np.column_stack([sx, sy]),
        {
            "Al": 900.0 + 300.0 * s + 30.0 * rng.standard_normal(n),
            "Ca": 1500.0 + 600.0 * s + 60.0 * rng.standard_normal(n),
            "P": 3.0 + 1.0 * s + 0.1 * rng.standard_normal(n),
        },
        (0.0, w, 0.0, h),
    )
    tx = rng.uniform(0, w, n_trees)
    ty = rng.uniform(0, h, n_trees)
    dbh = 200.0 + 60.0 * surface(tx, ty) + 20.0 * rng.standard_normal(n_trees)
    trees = MarkedPointSet(np.column_stack([tx, ty]), {"dbh": dbh}, (0.0, w, 0.0, h))
    return soil, trees
