"""Seeded contamination regimes for grids and point sets.

Every function is pure given its seed. Noise operations only touch
values; missing-data operations only touch the mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlockTooLarge, EmptyResult, GapOutOfBounds, InvalidRange
from .grid import Grid, MarkedPointSet, masked_mean
from .rng import OP_BLOCKS, OP_CLASSIC, OP_GAP, OP_MIXTURE, OP_THIN, as_rng


@dataclass(frozen=True)
class MixtureNoiseSpec:
    """Per-cell replacement noise ``(1 - delta) N(0, sigma2) + delta N(0, tau2)``.

    `sigma2` documents the clean-component variance; only `delta` and
    `tau2` drive the draw.
    """

    delta: float
    sigma2: float = 1.0
    tau2: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if not (self.sigma2 > 0 and self.tau2 > 0):
            raise ValueError("sigma2 and tau2 must be > 0")


@dataclass(frozen=True)
class RandomBlocksSpec:
    block_size: int
    proportion: float
    seed: int = 0

    def __post_init__(self):
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if not 0.0 < self.proportion < 1.0:
            raise ValueError("proportion must lie in (0, 1)")


@dataclass(frozen=True)
class GapSpec:
    """A single rectangular gap.

    ``anchor`` is the top-left ``(row, col)``; None places the gap at a
    random anchor drawn with `seed` among those leaving room for the
    imputation neighbourhood.
    """

    gap_rows: int
    gap_cols: int
    anchor: tuple[int, int] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.gap_rows < 1 or self.gap_cols < 1:
            raise ValueError("gap dimensions must be >= 1")


def _require_full(g: Grid):
    if not g.fully_observed:
        raise ValueError("noise injection expects a fully observed grid")


def salt_pepper_mixture(g: Grid, spec: MixtureNoiseSpec, rng=None) -> Grid:
    """Replace each cell with probability delta by a N(mean, tau2) draw."""
    _require_full(g)
    rng = as_rng(spec.seed if rng is None else rng, OP_MIXTURE)
    hit = rng.random(g.shape) < spec.delta
    noise = rng.normal(masked_mean(g), np.sqrt(spec.tau2), size=g.shape)
    return g.with_values(np.where(hit, noise, g.values))


def salt_pepper_classic(g: Grid, delta: float, low: float = 0.0, high: float = 255.0, seed=0) -> Grid:
    """Set each cell with probability delta to `low` or `high` (fair coin)."""
    if not low < high:
        raise InvalidRange(f"need low < high, got {low} >= {high}")
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    _require_full(g)
    rng = as_rng(seed, OP_CLASSIC)
    hit = rng.random(g.shape) < delta
    salt = rng.random(g.shape) < 0.5
    vals = np.where(hit, np.where(salt, high, low), g.values)
    return g.with_values(vals)


def missing_random_blocks(g: Grid, spec: RandomBlocksSpec, rng=None) -> Grid:
    """Mask b x b blocks anchored at independently selected positions.

    Each of the ``(M-b+1)(N-b+1)`` top-left anchors is selected with
    probability ``spec.proportion``.
    """
    b = spec.block_size
    if b > min(g.shape):
        raise BlockTooLarge(f"block {b} exceeds grid {g.shape}")
    rng = as_rng(spec.seed if rng is None else rng, OP_BLOCKS)
    na, nb = g.rows - b + 1, g.cols - b + 1
    anchors = rng.random((na, nb)) < spec.proportion
    # 2D prefix sum spreads each anchor over its block
    cover = np.zeros((g.rows + 1, g.cols + 1), dtype=np.int64)
    ii, jj = np.nonzero(anchors)
    np.add.at(cover, (ii, jj), 1)
    np.add.at(cover, (ii + b, jj), -1)
    np.add.at(cover, (ii, jj + b), -1)
    np.add.at(cover, (ii + b, jj + b), 1)
    covered = cover.cumsum(0).cumsum(1)[: g.rows, : g.cols] > 0
    return g.with_mask(g.mask & ~covered)


def gap_anchor(shape, spec: GapSpec) -> tuple[int, int]:
    """Resolve the top-left corner of the gap described by `spec`."""
    rows, cols = shape
    gr, gc = spec.gap_rows, spec.gap_cols
    if gr > rows or gc > cols:
        raise GapOutOfBounds(f"gap {gr}x{gc} exceeds grid {rows}x{cols}")
    if spec.anchor is not None:
        r0, c0 = spec.anchor
        if r0 < 0 or c0 < 0 or r0 + gr > rows or c0 + gc > cols:
            raise GapOutOfBounds(f"gap at {spec.anchor} of size {gr}x{gc} leaves the grid")
        return int(r0), int(c0)
    # room for a 3K x 3K neighbourhood with the gap at offset K
    K = max(gr, gc) + 1
    lo_r, hi_r = K, rows - 2 * K
    lo_c, hi_c = K, cols - 2 * K
    if hi_r < lo_r or hi_c < lo_c:
        raise GapOutOfBounds(f"no anchor leaves room for the imputation neighbourhood of a {gr}x{gc} gap")
    rng = as_rng(spec.seed, OP_GAP)
    return int(rng.integers(lo_r, hi_r + 1)), int(rng.integers(lo_c, hi_c + 1))


def centered_gap(shape, gap_rows: int, gap_cols: int | None = None) -> GapSpec:
    gap_cols = gap_rows if gap_cols is None else gap_cols
    rows, cols = shape
    return GapSpec(gap_rows, gap_cols, ((rows - gap_rows) // 2, (cols - gap_cols) // 2))


def cut_gap(g: Grid, spec: GapSpec) -> Grid:
    r0, c0 = gap_anchor(g.shape, spec)
    mask = g.mask.copy()
    mask[r0 : r0 + spec.gap_rows, c0 : c0 + spec.gap_cols] = False
    return g.with_mask(mask)


def thin_points(P: MarkedPointSet, keep_fraction: float, seed=0) -> MarkedPointSet:
    """Keep ``round(keep_fraction * n)`` points drawn without replacement.

    Kept points retain their original order.
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must lie in (0, 1]")
    n = len(P)
    k = int(np.floor(keep_fraction * n + 0.5))
    if k == 0:
        raise EmptyResult(f"keeping {keep_fraction} of {n} points leaves none")
    if k == n:
        return P
    rng = as_rng(seed, OP_THIN)
    idx = np.sort(rng.choice(n, size=k, replace=False))
    return P.subset(idx)
