import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from codisp.ar2d import (
    Ar2dCoeffs,
    BlockPartition,
    approximate_image,
    block_coefficients,
    find_gap,
    fit_ar2d_ls,
    generate_ar2d,
    impute_gap,
    simulate_ar2d,
    trimmed_dims,
)
from codisp.contamination import centered_gap, cut_gap
from codisp.errors import (
    GapNotRectangular,
    KOutOfRange,
    NeighborhoodOutOfBounds,
    SingularSystem,
    TooFewCells,
)
from codisp.grid import Grid
from codisp.randomfield import simulate_texture


def test_fit_recovers_noise_free_field():
    rng = np.random.default_rng(0)
    row = rng.standard_normal(12)
    col = np.r_[row[0], rng.standard_normal(11)]
    f = generate_ar2d(row, col, (0.5, 0.4, -0.2))
    c = fit_ar2d_ls(f)
    assert np.allclose(c.as_array(), [0.5, 0.4, -0.2], atol=1e-10)


def test_fit_errors():
    with pytest.raises(TooFewCells):
        fit_ar2d_ls(np.zeros((1, 5)))
    with pytest.raises(SingularSystem):
        fit_ar2d_ls(np.ones((6, 6)))
    m = np.zeros((4, 4), bool)
    m[0, :2] = True
    with pytest.raises(TooFewCells):
        fit_ar2d_ls(np.ones((4, 4)), m)


def test_fit_uses_only_complete_stencils():
    rng = np.random.default_rng(1)
    row = rng.standard_normal(15)
    col = np.r_[row[0], rng.standard_normal(14)]
    f = generate_ar2d(row, col, (0.3, 0.3, 0.1))
    m = np.ones(f.shape, bool)
    m[5, 5] = False
    f[5, 5] = 1e6  # garbage under the mask must not matter
    c = fit_ar2d_ls(f, m)
    assert np.allclose(c.as_array(), [0.3, 0.3, 0.1], atol=1e-9)


@given(st.integers(2, 60), st.integers(2, 60), st.integers(4, 12))
def test_trimmed_dims(rows, cols, k):
    if k > min(rows, cols):
        return
    mr, mc = trimmed_dims(rows, cols, k)
    assert mr <= rows and mc <= cols
    assert (mr - 1) % (k - 1) == 0 and (mc - 1) % (k - 1) == 0
    assert rows - mr < k - 1 and cols - mc < k - 1


def test_block_partition():
    bp = BlockPartition(5, 23, 18)
    assert bp.trimmed_dims == (21, 17)
    assert bp.n_blocks == (5, 4)
    blocks = bp.blocks
    assert len(blocks) == 20
    # (k-1)-wide tiles start after the boundary row and column, no overlap
    assert blocks[0] == (slice(1, 5), slice(1, 5))
    assert blocks[0][1].stop == blocks[1][1].start
    with pytest.raises(KOutOfRange):
        BlockPartition(3, 10, 10)
    with pytest.raises(KOutOfRange):
        BlockPartition(11, 10, 10)


def test_block_coefficients_per_block():
    rng = np.random.default_rng(2)
    row = rng.standard_normal(9)
    col = np.r_[row[0], rng.standard_normal(8)]
    f = generate_ar2d(row, col, (0.2, 0.5, 0.1))
    co = block_coefficients(f, 5)
    assert co.shape == (2, 2, 3)
    assert np.allclose(co, [0.2, 0.5, 0.1], atol=1e-8)


def test_approximate_image_shape_and_quality():
    t = simulate_texture(65, 65, seed=0, nu=1.5, a=0.1)
    approx = approximate_image(t, 9)
    assert approx.shape == (65, 65)
    assert np.array_equal(approx.values[0], t.values[0])
    assert np.array_equal(approx.values[:, 0], t.values[:, 0])
    err = approx.values - t.values
    assert err.var() < 0.1 * t.values.var()


def test_find_gap():
    m = np.ones((10, 10), bool)
    assert find_gap(m) is None
    m[2:5, 3:7] = False
    assert find_gap(m) == (2, 3, 3, 4)
    m[8, 8] = False
    with pytest.raises(GapNotRectangular):
        find_gap(m)


def test_impute_reproduces_noise_free_ar_field():
    # every bordering block follows the same model, so the north and west
    # predictors are exact; the gap interior should be recovered closely
    rng = np.random.default_rng(3)
    row = rng.standard_normal(40)
    col = np.r_[row[0], rng.standard_normal(39)]
    f = generate_ar2d(row, col, (0.45, 0.45, -0.2))
    g = Grid.from_array(f)
    holed = cut_gap(g, centered_gap(g.shape, 4))
    filled = impute_gap(holed)
    gap = ~holed.mask
    assert filled.fully_observed
    assert np.array_equal(filled.values[holed.mask], f[holed.mask])
    assert np.abs(filled.values[gap] - f[gap]).max() < 0.5 * np.abs(f).max()


def test_impute_leaves_observed_cells_and_is_order_free():
    t = simulate_texture(120, 120, seed=4, nu=1.5, a=0.05)
    holed = cut_gap(t, centered_gap(t.shape, 20, 12))
    a = impute_gap(holed)
    b = impute_gap(holed)
    assert a == b
    assert np.array_equal(a.values[holed.mask], t.values[holed.mask])
    # filled values stay within the local range of the field
    lo, hi = t.values.min(), t.values.max()
    gap = ~holed.mask
    assert lo - 1 < a.values[gap].min() and a.values[gap].max() < hi + 1


def test_impute_bounds():
    t = simulate_texture(60, 60, seed=5)
    holed = cut_gap(t, centered_gap(t.shape, 20))
    with pytest.raises(NeighborhoodOutOfBounds):
        impute_gap(holed)
    assert impute_gap(t) is t


def test_simulated_field_estimates():
    x = simulate_ar2d(200, 200, (0.4, 0.3, -0.1), seed=1)
    c = fit_ar2d_ls(x)
    assert np.allclose(c.as_array(), [0.4, 0.3, -0.1], atol=0.05)
    assert Ar2dCoeffs.zero().as_array().tolist() == [0.0, 0.0, 0.0]
