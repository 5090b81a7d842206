import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from codisp.codispersion import (
    CodispConfig,
    codisp_at_lag,
    codisp_at_lag_with_count,
    codisp_map,
    point_codisp_map,
)
from codisp.errors import DimensionMismatch, LagOutOfRange, MissingBinWidth
from codisp.grid import Grid, MarkedPointSet, build_lag_window
from oracles import naive_codisp, naive_point_codisp

finite = st.floats(-1e3, 1e3, allow_nan=False, width=64)


@st.composite
def grid_pairs(draw, max_side=9):
    r = draw(st.integers(2, max_side))
    c = draw(st.integers(2, max_side))
    x = draw(arrays(np.float64, (r, c), elements=finite))
    y = draw(arrays(np.float64, (r, c), elements=finite))
    m = draw(arrays(np.bool_, (r, c)))
    return Grid(x, m), Grid(y, m)


def _same(a, b):
    return (math.isnan(a) and math.isnan(b)) or a == b


@given(grid_pairs(), st.data())
def test_single_lag_matches_naive_sum(pair, data):
    X, Y = pair
    h1 = data.draw(st.integers(-(X.cols - 1), X.cols - 1))
    h2 = data.draw(st.integers(-(X.rows - 1), X.rows - 1))
    cfg = CodispConfig(min_pairs=1)
    v, n = codisp_at_lag_with_count(X, Y, (h1, h2), cfg)
    ref, nref = naive_codisp(X.values, Y.values, X.mask, h1, h2, min_pairs=1)
    assert n == nref
    assert _same(v, ref)


@given(grid_pairs())
def test_values_bounded(pair):
    X, Y = pair
    w = build_lag_window(min(2, X.cols - 1), min(2, X.rows - 1))
    m = codisp_map(X, Y, w, CodispConfig(min_pairs=1))
    v = m.values[m.defined]
    assert np.all((v >= -1.0) & (v <= 1.0))


@given(grid_pairs(), st.floats(0.1, 100), st.floats(-50, 50))
def test_affine_invariance(pair, a, b):
    X, Y = pair
    cfg = CodispConfig(min_pairs=1)
    h = (1, 0)
    v = codisp_at_lag(X, Y, h, cfg)
    Y2 = Y.with_values(a * Y.values + b)
    v2 = codisp_at_lag(X, Y2, h, cfg)
    if math.isnan(v) or math.isnan(v2):
        return
    assert v2 == pytest.approx(v, abs=1e-9)


def test_sign_flip_and_self():
    rng = np.random.default_rng(0)
    X = Grid.from_array(rng.standard_normal((20, 20)))
    w = build_lag_window(3, 3)
    assert np.allclose(codisp_map(X, X, w).values, 1.0, atol=1e-12)
    neg = codisp_map(X, X.with_values(-X.values), w)
    assert np.allclose(neg.values, -1.0, atol=1e-12)


def test_undefined_when_too_few_pairs_or_flat():
    X = Grid.from_array(np.ones((10, 10)))
    Y = Grid.from_array(np.arange(100.0).reshape(10, 10))
    assert math.isnan(codisp_at_lag(X, Y, (1, 0)))
    Z = Grid.from_array(np.random.default_rng(1).standard_normal((10, 10)))
    # 9 * 10 = 90 pairs at (0, 1); 1 * 10 at (0, 9)
    assert not math.isnan(codisp_at_lag(Z, Y, (0, 1)))
    v, n = codisp_at_lag_with_count(Z, Y, (0, 9))
    assert n == 10 and math.isnan(v)


def test_pairwise_deletion_uses_union_of_masks():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((12, 12))
    mx = np.ones((12, 12), bool)
    my = np.ones((12, 12), bool)
    mx[3, 4] = False
    my[7, 2] = False
    X, Y = Grid(x, mx), Grid(rng.standard_normal((12, 12)), my)
    both = mx & my
    v, n = codisp_at_lag_with_count(X, Y, (1, 1), CodispConfig(min_pairs=1))
    ref, nref = naive_codisp(X.values, Y.values, both, 1, 1, min_pairs=1)
    assert n == nref == 11 * 11 - 4
    assert v == ref


def test_errors():
    X = Grid.from_array(np.zeros((5, 5)))
    with pytest.raises(DimensionMismatch):
        codisp_at_lag(X, Grid.from_array(np.zeros((5, 6))), (1, 0))
    with pytest.raises(LagOutOfRange):
        codisp_at_lag(X, X, (5, 0))


def test_worker_count_does_not_change_map():
    rng = np.random.default_rng(3)
    X = Grid.from_array(rng.standard_normal((40, 50)))
    Y = Grid.from_array(rng.standard_normal((40, 50)))
    w = build_lag_window(6, 5)
    a = codisp_map(X, Y, w, workers=1)
    for k in (2, 3, 7):
        b = codisp_map(X, Y, w, workers=k)
        assert a.values.tobytes() == b.values.tobytes()
        assert np.array_equal(a.pair_counts, b.pair_counts)


# --- point patterns ----------------------------------------------------------


def test_point_map_matches_brute_force():
    rng = np.random.default_rng(4)
    xy = rng.uniform(0, 10, size=(120, 2))
    a = rng.standard_normal(120)
    b = a + 0.5 * rng.standard_normal(120)
    P = MarkedPointSet(xy, {"a": a, "b": b})
    w = build_lag_window(3, 2)
    cfg = CodispConfig(min_pairs=5, bin_halfwidth=0.6)
    m = point_codisp_map(P, "a", "b", w, cfg, lag_spacing=1.5)
    for k, (h1, h2) in enumerate(w):
        ref, n = naive_point_codisp(xy, a, b, h1, h2, 1.5, 0.6, min_pairs=5)
        assert m.pair_counts[k] == n
        if math.isnan(ref):
            assert math.isnan(m.values[k])
        else:
            assert m.values[k] == pytest.approx(ref, abs=1e-12)


def test_point_map_on_lattice_equals_grid_map():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((9, 11))
    y = rng.standard_normal((9, 11))
    rr, cc = np.mgrid[0:9, 0:11]
    P = MarkedPointSet(np.column_stack([cc.ravel(), rr.ravel()]).astype(float), {"x": x.ravel(), "y": y.ravel()})
    w = build_lag_window(3, 3)
    pm = point_codisp_map(P, "x", "y", w, CodispConfig(bin_halfwidth=0.25), lag_spacing=1.0)
    gm = codisp_map(Grid.from_array(x), Grid.from_array(y), w)
    # the reverse of each pair has offset -h, which lies outside the half-plane
    assert np.array_equal(pm.pair_counts, gm.pair_counts)
    assert np.allclose(pm.values, gm.values, atol=1e-12, equal_nan=True)


def test_point_map_needs_bin_width():
    P = MarkedPointSet(np.zeros((2, 2)) + [[0, 0], [1, 1]], {"a": [1.0, 2.0]})
    with pytest.raises(MissingBinWidth):
        point_codisp_map(P, "a", "a", build_lag_window(1, 1))
