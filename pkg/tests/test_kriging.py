import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from codisp.errors import (
    DegenerateFit,
    DuplicatePointsWithZeroNugget,
    NonPositiveInput,
    RankDeficient,
    TooFewBins,
)
from codisp.grid import MarkedPointSet
from codisp.kriging import (
    FAMILIES,
    EmpiricalVariogram,
    OrdinaryKriging,
    TransformSpec,
    VariogramModel,
    VariogramSpec,
    boxcox,
    boxcox_inverse,
    empirical_variogram,
    fit_trend_poly2,
    fit_variogram_wls,
    krige_pipeline,
    variogram,
)


@given(st.floats(-2, 2), st.lists(st.floats(0.01, 1e3), min_size=1, max_size=20))
def test_boxcox_round_trip(lam, ys):
    y = np.array(ys)
    assert np.allclose(boxcox_inverse(boxcox(y, lam), lam), y, rtol=1e-9)


def test_boxcox_special_cases():
    assert np.allclose(boxcox([1.0, np.e], 0.0), [0.0, 1.0])
    assert np.allclose(boxcox([3.0], 1.0), [2.0])
    with pytest.raises(NonPositiveInput):
        boxcox([1.0, 0.0], 0.5)


def test_trend_recovers_quadratic():
    rng = np.random.default_rng(0)
    xy = rng.uniform(0, 1000, (80, 2))
    b = np.array([3.0, 0.01, -0.02, 1e-5, 2e-5, -3e-5])
    x, y = xy.T
    z = b[0] + b[1] * x + b[2] * y + b[3] * x * x + b[4] * y * y + b[5] * x * y
    trend, resid = fit_trend_poly2(MarkedPointSet(xy, {"z": z}), "z")
    assert np.allclose(trend.coefficients, b, rtol=1e-6, atol=1e-12)
    assert np.abs(resid).max() < 1e-9
    assert np.allclose(trend.predict([500.0], [250.0]), b @ [1, 500, 250, 500**2, 250**2, 500 * 250])


def test_trend_rank_deficient():
    xy = np.column_stack([np.arange(10.0), np.zeros(10)])
    with pytest.raises(RankDeficient):
        fit_trend_poly2(MarkedPointSet(xy, {"z": np.arange(10.0)}), "z")


@pytest.mark.parametrize("family", FAMILIES)
def test_variogram_shapes(family):
    d = np.array([0.0, 1e-9, 1.0, 5.0, 100.0])
    g = variogram(family, d, 0.5, 2.0, 3.0)
    assert g[0] == 0.0
    assert g[1] == pytest.approx(0.5, abs=1e-6)
    if family != "wave":
        assert np.all(np.diff(g[1:]) >= 0)
    assert g[-1] == pytest.approx(2.5, abs=0.1 if family == "wave" else 1e-9)


def test_spherical_reaches_sill_at_range():
    assert variogram("spherical", 3.0, 0.0, 2.0, 3.0) == pytest.approx(2.0)
    assert variogram("spherical", 4.0, 0.0, 2.0, 3.0) == pytest.approx(2.0)


def test_empirical_variogram_brute_force():
    rng = np.random.default_rng(1)
    xy = rng.uniform(0, 10, (40, 2))
    z = rng.standard_normal(40)
    emp = empirical_variogram(MarkedPointSet(xy, {"z": z}), "z", 1.0, 5.0)
    sums = {}
    for i in range(40):
        for j in range(i + 1, 40):
            d = np.hypot(*(xy[i] - xy[j]))
            if d < 5.0:
                k = int(d // 1.0)
                s = sums.setdefault(k, [0, 0.0, 0.0])
                s[0] += 1
                s[1] += d
                s[2] += (z[i] - z[j]) ** 2
    keys = sorted(sums)
    assert list(emp.pair_count) == [sums[k][0] for k in keys]
    assert np.allclose(emp.distance, [sums[k][1] / sums[k][0] for k in keys])
    assert np.allclose(emp.gamma, [sums[k][2] / (2 * sums[k][0]) for k in keys])


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("nugget", [0.0, 0.3])
def test_fit_round_trip(family, nugget):
    d = np.linspace(0.5, 30, 25)
    true = VariogramModel(family, nugget, 1.7, 6.0)
    emp = EmpiricalVariogram(d, true(d), np.arange(25, 0, -1))
    m = fit_variogram_wls(emp, family)
    assert m.nugget == pytest.approx(nugget, abs=1e-3 * 2.0)
    assert m.partial_sill == pytest.approx(1.7, rel=1e-3)
    assert m.range_param == pytest.approx(6.0, rel=1e-3)


def test_fit_fixed_nugget_and_errors():
    d = np.linspace(1, 20, 10)
    emp = EmpiricalVariogram(d, VariogramModel("exponential", 0.2, 1.0, 5.0)(d), np.ones(10, int))
    m = fit_variogram_wls(emp, "exponential", nugget=0.2)
    assert m.nugget == 0.2
    assert m.range_param == pytest.approx(5.0, rel=1e-6)
    with pytest.raises(TooFewBins):
        fit_variogram_wls(EmpiricalVariogram(d[:2], d[:2], np.ones(2, int)), "exponential")
    flat = EmpiricalVariogram(d, np.full(10, 1.0), np.ones(10, int))
    with pytest.raises(DegenerateFit):
        fit_variogram_wls(flat, "exponential")


def test_kriging_interpolates_and_weights_sum_to_one():
    rng = np.random.default_rng(2)
    xy = rng.uniform(0, 100, (30, 2))
    z = rng.standard_normal(30)
    ok = OrdinaryKriging(xy, z, VariogramModel("spherical", 0.0, 1.0, 40.0))
    assert np.allclose(ok.predict(xy), z, atol=1e-8)
    w = ok.weights(rng.uniform(0, 100, (50, 2)))
    assert np.allclose(w.sum(axis=1), 1.0, atol=1e-10)


def test_kriging_duplicates():
    xy = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
    z = np.array([1.0, 3.0, 2.0, 0.0])
    with pytest.raises(DuplicatePointsWithZeroNugget):
        OrdinaryKriging(xy, z, VariogramModel("exponential", 0.0, 1.0, 1.0))
    ok = OrdinaryKriging(xy, z, VariogramModel("exponential", 0.5, 1.0, 1.0))
    assert np.isfinite(ok.predict([[0.0, 0.0]])).all()


def test_pipeline_recovers_smooth_surface():
    rng = np.random.default_rng(3)
    gx, gy = np.meshgrid(np.linspace(0, 100, 15), np.linspace(0, 100, 15))
    xy = np.column_stack([gx.ravel(), gy.ravel()])

    def f(p):
        return 50 + 10 * np.sin(p[:, 0] / 20) + 0.002 * p[:, 1] ** 2

    P = MarkedPointSet(xy, {"v": f(xy) + 0.1 * rng.standard_normal(len(xy))})
    targets = rng.uniform(10, 90, (100, 2))
    res = krige_pipeline(P, "v", TransformSpec(0.5, "poly2"), VariogramSpec("exponential"), targets)
    assert np.abs(res.predictions - f(targets)).max() < 1.0
    assert res.trend is not None and res.empirical is not None
