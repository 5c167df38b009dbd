import numpy as np
import pytest
from hypothesis import given, strategies as st

from permlaw import (
    AffineMap,
    DegenerateFit,
    Interval,
    InvalidParams,
    MonotoneFunction,
    MonotoneParam,
    NonConvergence,
    affine_align,
    check_gauge_uniqueness,
    construct_f,
    fit_additive,
    make_structure,
    make_synthetic,
    suggest_r0,
)
from permlaw.lawcore import INCREASING

from conftest import ComposedCode, law


def additive_y_plus_r():
    fk = np.linspace(0.0, 11.0, 12)
    gk = np.linspace(0.0, 1.0, 10)
    return make_synthetic(
        (fk, fk.copy()),
        (gk, gk.copy()),
        domain=(Interval(0.5, 9.5), Interval(0.0, 1.0)),
    )


monotone_values = st.lists(
    st.floats(min_value=0.01, max_value=3.0), min_size=4, max_size=9
).map(lambda steps: np.cumsum([0.0] + steps))


class TestMonotoneParam:
    @given(monotone_values)
    def test_from_values_roundtrip(self, vals):
        xs = np.arange(float(vals.size))
        mp = MonotoneParam.from_values(xs, vals)
        assert np.max(np.abs(mp.values() - vals)) < 1e-9 * max(1.0, vals[-1])

    @given(monotone_values, st.lists(
        st.floats(min_value=-2.0, max_value=2.0), min_size=3, max_size=3))
    def test_every_packed_vector_is_monotone(self, vals, tweak):
        xs = np.arange(float(vals.size))
        mp = MonotoneParam.from_values(xs, vals)
        vec = mp.pack()
        vec[: len(tweak)] += np.asarray(tweak)
        moved = mp.with_packed(vec).values()
        assert np.all(np.diff(moved) > 0)

    def test_rejects_non_monotone(self):
        with pytest.raises(InvalidParams):
            MonotoneParam.from_values(
                np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 0.5])
            )

    def test_to_function(self):
        mp = MonotoneParam.from_values(
            np.array([0.0, 1.0, 2.0]), np.array([5.0, 6.5, 9.0])
        )
        fn = mp.to_function()
        assert isinstance(fn, MonotoneFunction)
        assert fn(1.0) == pytest.approx(6.5, abs=1e-12)


class TestFitAdditive:
    def test_exact_additive_code(self):
        code = additive_y_plus_r()
        res = fit_additive(
            code, grid=(15, 15), knots_f=np.linspace(0.0, 11.0, 12),
            knots_g=np.linspace(0.0, 1.0, 10), max_iters=200, seed=0,
        )
        assert res.loss <= 1e-10
        ident = MonotoneFunction([0.0, 11.0], [0.0, 11.0], INCREASING)
        amap, err = affine_align(
            res.representation.f, ident, np.linspace(0.5, 9.5, 41)
        )
        assert err <= 1e-8
        assert amap.xi == pytest.approx(1.0, abs=1e-6)
        _, g_err = affine_align(
            res.representation.g, ident, np.linspace(0.05, 0.95, 31)
        )
        assert g_err <= 1e-8

    def test_gauge_normalization(self):
        code = additive_y_plus_r()
        res = fit_additive(code, grid=(15, 15), max_iters=150, seed=0)
        rep = res.representation
        x0 = rep.gauge.x0
        assert float(rep.f(x0)) == pytest.approx(0.0, abs=1e-9)
        ends = [abs(float(rep.g(rep.g.domain.lo))), abs(float(rep.g(rep.g.domain.hi)))]
        assert max(ends) == pytest.approx(1.0, abs=1e-9)

    def test_vanderwaals_has_a_loss_floor(self, vanderwaals):
        res = fit_additive(vanderwaals, grid=(20, 20), max_iters=300, seed=0)
        # no additive representation exists; the best fit stalls well above
        # the exact-law losses
        assert res.loss >= 1e-3
        assert res.loss < 1.0

    def test_cylinder_with_rich_knots(self, cylinder):
        kf = np.geomspace(0.003, 10.0 * np.pi * 9.0, 48)
        kg = np.geomspace(0.1, 3.0, 48)
        res = fit_additive(
            cylinder, grid=(30, 30), knots_f=kf, knots_g=kg,
            max_iters=400, seed=0,
        )
        assert res.loss <= 3e-5

    def test_fitted_f_aligns_with_constructive_f(self, cylinder):
        hs = make_structure(cylinder)
        f_con = construct_f(hs, r0=suggest_r0(hs), depth=16)
        res = fit_additive(
            cylinder, grid=(30, 30),
            knots_f=np.geomspace(0.003, 10.0 * np.pi * 9.0, 160),
            knots_g=np.geomspace(0.1, 3.0, 64),
            max_iters=400, seed=0, max_points=700,
        )
        f_fit = res.representation.f
        lo = max(f_fit.domain.lo, f_con.domain.lo)
        hi = min(f_fit.domain.hi, f_con.domain.hi)
        amap, err = affine_align(f_fit, f_con, np.linspace(lo, hi, 101))
        assert amap.xi > 0
        assert err <= 1e-3

    def test_loss_curve_monotone(self, cylinder):
        res = fit_additive(cylinder, grid=(15, 15), max_iters=60, seed=0)
        curve = np.asarray(res.loss_curve)
        assert curve.size >= 1
        assert np.all(np.diff(curve) <= 0)

    def test_quasi_fits_transformed_law(self, log_cylinder):
        res = fit_additive(
            log_cylinder, grid=(20, 20),
            knots_f=np.geomspace(0.1, 10.0, 24),
            knots_g=np.geomspace(0.1, 3.0, 24),
            knots_m=24, quasi=True, max_iters=300, seed=0,
        )
        assert res.loss <= 1e-5
        assert res.representation.m is not None

    def test_nonconvergence_carries_partial_result(self, vanderwaals):
        with pytest.raises(NonConvergence) as exc:
            fit_additive(
                vanderwaals, grid=(20, 20), max_iters=5, seed=0,
                loss_target=1e-12,
            )
        partial = exc.value.result
        assert partial.loss > 1e-12
        curve = np.asarray(partial.loss_curve)
        assert np.all(np.diff(curve) <= 0)

    def test_small_grid_rejected(self, cylinder):
        with pytest.raises(InvalidParams):
            fit_additive(cylinder, grid=(5, 5))


class TestAffineAlign:
    @given(
        st.floats(min_value=0.05, max_value=20.0),
        st.floats(min_value=-10.0, max_value=10.0),
    )
    def test_exact_for_true_affine(self, xi, theta):
        f1 = MonotoneFunction([0.0, 1.0, 3.0, 6.0], [0.0, 0.5, 2.0, 5.0], INCREASING)
        f2 = AffineMap(xi, theta).apply_to(f1)
        amap, err = affine_align(f1, f2, np.linspace(0.0, 6.0, 25))
        assert err <= 1e-12 * max(1.0, xi * 5.0 + abs(theta))
        assert amap.xi == pytest.approx(xi, rel=1e-9)
        assert amap.theta == pytest.approx(theta, abs=1e-9 * max(1.0, abs(theta)))

    def test_log_vs_square_is_far(self):
        xs = np.linspace(0.5, 8.0, 33)
        f1 = MonotoneFunction(xs, np.log(xs), INCREASING)
        f2 = MonotoneFunction(xs, xs**2, INCREASING)
        _, err = affine_align(f1, f2, xs)
        assert err > 1.0

    def test_degenerate_fit(self):
        f1 = MonotoneFunction([0.0, 1.0], [0.0, 2e-13], INCREASING)
        f2 = MonotoneFunction([0.0, 1.0], [0.0, 1.0], INCREASING)
        with pytest.raises(DegenerateFit):
            affine_align(f1, f2, np.array([0.0, 0.5, 1.0]))


class TestGaugeUniqueness:
    def test_identical_configs_are_identity_related(self, beer):
        report = check_gauge_uniqueness(beer, [(1.0, 1.0, 12), (1.0, 1.0, 12)])
        assert report.passed
        pair = report.pairs[0]
        assert pair.xi == pytest.approx(1.0, abs=1e-9)
        assert pair.theta == pytest.approx(0.0, abs=1e-9)

    def test_beer_anchors_affinely_related(self, beer):
        report = check_gauge_uniqueness(
            beer, [(0.5, None, 16), (1.0, None, 16), (2.0, None, 16)]
        )
        assert report.passed
        for pair in report.pairs:
            assert pair.xi > 0
            assert pair.f_err <= 1e-3
            assert pair.g_err <= 1e-3
