import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fxvg.specfun import (
    QuadratureError,
    QuadratureSpec,
    bessel_k,
    bessel_k_scaled,
    gamma_kernel_range,
    gamma_log_peak,
    integrate_batch,
    ln_gamma,
    log_bessel_k,
    norm_cdf,
    psi_mixture,
    psi_mixture_batch,
)

# Frozen values from tests/oracles.py (mpmath, 30 digits; Euler integral for
# log-gamma, the cosh integral for K, the erf series for Phi, and direct
# quadrature of the gamma mixture for Psi).
LN_GAMMA_7_3 = 7.1478925230222487
BESSEL_CASES = [
    (0.8, 1.3, 0.33575174397162166),
    (2.5, 0.1, 1187.0212236418929),
    (10.3, 7.0, 0.26030896137021542),
    (0.0, 50.0, 3.4101677497894952e-23),
    (0.3, 1e-3, 14.406547529041027),
]
NORM_CDF_1 = 0.84134474606854295
NORM_CDF_M35 = 2.3262907903552504e-4
PSI_CASES = [
    ((0.3, -0.2, 4.0), 0.41316537015896006),
    ((1.5, 0.1, 0.0188), 0.99936074022707196),
    ((-0.4, 0.05, 0.75), 0.25614708076207808),
    ((0.02, 0.3, 250.0), 0.99999863571012762),
]


class TestLnGamma:
    def test_frozen_oracle(self):
        assert ln_gamma(7.3) == pytest.approx(LN_GAMMA_7_3, rel=1e-14)

    def test_integers_are_log_factorials(self):
        for n in range(1, 20):
            assert ln_gamma(n + 1) == pytest.approx(math.log(math.factorial(n)), rel=1e-14, abs=1e-15)

    def test_half(self):
        assert ln_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-15)

    def test_array_input(self):
        out = ln_gamma(np.array([1.0, 2.0, 7.3]))
        np.testing.assert_allclose(out, [0.0, 0.0, LN_GAMMA_7_3], atol=1e-14)

    @pytest.mark.parametrize("bad", [0.0, -1.5, float("nan")])
    def test_rejects_non_positive(self, bad):
        with pytest.raises(ValueError):
            ln_gamma(bad)


class TestBesselK:
    @pytest.mark.parametrize("order,x,expected", BESSEL_CASES)
    def test_frozen_oracle(self, order, x, expected):
        assert bessel_k(order, x) == pytest.approx(expected, rel=1e-12)

    def test_half_order_closed_form(self):
        x = np.array([0.01, 0.5, 1.0, 3.0, 20.0])
        np.testing.assert_allclose(bessel_k(0.5, x), np.sqrt(np.pi / (2 * x)) * np.exp(-x), rtol=1e-13)

    @given(st.floats(0.0, 30.0), st.floats(1e-3, 60.0))
    @settings(max_examples=200, deadline=None)
    def test_even_in_order(self, order, x):
        assert bessel_k(-order, x) == bessel_k(order, x)

    def test_recurrence_grid(self):
        for v in np.arange(0.5, 5.01, 0.5):
            for x in np.linspace(0.1, 10.0, 12):
                lhs = bessel_k(v + 1, x)
                rhs = bessel_k(v - 1, x) + (2 * v / x) * bessel_k(v, x)
                assert lhs == pytest.approx(rhs, rel=1e-8)

    def test_log_form_matches_and_survives_overflow(self):
        for v, x in [(0.8, 1.3), (10.3, 7.0), (25.0, 0.5)]:
            assert log_bessel_k(v, x) == pytest.approx(math.log(bessel_k(v, x)), rel=1e-12)
        # K_30(1e-12) ~ Gamma(30)/2 (2/x)^30 ~ 1e399 overflows a double; its
        # log does not, and matches the small-argument asymptote
        x = 1e-12
        asym = math.lgamma(30.0) - math.log(2.0) + 30.0 * math.log(2.0 / x)
        assert log_bessel_k(30.0, x) == pytest.approx(asym, rel=1e-12)
        with pytest.raises(OverflowError):
            bessel_k(30.0, x)

    @pytest.mark.parametrize("order", [0.7, 1.7, 4.2])
    def test_log_form_at_tiny_argument(self, order):
        # K_{mu+1} overflows here even though the log of K_order is modest
        x = 1e-300
        asym = math.lgamma(order) - math.log(2.0) + order * math.log(2.0 / x)
        assert log_bessel_k(order, x) == pytest.approx(asym, rel=1e-12)

    def test_scaled(self):
        assert bessel_k_scaled(0.0, 50.0) == pytest.approx(BESSEL_CASES[3][2] * math.exp(50.0), rel=1e-12)

    def test_decreasing_in_x(self):
        x = np.linspace(0.05, 30, 200)
        assert np.all(np.diff(bessel_k(1.7, x)) < 0)

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_rejects_non_positive_argument(self, bad):
        with pytest.raises(ValueError):
            bessel_k(1.0, bad)


class TestNormCdf:
    def test_frozen_oracle(self):
        assert norm_cdf(1.0) == pytest.approx(NORM_CDF_1, rel=1e-15)
        assert norm_cdf(-3.5) == pytest.approx(NORM_CDF_M35, rel=1e-13)

    @given(st.floats(-40.0, 40.0))
    def test_symmetry(self, x):
        assert abs(norm_cdf(x) + norm_cdf(-x) - 1.0) <= 1e-14

    def test_limits(self):
        assert norm_cdf(0.0) == 0.5
        assert norm_cdf(-40.0) < 1e-300
        assert norm_cdf(40.0) == 1.0


class TestQuadrature:
    def test_polynomial_exact(self):
        edges = np.array([[0.0, 2.0]])
        vals, _ = integrate_batch(lambda x, i: x ** 5, edges)
        assert vals[0] == pytest.approx(64.0 / 6.0, rel=1e-14)

    def test_batch_independent_items(self):
        edges = np.array([[0.0, math.pi], [0.0, 1.0], [1.0, math.e]])
        funcs = [np.sin, np.exp, lambda x: 1.0 / x]

        def f(x, item):
            out = np.empty_like(x)
            for k, fn in enumerate(funcs):
                rows = item == k
                out[rows] = fn(x[rows])
            return out

        vals, errs = integrate_batch(f, edges)
        np.testing.assert_allclose(vals, [2.0, math.e - 1.0, 1.0], rtol=1e-12)
        assert np.all(errs < 1e-9)

    def test_failure_raises(self):
        spec = QuadratureSpec(rel_tol=1e-14, abs_tol=1e-300, max_subdivisions=2)
        with pytest.raises(QuadratureError):
            integrate_batch(lambda x, i: np.sin(1.0 / x), np.array([[1e-4, 1.0]]), spec)

    @pytest.mark.parametrize("kwargs", [dict(rel_tol=0), dict(abs_tol=-1), dict(max_subdivisions=0)])
    def test_spec_validation(self, kwargs):
        with pytest.raises(ValueError):
            QuadratureSpec(**kwargs)


class TestGammaHelpers:
    @pytest.mark.parametrize("g", [0.01, 0.7, 3.0, 9.99, 10.0, 57.0, 1e4])
    def test_log_peak(self, g):
        direct = g * math.log(g) - g - math.lgamma(g)
        assert float(gamma_log_peak(g)) == pytest.approx(direct, rel=1e-9, abs=1e-12)

    def test_log_peak_large_shape_is_stable(self):
        # direct evaluation loses every digit here; the asymptote is 0.5 log(g / 2 pi)
        g = 8e6
        assert float(gamma_log_peak(g)) == pytest.approx(0.5 * math.log(g / (2 * math.pi)), abs=1e-7)

    @pytest.mark.parametrize("g", [1e-3, 0.0188, 1.0, 4.7, 100.0, 8e6])
    def test_kernel_range_solves_drop(self, g):
        lo, hi = gamma_kernel_range(g, 50.0)
        for w in (lo[0], hi[0]):
            assert g * (math.expm1(w) - w) == pytest.approx(50.0, rel=1e-10)
        assert lo[0] < 0 < hi[0]


class TestPsi:
    @pytest.mark.parametrize("args,expected", PSI_CASES)
    def test_frozen_oracle(self, args, expected):
        assert psi_mixture(*args) == pytest.approx(expected, rel=1e-9, abs=1e-12)

    def test_centre(self):
        assert psi_mixture(0.0, 0.0, 3.7) == pytest.approx(0.5, abs=1e-14)

    def test_extremes(self):
        assert psi_mixture(1e6, 0.0, 1.0) == pytest.approx(1.0, abs=1e-12)
        assert psi_mixture(-1e6, 0.0, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_b_only_matches_student_t_style_expectation(self):
        # a = 0: Psi = E[Phi(b sqrt(U))]; compare with scipy integration
        from scipy import integrate, special, stats

        b, g = 0.7, 2.3
        ref, _ = integrate.quad(lambda u: special.ndtr(b * math.sqrt(u)) * stats.gamma.pdf(u, g), 0, np.inf)
        assert psi_mixture(0.0, b, g) == pytest.approx(ref, rel=1e-9)

    @given(st.floats(-5, 5), st.floats(-3, 3), st.floats(0.01, 50))
    @settings(max_examples=60, deadline=None)
    def test_symmetry(self, a, b, g):
        assert psi_mixture(a, b, g) + psi_mixture(-a, -b, g) == pytest.approx(1.0, abs=1e-8)

    def test_step_far_into_gamma_tail(self):
        # at g = 0.01 about 3e-5 of the gamma mass lies below u = a^2 ~ 1e-454,
        # where N(+-a/sqrt(u)) steps between 0 and 1; reference from mpmath at
        # 30 digits with breakpoints bracketing the step
        a = 1.2024930032115472e-227
        ref = 0.500014745803234874514880288679
        assert psi_mixture(a, 0.0, 0.01) == pytest.approx(ref, abs=1e-12)
        assert psi_mixture(-a, 0.0, 0.01) == pytest.approx(1.0 - ref, abs=1e-12)

    @given(st.floats(-300, 300), st.floats(-300, 300), st.booleans(), st.floats(0.01, 5))
    @settings(max_examples=60, deadline=None)
    def test_symmetry_extreme_magnitudes(self, la, lb, flip, g):
        a, b = 10.0 ** la, (-1.0 if flip else 1.0) * 10.0 ** lb
        assert psi_mixture(a, b, g) + psi_mixture(-a, -b, g) == pytest.approx(1.0, abs=1e-8)

    def test_unit_interval_on_random_triples(self):
        rng = np.random.default_rng(7)
        n = 10_000
        a = rng.uniform(-10, 10, n)
        b = rng.uniform(-5, 5, n)
        g = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), n))
        vals = psi_mixture_batch(a, b, g)
        assert np.all((vals >= 0.0) & (vals <= 1.0))

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            psi_mixture(0.1, 0.1, 0.0)
