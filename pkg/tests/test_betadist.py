"""Beta math: closed-form examples, libm/high-precision oracles, and
the distribution-level invariants."""

import math

import mpmath as mp
import numpy as np
import pytest

from betadet import betadist as bd
from betadet.rng import Xoshiro256

EULER_GAMMA = 0.5772156649015329


class TestValidation:
    def test_params_reject_below_floor(self):
        with pytest.raises(ValueError):
            bd.BetaParams(0.49, 1.0)
        with pytest.raises(ValueError):
            bd.BetaParams(1.0, 0.3)
        bd.BetaParams(0.5, 0.5)  # floor itself is legal

    def test_params_reject_non_finite(self):
        with pytest.raises(ValueError):
            bd.BetaParams(math.inf, 1.0)
        with pytest.raises(ValueError):
            bd.BetaParams(1.0, math.nan)

    def test_lgamma_domain(self):
        for bad in (0.0, -1.0, math.inf, math.nan):
            with pytest.raises(ValueError):
                bd.lgamma(bad)

    def test_digamma_domain(self):
        with pytest.raises(ValueError):
            bd.digamma(0.0)
        with pytest.raises(ValueError):
            bd.digamma(-2.5)

    def test_log_pdf_domain(self):
        p = bd.BetaParams(2, 2)
        for bad in (-0.1, 1.1):
            with pytest.raises(ValueError):
                bd.log_pdf(p, bad)

    def test_quantile_domain(self):
        with pytest.raises(ValueError):
            bd.quantile(bd.BetaParams(2, 2), 0.0)
        with pytest.raises(ValueError):
            bd.quantile(bd.BetaParams(2, 2), 1.0)


class TestClosedFormExamples:
    def test_lgamma(self):
        assert bd.lgamma(1.0) == pytest.approx(0.0, abs=1e-14)
        assert bd.lgamma(2.0) == pytest.approx(0.0, abs=1e-14)
        assert bd.lgamma(4.0) == pytest.approx(math.log(6.0), rel=1e-13)

    def test_digamma(self):
        assert bd.digamma(1.0) == pytest.approx(-EULER_GAMMA, abs=1e-10)
        assert bd.digamma(2.0) == pytest.approx(1.0 - EULER_GAMMA, abs=1e-10)
        assert bd.digamma(0.5) == pytest.approx(
            -EULER_GAMMA - 2.0 * math.log(2.0), abs=1e-10)

    def test_log_beta_fn(self):
        assert bd.log_beta_fn(bd.BetaParams(1, 1)) == pytest.approx(0.0, abs=1e-13)
        assert bd.log_beta_fn(bd.BetaParams(2, 2)) == pytest.approx(
            math.log(1.0 / 6.0), rel=1e-13)
        assert bd.log_beta_fn(bd.BetaParams(2, 1)) == pytest.approx(
            math.log(0.5), rel=1e-13)

    def test_log_pdf(self):
        assert bd.log_pdf(bd.BetaParams(1, 1), 0.3) == pytest.approx(0.0, abs=1e-13)
        assert bd.log_pdf(bd.BetaParams(2, 2), 0.5) == pytest.approx(
            math.log(1.5), rel=1e-13)
        assert bd.log_pdf(bd.BetaParams(2, 1), 0.5) == pytest.approx(0.0, abs=1e-13)

    def test_log_pdf_finite_at_clamped_endpoints(self):
        p = bd.BetaParams(0.5, 0.5)
        assert math.isfinite(bd.log_pdf(p, 0.0))
        assert math.isfinite(bd.log_pdf(p, 1.0))

    def test_mean(self):
        assert bd.mean(bd.BetaParams(2, 2)) == 0.5
        assert bd.mean(bd.BetaParams(5, 1)) == pytest.approx(5.0 / 6.0, rel=1e-15)
        assert bd.mean(bd.BetaParams(0.5, 0.5)) == 0.5

    def test_variance(self):
        assert bd.variance(bd.BetaParams(2, 2)) == pytest.approx(0.05, rel=1e-14)
        assert bd.variance(bd.BetaParams(1, 1)) == pytest.approx(1.0 / 12.0, rel=1e-14)
        assert bd.variance(bd.BetaParams(100, 100)) == pytest.approx(
            0.0012437810945273632, rel=1e-13)

    def test_cdf(self):
        assert bd.cdf(bd.BetaParams(1, 1), 0.37) == pytest.approx(0.37, abs=1e-12)
        assert bd.cdf(bd.BetaParams(2, 2), 0.5) == pytest.approx(0.5, abs=1e-12)
        assert bd.cdf(bd.BetaParams(2, 1), 0.5) == pytest.approx(0.25, abs=1e-12)

    def test_quantile(self):
        assert bd.quantile(bd.BetaParams(1, 1), 0.9) == pytest.approx(0.9, abs=1e-12)
        assert bd.quantile(bd.BetaParams(2, 2), 0.5) == pytest.approx(0.5, abs=1e-12)
        assert bd.quantile(bd.BetaParams(2, 1), 0.25) == pytest.approx(0.5, abs=1e-12)

    def test_nll_grad_example(self):
        da, db = bd.nll_grad(bd.BetaParams(1, 1), 0.5)
        assert da == pytest.approx(math.log(2.0) - 1.0, abs=1e-10)
        assert da == pytest.approx(db, abs=1e-14)  # swap symmetry at y = 0.5


class TestSpecialFunctionOracles:
    def test_lgamma_vs_libm_grid(self):
        xs = np.concatenate([
            np.linspace(0.5, 20.0, 300),
            np.geomspace(20.0, 1e6, 200),
        ])
        for x in xs:
            ref = math.lgamma(float(x))
            assert abs(bd.lgamma(float(x)) - ref) <= 1e-12 * max(1.0, abs(ref))

    def test_lgamma_reflection_below_half(self):
        for x in (0.05, 0.1, 0.25, 0.4, 0.49):
            assert bd.lgamma(x) == pytest.approx(math.lgamma(x), rel=1e-12)

    def test_digamma_vs_mpmath_grid(self):
        xs = np.concatenate([
            np.linspace(0.5, 10.0, 200),
            np.geomspace(10.0, 1e6, 100),
        ])
        with mp.workdps(30):
            for x in xs:
                ref = float(mp.digamma(mp.mpf(float(x))))
                assert abs(bd.digamma(float(x)) - ref) <= 1e-10


class TestInvariants:
    def test_normalization_simpson(self):
        # Composite Simpson over [eps, 1-eps] with 20001 nodes.
        eps = bd.CLAMP_EPS
        n = 20001
        y = np.linspace(eps, 1.0 - eps, n)
        weights = np.ones(n)
        weights[1:-1:2] = 4.0
        weights[2:-1:2] = 2.0
        h = (y[-1] - y[0]) / (n - 1)
        for a in (0.6, 1.0, 2.0, 5.0, 20.0):
            for b in (0.6, 1.0, 2.0, 5.0, 20.0):
                dens = np.exp(bd.log_pdf_arrays(
                    np.full(n, a), np.full(n, b), y))
                integral = (h / 3.0) * float((weights * dens).sum())
                assert abs(integral - 1.0) <= 1e-5, (a, b, integral)

    def test_array_forms_match_scalar(self):
        rng = Xoshiro256(21)
        alphas = np.array([0.5 + 49.5 * rng.uniform() for _ in range(50)])
        betas = np.array([0.5 + 49.5 * rng.uniform() for _ in range(50)])
        ys = np.array([bd.clamp_unit(rng.uniform()) for _ in range(50)])
        arr = bd.log_pdf_arrays(alphas, betas, ys)
        da_arr, db_arr = bd.nll_grad_arrays(alphas, betas, ys)
        for i in range(50):
            p = bd.BetaParams(alphas[i], betas[i])
            assert arr[i] == bd.log_pdf(p, ys[i])
            da, db = bd.nll_grad(p, ys[i])
            assert da_arr[i] == da and db_arr[i] == db

    def test_swap_symmetry(self):
        rng = Xoshiro256(31)
        for _ in range(200):
            a = 0.5 + 30.0 * rng.uniform()
            b = 0.5 + 30.0 * rng.uniform()
            y = 0.01 + 0.98 * rng.uniform()
            lhs = bd.log_pdf(bd.BetaParams(a, b), y)
            rhs = bd.log_pdf(bd.BetaParams(b, a), 1.0 - y)
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))

    def test_cdf_quantile_round_trip(self):
        for a, b in [(1, 1), (2, 2), (2, 1), (0.6, 3), (5, 20), (20, 20)]:
            p = bd.BetaParams(a, b)
            for y in np.arange(0.01, 1.0, 0.01):
                back = bd.quantile(p, bd.cdf(p, float(y)))
                assert abs(back - y) <= 1e-7, (a, b, y, back)

    def test_mean_identity_exact(self):
        rng = Xoshiro256(41)
        for _ in range(100):
            a = 0.5 + 100.0 * rng.uniform()
            b = 0.5 + 100.0 * rng.uniform()
            p = bd.BetaParams(a, b)
            assert abs(bd.mean(p) * (a + b) - a) <= 1e-14 * max(1.0, a)

    def test_nll_grad_matches_finite_differences(self):
        rng = Xoshiro256(51)
        h = 1e-6
        for _ in range(1000):
            a = 0.6 + 49.4 * rng.uniform()
            b = 0.6 + 49.4 * rng.uniform()
            y = 0.01 + 0.98 * rng.uniform()
            da, db = bd.nll_grad(bd.BetaParams(a, b), y)
            fd_a = -(bd.log_pdf(bd.BetaParams(a + h, b), y)
                     - bd.log_pdf(bd.BetaParams(a - h, b), y)) / (2 * h)
            fd_b = -(bd.log_pdf(bd.BetaParams(a, b + h), y)
                     - bd.log_pdf(bd.BetaParams(a, b - h), y)) / (2 * h)
            assert abs(da - fd_a) <= 1e-6 * max(1.0, abs(fd_a)), (a, b, y)
            assert abs(db - fd_b) <= 1e-6 * max(1.0, abs(fd_b)), (a, b, y)

    def test_cdf_monotone(self):
        rng = Xoshiro256(61)
        for a, b in [(0.5, 0.5), (0.6, 4), (2, 2), (20, 5), (100, 100)]:
            p = bd.BetaParams(a, b)
            ys = sorted(rng.uniform() for _ in range(100))
            cs = [bd.cdf(p, y) for y in ys]
            assert all(c1 <= c2 for c1, c2 in zip(cs, cs[1:]))


class TestSampling:
    def test_uniform_sample_equals_raw_draw(self):
        # Beta(1,1) quantile is the identity, up to bisection resolution.
        s = bd.sample(bd.BetaParams(1, 1), Xoshiro256(77))
        u = Xoshiro256(77).uniform_open()
        assert abs(s - u) <= 1e-12

    def test_sample_deterministic(self):
        a = [bd.sample(bd.BetaParams(3, 4), r) for r in [Xoshiro256(5)] for _ in range(3)]
        b = [bd.sample(bd.BetaParams(3, 4), r) for r in [Xoshiro256(5)] for _ in range(3)]
        assert a == b

    @pytest.mark.parametrize("a,b,target", [(2, 2, 0.5), (5, 1, 5.0 / 6.0)])
    def test_monte_carlo_mean(self, a, b, target):
        rng = Xoshiro256(101)
        p = bd.BetaParams(a, b)
        vals = [bd.sample(p, rng) for _ in range(10_000)]
        assert abs(float(np.mean(vals)) - target) <= 0.01
