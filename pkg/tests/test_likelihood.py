"""Density operations: trivial values, support, symmetries, quadrature oracles.

scipy.integrate is the independent oracle here; the Monte Carlo path oracle
lives in the acceptance suite where it gets a bigger budget.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from chlosv import (
    ChloObservation,
    PeriodParams,
    SeriesControl,
    log_density_chlo,
    log_density_close,
    log_density_close_max,
    log_density_close_min,
    log_density_range,
    log_density_range_close,
)
from chlosv.errors import InvalidInputError, InvalidParameterError
from chlosv.likelihood import (
    chlo_loglik,
    close_max_loglik,
    gaussian_close_loglik,
    range_close_loglik,
    range_loglik,
)

SQRT_2PI = math.sqrt(2.0 * math.pi)


def gaussian_logpdf(x, mean, sd):
    # independent re-implementation used as the oracle for the close density
    return -0.5 * ((x - mean) / sd) ** 2 - math.log(sd * SQRT_2PI)


class TestClose:
    def test_mode_value(self):
        for sigma in (0.01, 0.02, 0.3):
            obs = ChloObservation(open=0.0, close=0.005, low=None, high=None)
            p = PeriodParams(mu=0.005, sigma=sigma)
            assert log_density_close(obs, p) == pytest.approx(math.log(1.0 / (SQRT_2PI * sigma)))

    def test_standard_normal_at_zero(self):
        obs = ChloObservation(open=0.0, close=0.0)
        assert log_density_close(obs, PeriodParams(mu=0.0, sigma=1.0)) == pytest.approx(-0.9189385, abs=1e-6)

    def test_against_independent_gaussian(self):
        obs = ChloObservation(open=0.0, close=0.01)
        p = PeriodParams(mu=0.000961, sigma=0.02)
        assert log_density_close(obs, p) == pytest.approx(gaussian_logpdf(0.01, 0.000961, 0.02), rel=1e-14)

    def test_nan_raises(self):
        with pytest.raises(InvalidInputError):
            ChloObservation(open=0.0, close=float("nan"))
        with pytest.raises(InvalidInputError):
            PeriodParams(mu=float("inf"), sigma=0.02)
        with pytest.raises(InvalidParameterError):
            PeriodParams(mu=0.0, sigma=0.0)


class TestChloSupport:
    P = PeriodParams(mu=0.0, sigma=0.02)

    def test_high_below_close_is_zero_density(self):
        obs = ChloObservation(open=0.0, close=0.01, low=-0.005, high=0.005)
        assert log_density_chlo(obs, self.P) == -math.inf

    def test_boundary_equality_is_zero_density(self):
        obs = ChloObservation(open=0.0, close=0.01, low=-0.005, high=0.01)
        assert log_density_chlo(obs, self.P) == -math.inf
        obs = ChloObservation(open=0.0, close=0.01, low=0.0, high=0.02)
        assert log_density_chlo(obs, self.P) == -math.inf

    def test_interior_is_finite(self):
        obs = ChloObservation(open=0.0, close=0.01, low=-1e-8, high=0.01 + 1e-8)
        v = log_density_chlo(obs, self.P)
        assert math.isfinite(v)

    def test_boundary_decay(self):
        # density falls to zero as the low rises to min(open, close)
        vals = []
        for eps in (1e-3, 1e-4, 1e-5, 1e-6):
            obs = ChloObservation(open=0.0, close=0.01, low=-eps, high=0.015)
            vals.append(log_density_chlo(obs, self.P))
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_missing_extreme_raises(self):
        with pytest.raises(InvalidInputError):
            log_density_chlo(ChloObservation(open=0.0, close=0.0, low=None, high=0.01), self.P)


class TestChloValues:
    def test_reflection_symmetry(self):
        # driftless law is symmetric under path reflection
        p = PeriodParams(mu=0.0, sigma=0.02)
        a = log_density_chlo(ChloObservation(open=0.0, close=0.011, low=-0.004, high=0.017), p)
        b = log_density_chlo(ChloObservation(open=0.0, close=-0.011, low=-0.017, high=0.004), p)
        assert a == pytest.approx(b, rel=1e-13)

    def test_scaling_collapses_as_cubed_density(self):
        lam = 3.7
        base = ChloObservation(open=0.0, close=0.01, low=-0.005, high=0.015)
        scaled = ChloObservation(open=0.0, close=0.01 * lam, low=-0.005 * lam, high=0.015 * lam)
        v0 = log_density_chlo(base, PeriodParams(mu=0.001, sigma=0.02))
        v1 = log_density_chlo(scaled, PeriodParams(mu=0.001 * lam, sigma=0.02 * lam))
        assert v1 == pytest.approx(v0 - 3.0 * math.log(lam), rel=1e-12)

    def test_translation_invariance(self):
        p = PeriodParams(mu=0.001, sigma=0.02)
        v0 = log_density_chlo(ChloObservation(open=0.0, close=0.01, low=-0.005, high=0.015), p)
        v1 = log_density_chlo(ChloObservation(open=4.6, close=4.61, low=4.595, high=4.615), p)
        assert v1 == pytest.approx(v0, rel=1e-9)

    def test_gaussian_limit_by_quadrature(self):
        # integrating the extremes out reproduces the close-only Gaussian
        p = PeriodParams(mu=0.001, sigma=0.02)
        close = 0.012
        span = 8 * p.sigma + 8 * abs(p.mu)

        def inner(low):
            obs = lambda high: ChloObservation(open=0.0, close=close, low=low, high=high)
            val, _ = quad(lambda b: math.exp(log_density_chlo(obs(b), p)),
                          max(0.0, close), max(0.0, close) + span, limit=100)
            return val

        total, _ = quad(inner, min(0.0, close) - span, min(0.0, close), limit=100)
        expected = math.exp(gaussian_logpdf(close, p.mu, p.sigma))
        assert total == pytest.approx(expected, rel=1e-6)


class TestRangeClose:
    def test_range_below_net_move_is_zero(self):
        obs = ChloObservation(open=0.0, close=0.01)
        p = PeriodParams(mu=0.0, sigma=0.02)
        assert log_density_range_close(0.01 - 0.001, obs, p) == -math.inf
        assert log_density_range_close(0.01, obs, p) == -math.inf

    def test_matches_quadrature_of_chlo(self):
        rng = np.random.default_rng(99)
        for _ in range(6):
            sigma = float(np.exp(rng.uniform(np.log(0.01), np.log(0.06))))
            mu = float(rng.normal(0.0, 0.3 * sigma))
            close = float(rng.normal(mu, sigma))
            r = abs(close) + sigma * float(rng.uniform(0.4, 2.5))
            p = PeriodParams(mu=mu, sigma=sigma)
            obs = ChloObservation(open=0.0, close=close)

            def slice_density(w):
                o = ChloObservation(open=0.0, close=close, low=w, high=w + r)
                return math.exp(log_density_chlo(o, p))

            val, _ = quad(slice_density, max(0.0, close) - r, min(0.0, close), limit=200)
            got = math.exp(log_density_range_close(r, obs, p))
            assert got == pytest.approx(val, rel=1e-6)

    def test_time_reversal_symmetry(self):
        # reversing the period swaps open/close and flips the drift
        p_fwd = PeriodParams(mu=0.0013, sigma=0.02)
        p_bwd = PeriodParams(mu=-0.0013, sigma=0.02)
        r = 0.025
        fwd = log_density_range_close(r, ChloObservation(open=0.0, close=0.009), p_fwd)
        bwd = log_density_range_close(r, ChloObservation(open=0.009, close=0.0), p_bwd)
        assert fwd == pytest.approx(bwd, rel=1e-13)

    def test_mc_smoke_against_path_simulation(self):
        # small-budget version of the acceptance oracle check
        from chlosv.simulate import Box, mc_density_oracle

        p = PeriodParams(mu=0.0, sigma=0.02)
        r_lo, r_hi = 0.018, 0.024
        c_lo, c_hi = 0.002, 0.008
        rng = np.random.default_rng(5)
        n_paths = 200_000
        box_prob = 0.0
        # P(range in [r_lo, r_hi], close in [c_lo, c_hi]) via 2d quadrature of the density
        def close_slice(c):
            obs = ChloObservation(open=0.0, close=c)
            val, _ = quad(lambda r: math.exp(log_density_range_close(r, obs, p)), r_lo, r_hi, limit=100)
            return val
        box_prob, _ = quad(close_slice, c_lo, c_hi, limit=100)

        step_sd = p.sigma / math.sqrt(2000)
        hits = 0
        cur = np.zeros(n_paths); lo = np.zeros(n_paths); hi = np.zeros(n_paths)
        for _ in range(2000):
            cur += step_sd * rng.standard_normal(n_paths)
            np.minimum(lo, cur, out=lo)
            np.maximum(hi, cur, out=hi)
        rr = hi - lo
        hits = np.count_nonzero((rr >= r_lo) & (rr <= r_hi) & (cur >= c_lo) & (cur <= c_hi))
        p_hat = hits / n_paths
        se = math.sqrt(p_hat * (1 - p_hat) / n_paths)
        # grid paths understate the range by ~2 * 0.583 sigma sqrt(dt); that shifts
        # the box probability by roughly the edge density times the offset
        offset = 2 * 0.583 * p.sigma / math.sqrt(2000)
        edge_density = max(math.exp(log_density_range(r_lo, p.sigma)),
                           math.exp(log_density_range(r_hi, p.sigma)))
        assert abs(p_hat - box_prob) < 4 * se + offset * edge_density


class TestRangeOnly:
    def test_nonpositive_range_is_zero_density(self):
        assert log_density_range(0.0, 0.02) == -math.inf
        assert log_density_range(-0.01, 0.02) == -math.inf

    def test_normalizes_to_one(self):
        for sigma in (0.01, 0.02, 0.1):
            val, _ = quad(lambda r: math.exp(log_density_range(r, sigma)),
                          1e-9, 20 * sigma, limit=300)
            assert val == pytest.approx(1.0, abs=1e-6)

    def test_matches_close_marginalization_of_range_close(self):
        p = PeriodParams(mu=0.0, sigma=0.025)
        for r in (0.02, 0.04, 0.08):
            def integrand(c):
                return math.exp(log_density_range_close(r, ChloObservation(open=0.0, close=c), p))
            val, _ = quad(integrand, -r, r, limit=200)
            assert math.exp(log_density_range(r, p.sigma)) == pytest.approx(val, rel=1e-6)

    def test_no_drift_argument(self):
        import inspect

        sig = inspect.signature(log_density_range)
        assert "mu" not in sig.parameters


class TestSingleExtremeMarginals:
    P = PeriodParams(mu=0.001, sigma=0.02)

    def test_high_below_close_is_zero(self):
        obs = ChloObservation(open=0.0, close=0.01, high=0.005)
        assert log_density_close_max(obs, self.P) == -math.inf
        obs = ChloObservation(open=0.0, close=0.01, high=0.01)
        assert log_density_close_max(obs, self.P) == -math.inf

    def test_low_above_open_is_zero(self):
        obs = ChloObservation(open=0.0, close=0.01, low=0.001)
        assert log_density_close_min(obs, self.P) == -math.inf

    def test_reflection_maps_min_onto_max(self):
        obs_max = ChloObservation(open=0.0, close=0.01, high=0.02)
        obs_min = ChloObservation(open=0.0, close=-0.01, low=-0.02)
        v1 = log_density_close_max(obs_max, PeriodParams(mu=0.001, sigma=0.02))
        v2 = log_density_close_min(obs_min, PeriodParams(mu=-0.001, sigma=0.02))
        assert v1 == pytest.approx(v2, rel=1e-13)

    def test_integrates_to_gaussian_close(self):
        close = 0.012
        for fn, lo, hi, key in (
            (log_density_close_max, max(0.0, close), max(0.0, close) + 12 * self.P.sigma, "high"),
            (log_density_close_min, min(0.0, close) - 12 * self.P.sigma, min(0.0, close), "low"),
        ):
            def integrand(v):
                obs = ChloObservation(open=0.0, close=close, **{key: v})
                return math.exp(fn(obs, self.P))
            val, _ = quad(integrand, lo, hi, limit=200)
            assert val == pytest.approx(math.exp(gaussian_logpdf(close, self.P.mu, self.P.sigma)), rel=1e-6)

    def test_matches_quadrature_of_chlo_over_other_extreme(self):
        close, high = 0.012, 0.02
        span = 12 * self.P.sigma
        def integrand(a):
            obs = ChloObservation(open=0.0, close=close, low=a, high=high)
            return math.exp(log_density_chlo(obs, self.P))
        val, _ = quad(integrand, min(0.0, close) - span, min(0.0, close), limit=200)
        got = math.exp(log_density_close_max(ChloObservation(open=0.0, close=close, high=high), self.P))
        assert got == pytest.approx(val, rel=1e-8)


class TestArrayKernels:
    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(17)
        mu = rng.normal(0, 0.002, 64)
        sigma = np.exp(rng.uniform(np.log(0.004), np.log(0.2), 64))
        x, low, high = 0.008, -0.006, 0.013
        res = chlo_loglik(x, low, high, mu, sigma)
        for j in range(0, 64, 7):
            obs = ChloObservation(open=0.0, close=x, low=low, high=high)
            v = log_density_chlo(obs, PeriodParams(mu=float(mu[j]), sigma=float(sigma[j])))
            assert res.logp[j] == pytest.approx(v, rel=1e-13) or (res.logp[j] == v == -math.inf)

        res_rc = range_close_loglik(high - low, x, mu, sigma)
        for j in range(0, 64, 7):
            obs = ChloObservation(open=0.0, close=x)
            v = log_density_range_close(high - low, obs, PeriodParams(mu=float(mu[j]), sigma=float(sigma[j])))
            assert res_rc.logp[j] == pytest.approx(v, rel=1e-13) or (res_rc.logp[j] == v == -math.inf)

        res_r = range_loglik(high - low, sigma)
        for j in range(0, 64, 7):
            v = log_density_range(high - low, float(sigma[j]))
            assert res_r.logp[j] == pytest.approx(v, rel=1e-13) or (res_r.logp[j] == v == -math.inf)

    def test_extreme_sigma_returns_no_nan(self):
        sigma = np.array([1e-6, 1e-3, 1.0, 1e3])
        mu = np.zeros(4)
        res = chlo_loglik(0.008, -0.006, 0.013, mu, sigma)
        assert not np.any(np.isnan(res.logp))
        res2 = range_close_loglik(0.019, 0.008, mu, sigma)
        assert not np.any(np.isnan(res2.logp))
        res3 = range_loglik(0.019, sigma)
        assert not np.any(np.isnan(res3.logp))
        assert not np.any(np.isnan(close_max_loglik(0.008, 0.013, mu, sigma)))
        assert not np.any(np.isnan(gaussian_close_loglik(0.008, mu, sigma)))
