"""Tests for closed-form bounds, constants and moment formulas."""

import math
import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

from particles.simulate import simulate_ou_exact
from particles.theory import (
    DecouplingConstants,
    chi2_log_mgf,
    chi2_mgf_bound,
    chi2_mgf_bound_holds,
    coordinate_rate_bound,
    coverage_level,
    decoupling_constants,
    denominator_lower_bound_constant,
    eps_lower_limit,
    fluctuation_factor,
    fluctuation_threshold,
    integrated_ou_second_moment,
    martingale_eps_floor,
    martingale_threshold,
    mgf_tail_threshold,
    numerator_threshold,
    ou_moments,
    rate_bound,
    theorem_preconditions,
)
from particles.types import SystemConfig
from utils.errors import DomainError, PreconditionError


def make_config(**overrides) -> SystemConfig:
    data = {
        "n_particles": 400,
        "dim": 2,
        "theta": [[1.0, 0.0], [0.0, 2.0]],
        "sigma": 1.0,
        "init_variances": [0.5, 0.25],
        "t_final": 1.0,
        "n_steps": 200,
    }
    data.update(overrides)
    return SystemConfig.model_validate(data)


class TestOUMoments:
    """Test OU mean and variance."""

    def test_stationary(self):
        """Test that stationary initialization keeps the variance constant."""
        for t in (0.0, 0.3, 2.0, 10.0):
            assert ou_moments(1.5, 2.0, 4.0 / 3.0, t)[1] == pytest.approx(4.0 / 3.0)

    def test_initial_condition(self):
        """Test that the variance at t = 0 is tau2."""
        assert ou_moments(2.0, 1.0, 0.7, 0.0) == (0.0, pytest.approx(0.7))

    def test_from_zero(self):
        """Test Var(Y_1) = (1 - e^-2)/2."""
        assert ou_moments(1.0, 1.0, 0.0, 1.0)[1] == pytest.approx(0.4323324, abs=1e-7)

    def test_invalid_theta(self):
        """Test that a non-positive rate is refused."""
        with pytest.raises(DomainError):
            ou_moments(0.0, 1.0, 0.0, 1.0)

    def test_integrated_moment_matches_quadrature(self):
        """Test the integrated second moment against numerical quadrature."""
        theta, sigma, tau2, t = 1.3, 0.8, 0.1, 2.5
        grid = np.linspace(0.0, t, 20001)
        values = np.array([ou_moments(theta, sigma, tau2, s)[1] for s in grid])
        quad = float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(grid)))
        assert integrated_ou_second_moment(theta, sigma, tau2, t) == pytest.approx(quad, rel=1e-7)

    def test_integrated_moment_stationary(self):
        """Test that a stationary start integrates to t sigma^2 / (2 theta)."""
        assert integrated_ou_second_moment(2.0, 1.0, 0.25, 3.0) == pytest.approx(0.75)

    @pytest.mark.slow
    @pytest.mark.parametrize("theta", [0.5, 1.0, 3.0])
    @pytest.mark.parametrize("stationary", [False, True])
    def test_monte_carlo_variance(self, theta, stationary):
        """Test sample variances of 1e5 exact paths at t in {0.25, 1, 4}."""
        n = 100000
        tau2 = 1.0 / (2.0 * theta) if stationary else 0.0
        cfg = SystemConfig(n_particles=n, dim=1, theta=[[theta]], sigma=1.0, init_variances=(tau2,), t_final=4.0, n_steps=16)
        states = simulate_ou_exact(cfg, replicate=int(theta * 10) + stationary).states
        for t, k in ((0.25, 1), (1.0, 4), (4.0, 16)):
            expected = ou_moments(theta, 1.0, tau2, t)[1]
            assert abs(np.var(states[k, :, 0]) - expected) <= 4.0 * expected * math.sqrt(2.0 / n)


class TestRateBound:
    """Test the spectral error bound and its hypotheses."""

    def test_hand_value(self):
        """Test 24 sqrt(2 / 2000) for sigma = theta1 = d = 1, eps = 1/e, N = 1000, t = 2."""
        assert rate_bound(1.0, 1.0, 1, 1000, 2.0, math.exp(-1.0)) == pytest.approx(0.758947, abs=1e-6)

    def test_shrinks_with_nt(self):
        """Test the (N t)^(-1/2) scaling."""
        a = rate_bound(1.0, 2.0, 2, 400, 1.0, 0.5)
        b = rate_bound(1.0, 2.0, 2, 1600, 1.0, 0.5)
        assert a / b == pytest.approx(2.0)

    def test_vanishes_as_eps_tends_to_one(self):
        """Test the limit eps -> 1 with d = 1."""
        assert rate_bound(1.0, 1.0, 1, 1000, 1.0, 1.0 - 1e-12, strict=False) < 1e-4

    def test_strict_rejects_small_n(self):
        """Test that N < 400 raises in strict mode and evaluates otherwise."""
        with pytest.raises(PreconditionError, match="N ≥ 400"):
            rate_bound(1.0, 1.0, 1, 100, 2.0, 0.5)
        assert rate_bound(1.0, 1.0, 1, 100, 2.0, 0.5, strict=False) > 0.0

    def test_strict_rejects_small_eps(self):
        """Test that eps below exp(-N/400) raises."""
        with pytest.raises(PreconditionError, match="eps"):
            rate_bound(1.0, 1.0, 1, 400, 2.0, math.exp(-4.0))

    def test_coordinate_bound(self):
        """Test the per-coordinate bound formula."""
        expected = 24.0 * math.sqrt(2.0 * 2.0 * 1.0 / 1000.0)
        assert coordinate_rate_bound(1.0, 2.0, 1000, 1.0, math.exp(-1.0)) == pytest.approx(expected)


class TestPreconditions:
    """Test the rate theorem's hypotheses."""

    def test_all_hold(self):
        """Test a configuration meeting every hypothesis."""
        assert theorem_preconditions(make_config(), 0.5) == []

    def test_eps_floor_separable(self):
        """Test that eps = 0.05 only violates the eps floor at N = 400."""
        cfg = make_config()
        violations = theorem_preconditions(cfg, 0.05)
        assert len(violations) == 1 and "eps" in violations[0]
        assert theorem_preconditions(cfg, 0.05, include_eps=False) == []

    def test_small_n(self):
        """Test that N = 100 is reported."""
        assert any("N ≥ 400" in v for v in theorem_preconditions(make_config(n_particles=100), 0.5))

    def test_eps_far_below_floor(self):
        """Test eps = exp(-N/100) at N = 400."""
        assert any("eps" in v for v in theorem_preconditions(make_config(), math.exp(-4.0)))

    def test_short_horizon(self):
        """Test that t < 1/theta_d is reported."""
        violations = theorem_preconditions(make_config(t_final=0.5, n_steps=100), 0.5)
        assert any("theta_d" in v for v in violations)

    def test_coverage_level(self):
        """Test the guaranteed probability."""
        assert coverage_level(0.01) == pytest.approx(0.86)
        assert coverage_level(1.0 / 14.0) == pytest.approx(0.0)

    def test_coverage_level_clamped(self):
        """Test that eps above 1/14 guarantees nothing rather than a negative probability."""
        assert coverage_level(0.36787944117144233) == 0.0
        assert coverage_level(0.5) == 0.0


class TestDecouplingConstants:
    """Test the decoupling constants and proof waypoints."""

    def test_hand_values(self):
        """Test C1 and C2 at eps = 1/e, N = 100."""
        c = decoupling_constants(math.exp(-1.0), 100)
        assert c.c1 == pytest.approx(0.005 + 0.01 + 0.01 * math.sqrt(0.5))
        assert c.c2 == pytest.approx(0.5 + 0.01 + math.sqrt(0.005))
        assert c.c == pytest.approx(math.sqrt(c.c1 * (2.0 * c.c1 + 8.0 * c.c2)))

    def test_limit_eps_to_one(self):
        """Test C1 -> 1/(2N) and C2 -> 1/2 as eps -> 1."""
        c = decoupling_constants(1.0 - 1e-14, 50)
        assert c.c1 == pytest.approx(0.01, abs=1e-6)
        assert c.c2 == pytest.approx(0.5, abs=1e-6)

    @pytest.mark.parametrize("n", [400, 1000, 10**4, 10**5])
    def test_waypoints(self, n):
        """Test C <= 0.16 and the fluctuation factor <= 0.04 at eps = exp(-N/400)."""
        eps = eps_lower_limit(n)
        assert decoupling_constants(eps, n).c <= 0.16
        assert fluctuation_factor(n, eps) <= 0.04

    def test_waypoint_values_at_400(self):
        """Test the values at N = 400."""
        eps = math.exp(-1.0)
        assert fluctuation_factor(400, eps) == pytest.approx(1.0 / 400.0 + math.sqrt(1.0 / 800.0))
        assert decoupling_constants(eps, 400).c == pytest.approx(0.15428, abs=1e-5)

    def test_denominator_constant(self):
        """Test (1 + e^-2)/4 - 0.2 >= 1/12."""
        value = denominator_lower_bound_constant()
        assert value == pytest.approx((1.0 + math.exp(-2.0)) / 4.0 - 0.2)
        assert value >= 1.0 / 12.0

    def test_invalid_arguments(self):
        """Test domain errors and dataclass validation."""
        with pytest.raises(DomainError):
            decoupling_constants(0.0, 100)
        with pytest.raises(DomainError):
            decoupling_constants(0.5, 0)
        with pytest.raises(ValueError):
            DecouplingConstants(c1=0.1, c2=0.5, c=1.0, eps=0.5, n=10)


class TestThresholds:
    """Test concentration thresholds."""

    def test_fluctuation_threshold(self):
        """Test the hand value at t = theta = sigma = 1, N = 100, eps = 1/e."""
        value = fluctuation_threshold(1.0, 1.0, 1.0, 100, math.exp(-1.0))
        assert value == pytest.approx(0.01 + math.sqrt(1.0 / 200.0), abs=1e-6)

    def test_fluctuation_zero_limit(self):
        """Test that log(1/eps) = 0 gives zero."""
        assert fluctuation_factor(100, 1.0) == 0.0

    def test_martingale_threshold(self):
        """Test sqrt(4/1000) at sigma = 1, t = 2, N = 1000, theta = 1, eps = 1/e."""
        assert martingale_threshold(2.0, 1.0, 1.0, 1000, math.exp(-1.0)) == pytest.approx(0.063246, abs=1e-6)
        assert martingale_threshold(2.0, 1.0, 1.0, 1000, 1.0) == 0.0

    def test_numerator_threshold(self):
        """Test that the numerator bound doubles the martingale bound."""
        m = martingale_threshold(2.0, 1.0, 1.0, 1000, 0.1)
        assert numerator_threshold(2.0, 1.0, 1.0, 1000, 0.1) == pytest.approx(2.0 * m)

    def test_martingale_floor(self):
        """Test exp(-N/16)."""
        assert martingale_eps_floor(16) == pytest.approx(math.exp(-1.0))


class TestChiSquare:
    """Test the centered chi-square log moment generating function."""

    def test_values(self):
        """Test hand values."""
        assert chi2_log_mgf(0.0) == 0.0
        assert chi2_log_mgf(-0.5) == pytest.approx(0.5 - 0.5 * math.log(2.0))
        assert chi2_log_mgf(0.25) == pytest.approx(-0.25 - 0.5 * math.log(0.5))
        assert chi2_mgf_bound(0.25) == pytest.approx(0.125)

    def test_domain(self):
        """Test that u >= 1/2 is refused."""
        with pytest.raises(DomainError):
            chi2_log_mgf(0.5)

    def test_bound_on_grid(self):
        """Test the bound on a 100-point grid in (0, 1/2) and on (-1/2, 0)."""
        for u in np.linspace(0.0, 0.5, 102)[1:-1]:
            assert chi2_mgf_bound_holds(float(u))
        for u in np.linspace(-0.5, 0.0, 52)[1:-1]:
            assert chi2_mgf_bound_holds(float(u))

    @pytest.mark.slow
    def test_monte_carlo(self):
        """Test the log-MGF against 1e6 samples within three standard errors."""
        # draws from N(0, 4) weighted by the density ratio keep the estimator square-integrable for u < 7/16
        z2 = (2.0 * np.random.default_rng(123).standard_normal(10**6)) ** 2
        weights = 2.0 * np.exp(-0.375 * z2)
        for u in (-0.4, -0.2, 0.1, 0.25, 0.4):
            samples = weights * np.exp(u * (z2 - 1.0))
            mean = samples.mean()
            se = samples.std(ddof=1) / math.sqrt(samples.size) / mean
            assert abs(math.log(mean) - chi2_log_mgf(u)) <= 3.0 * se

    def test_tail_threshold(self):
        """Test c x + sqrt(2 v x)."""
        assert mgf_tail_threshold(1.0, 0.0, 2.0) == pytest.approx(2.0)
        assert mgf_tail_threshold(0.5, 1.0, 1.0) == pytest.approx(2.0)
        assert mgf_tail_threshold(1.0, 1.0, 0.0) == 0.0


if __name__ == "__main__":
    pytest.main([__file__])
