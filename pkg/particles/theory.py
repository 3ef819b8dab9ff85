"""
Closed-form quantities from the rate-of-convergence analysis.

Evaluators return the literal formulas; the hypotheses of the rate theorem are checked
separately by ``theorem_preconditions`` so experiments can explore regimes it does not cover.
"""

import math
from dataclasses import dataclass
from typing import List, Tuple

from utils.errors import DomainError, PreconditionError

from .types import SystemConfig

MIN_PARTICLES = 400
BOUND_CONSTANT = 24.0
DECOUPLING_WAYPOINT = 0.16
FLUCTUATION_WAYPOINT = 0.04


@dataclass(frozen=True)
class DecouplingConstants:
    """Constants of the decoupling-error bound; c = sqrt(c1 (2 c1 + 8 c2))."""

    c1: float
    c2: float
    c: float
    eps: float
    n: int

    def __post_init__(self) -> None:
        if not (self.c1 > 0.0 and self.c2 > 0.0 and self.c > 0.0):
            raise ValueError("decoupling constants must be strictly positive")
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        expected = math.sqrt(self.c1 * (2.0 * self.c1 + 8.0 * self.c2))
        if abs(self.c - expected) > 1e-12 * max(1.0, expected):
            raise ValueError("c must equal sqrt(c1 (2 c1 + 8 c2))")


def _log_inv(eps: float) -> float:
    if not 0.0 < eps <= 1.0:
        raise DomainError(f"eps must lie in (0, 1], got {eps!r}")
    return -math.log(eps)


def ou_moments(theta: float, sigma: float, tau2: float, t: float) -> Tuple[float, float]:
    """
    Mean and variance of dY = -theta Y dt + sigma dW with Y_0 ~ N(0, tau2).

    Returns:
        (0, [sigma^2 - (sigma^2 - 2 theta tau2) exp(-2 theta t)] / (2 theta))
    """
    if theta <= 0.0:
        raise DomainError("theta must be positive")
    s2 = sigma * sigma
    variance = (s2 - (s2 - 2.0 * theta * tau2) * math.exp(-2.0 * theta * t)) / (2.0 * theta)
    return 0.0, variance


def integrated_ou_second_moment(theta: float, sigma: float, tau2: float, t: float) -> float:
    """int_0^t E[Y_s^2] ds = sigma^2 t / (2 theta) - (sigma^2 - 2 theta tau2)(1 - exp(-2 theta t)) / (4 theta^2)."""
    if theta <= 0.0:
        raise DomainError("theta must be positive")
    s2 = sigma * sigma
    return s2 * t / (2.0 * theta) + (s2 - 2.0 * theta * tau2) * math.expm1(-2.0 * theta * t) / (4.0 * theta * theta)


def eps_lower_limit(n: int) -> float:
    """Smallest eps admitted by the rate theorem for N particles."""
    return math.exp(-n / MIN_PARTICLES)


def _structural_violations(d: int, n: int) -> List[str]:
    violations = []
    if n < MIN_PARTICLES:
        violations.append(f"N ≥ {MIN_PARTICLES} (got N={n})")
    if d < 1:
        violations.append("d ≥ 1")
    return violations


def _eps_violations(n: int, eps: float) -> List[str]:
    if eps_lower_limit(n) <= eps < 1.0:
        return []
    return [f"eps in [exp(-N/{MIN_PARTICLES}), 1) = [{eps_lower_limit(n):.6g}, 1) (got eps={eps!r})"]


def _bound_violations(d: int, n: int, eps: float) -> List[str]:
    return _structural_violations(d, n) + _eps_violations(n, eps)


def rate_bound(sigma: float, theta1: float, d: int, n: int, t: float, eps: float, strict: bool = True) -> float:
    """
    Spectral-norm error bound 24 sigma theta1^(1/2) (2 d log(d/eps) / (N t))^(1/2).

    Args:
        sigma: Diffusion coefficient
        theta1: Largest eigenvalue of Theta
        d: Dimension
        n: Number of particles
        t: Observation horizon (t >= 1/theta_d is checked by theorem_preconditions)
        eps: Confidence parameter; the bound holds with probability at least 1 - 14 eps
        strict: Raise on violated hypotheses instead of evaluating anyway

    Raises:
        PreconditionError: in strict mode, if N < 400 or eps is outside [exp(-N/400), 1)
    """
    if strict:
        violations = _bound_violations(d, n, eps)
        if violations:
            raise PreconditionError(violations)
    if not (t > 0.0 and n > 0 and 0.0 < eps):
        raise DomainError("rate_bound needs t > 0, N > 0 and eps > 0")
    return BOUND_CONSTANT * sigma * math.sqrt(theta1) * math.sqrt(2.0 * d * math.log(d / eps) / (n * t))


def theorem_preconditions(config: SystemConfig, eps: float, include_eps: bool = True) -> List[str]:
    """
    Hypotheses of the rate theorem violated by ``config`` at level ``eps``; empty when all hold.

    With ``include_eps=False`` only the hypotheses on t, N and d are checked.
    """
    violations = []
    t_min = 1.0 / config.theta_min
    if config.t_final < t_min * (1.0 - 1e-12):
        violations.append(f"t >= 1/theta_d = {t_min:.6g} (got t={config.t_final!r})")
    violations.extend(_structural_violations(config.dim, config.n_particles))
    if include_eps:
        violations.extend(_eps_violations(config.n_particles, eps))
    return violations


def coverage_level(eps: float) -> float:
    """Probability guaranteed by the rate theorem, zero once eps >= 1/14 leaves nothing to guarantee."""
    return max(0.0, 1.0 - 14.0 * eps)


def decoupling_constants(eps: float, n: int) -> DecouplingConstants:
    """C1(eps, N), C2(eps, N) and C(eps, N) of the decoupling-error bound."""
    if n < 1:
        raise DomainError("n must be at least 1")
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    log_inv = _log_inv(eps)
    c1 = 1.0 / (2.0 * n) + log_inv / n + math.sqrt(log_inv / 2.0) / n
    c2 = 0.5 + log_inv / n + math.sqrt(log_inv / (2.0 * n))
    return DecouplingConstants(c1=c1, c2=c2, c=math.sqrt(c1 * (2.0 * c1 + 8.0 * c2)), eps=eps, n=n)


def fluctuation_factor(n: int, eps: float) -> float:
    """log(1/eps)/N + sqrt(log(1/eps)/(2N))."""
    log_inv = _log_inv(eps)
    return log_inv / n + math.sqrt(log_inv / (2.0 * n))


def fluctuation_threshold(t: float, theta: float, sigma: float, n: int, eps: float) -> float:
    """Deviation level of the time-integrated centered OU energy: (t sigma^2 / theta) * fluctuation_factor."""
    if not (t > 0.0 and theta > 0.0 and n > 0):
        raise DomainError("fluctuation_threshold needs positive t, theta and n")
    return t * sigma * sigma / theta * fluctuation_factor(n, eps)


def martingale_threshold(t: float, theta: float, sigma: float, n: int, eps: float) -> float:
    """Deviation level of the averaged OU martingale: sigma sqrt(2 t log(1/eps) / (N theta))."""
    if not (t > 0.0 and theta > 0.0 and n > 0):
        raise DomainError("martingale_threshold needs positive t, theta and n")
    return sigma * math.sqrt(2.0 * t * _log_inv(eps) / (n * theta))


def martingale_eps_floor(n: int) -> float:
    """Smallest eps for which the martingale and decoupling bounds are stated: exp(-N/16)."""
    return math.exp(-n / 16.0)


def numerator_threshold(t: float, theta: float, sigma: float, n: int, eps: float) -> float:
    """Bound on the interacting-system martingale numerator: twice the OU martingale threshold."""
    return 2.0 * martingale_threshold(t, theta, sigma, n, eps)


def denominator_lower_bound_constant() -> float:
    """(1 + e^-2)/4 - 0.2; the integrated squared deviation is at least this times t/theta_j."""
    return (1.0 + math.exp(-2.0)) / 4.0 - (DECOUPLING_WAYPOINT + FLUCTUATION_WAYPOINT)


def coordinate_rate_bound(sigma: float, theta_j: float, n: int, t: float, eps: float) -> float:
    """Per-coordinate error bound 24 sigma sqrt(2 theta_j log(1/eps) / (N t))."""
    return BOUND_CONSTANT * sigma * math.sqrt(2.0 * theta_j * _log_inv(eps) / (n * t))


def chi2_log_mgf(u: float) -> float:
    """
    Log moment generating function of Z^2 - 1 for standard normal Z: -u - log(1 - 2u)/2.

    Raises:
        DomainError: if u >= 1/2
    """
    if u >= 0.5:
        raise DomainError(f"chi2_log_mgf is defined for u < 1/2, got {u!r}")
    return -u - 0.5 * math.log1p(-2.0 * u)


def chi2_mgf_bound(u: float) -> float:
    """u^2 / (1 - 2u) on (0, 1/2) and u^2 on (-1/2, 0]."""
    if u >= 0.5 or u <= -0.5:
        raise DomainError(f"the bound is stated on (-1/2, 1/2), got {u!r}")
    return u * u / (1.0 - 2.0 * u) if u > 0.0 else u * u


def chi2_mgf_bound_holds(u: float) -> bool:
    return chi2_log_mgf(u) <= chi2_mgf_bound(u)


def mgf_tail_threshold(v: float, c: float, x: float) -> float:
    """Tail level c x + sqrt(2 v x) exceeded with probability at most exp(-x)."""
    if v <= 0.0 or c < 0.0 or x < 0.0:
        raise DomainError("mgf_tail_threshold needs v > 0, c >= 0, x >= 0")
    return c * x + math.sqrt(2.0 * v * x)
