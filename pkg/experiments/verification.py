"""
Monte Carlo checks of the concentration and decoupling statements.

Coordinates are analysed in the eigenbasis of Theta: the model is rotation-equivariant and
the noise isotropic, so each eigen-coordinate is a one-dimensional instance with rate
theta_j. Every probability statement is accepted at its level p plus a one-sided binomial
slack of 3 sqrt(p (1 - p) / R).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from particles.simulate import (
    empirical_quadratic_variation,
    mean_process,
    simulate_coupled,
    simulate_interacting,
    simulate_ou_euler,
    simulate_ou_exact,
)
from particles.theory import (
    coverage_level,
    decoupling_constants,
    fluctuation_threshold,
    martingale_eps_floor,
    martingale_threshold,
    ou_moments,
)
from particles.types import SystemConfig
from utils.errors import ConfigError, PreconditionError

from .runner import map_replicates

logger = logging.getLogger(__name__)

COUPLING_TOLERANCE = 1e-10


def binomial_slack(p: float, n_replicates: int) -> float:
    return 3.0 * math.sqrt(max(p * (1.0 - p), 0.0) / n_replicates)


@dataclass(frozen=True)
class FrequencyCheck:
    """Observed violation count of one probability statement against its allowed level."""

    name: str
    violations: int
    n_replicates: int
    level: float

    @property
    def frequency(self) -> float:
        return self.violations / self.n_replicates

    @property
    def allowed(self) -> float:
        return self.level + binomial_slack(self.level, self.n_replicates)

    @property
    def passed(self) -> bool:
        return self.frequency <= self.allowed

    def as_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "violations": self.violations,
            "n_replicates": self.n_replicates,
            "frequency": self.frequency,
            "level": self.level,
            "allowed": self.allowed,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of one verification campaign; ``details`` holds check-specific summaries."""

    kind: str
    eps: float
    n_replicates: int
    checks: Tuple[FrequencyCheck, ...]
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def check(self, name: str) -> FrequencyCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> Dict[str, Any]:
        failed = [c.name for c in self.checks if not c.passed]
        return {
            "kind": self.kind,
            "status": "passed" if self.passed else "failed",
            "eps": self.eps,
            "n_replicates": self.n_replicates,
            "checks": [c.as_dict() for c in self.checks],
            "details": self.details,
            "message": "all checks within slack" if not failed else "checks exceeded slack: " + ", ".join(failed),
        }


def _eigen_frame(config: SystemConfig) -> Tuple[np.ndarray, np.ndarray]:
    return config.theta_eigen


def _require_noise(config: SystemConfig) -> None:
    if config.sigma <= 0.0:
        raise ConfigError("martingale checks need sigma > 0", "sigma")


def _require_martingale_eps(config: SystemConfig, eps: float) -> None:
    floor = martingale_eps_floor(config.n_particles)
    if not floor <= eps < 1.0:
        raise PreconditionError([f"eps in [exp(-N/16), 1) = [{floor:.6g}, 1) (got eps={eps!r})"])


def verify_decoupling(config: SystemConfig, n_replicates: int, eps: float, threads: int = 1) -> VerificationReport:
    """
    Couple the interacting system with OU copies on the same noise and check the decoupling bounds.

    Per replicate: the coupling identity (all Delta^i equal), the decoupling integral
    (1/N) sum_i int (|Xbar_j - X^i_j|^2 - |Y^i_j|^2) ds against (t sigma^2 / theta_j) C(eps, N),
    and the martingale (1/N) sum_i int Delta^i_j dW^i_j against the martingale threshold.
    """
    _require_noise(config)
    _require_martingale_eps(config, eps)
    lam, v = _eigen_frame(config)
    n, h, sigma = config.n_particles, config.step_size, config.sigma

    def one(replicate: int) -> Tuple[float, np.ndarray, np.ndarray]:
        coupled = simulate_coupled(config, replicate)
        defect = coupled.coupling_defect()
        x = coupled.interacting.states @ v
        y = coupled.decoupled.states @ v
        dw = (coupled.interacting.noise_increments @ v) / sigma
        deviation = x.mean(axis=1, keepdims=True) - x
        integral = h * np.sum(deviation[:-1] ** 2 - y[:-1] ** 2, axis=(0, 1)) / n
        delta = deviation + y
        martingale = np.sum(delta[:-1] * dw, axis=(0, 1)) / n
        return defect, integral, martingale

    outcomes = map_replicates(one, range(n_replicates), threads)
    defects = np.array([o[0] for o in outcomes])
    integrals = np.array([o[1] for o in outcomes])
    martingales = np.array([o[2] for o in outcomes])

    constants = decoupling_constants(eps, n)
    t = config.t_final
    checks: List[FrequencyCheck] = [
        FrequencyCheck("coupling_identity", int(np.sum(defects > COUPLING_TOLERANCE)), n_replicates, 0.0)
    ]
    integral_bounds, martingale_bounds = [], []
    for j, lam_j in enumerate(lam):
        integral_bound = t * sigma * sigma / lam_j * constants.c
        martingale_bound = martingale_threshold(t, lam_j, sigma, n, eps)
        integral_bounds.append(integral_bound)
        martingale_bounds.append(martingale_bound)
        checks.append(
            FrequencyCheck(
                f"decoupling_integral[{j}]", int(np.sum(np.abs(integrals[:, j]) > integral_bound)), n_replicates, 4.0 * eps
            )
        )
        checks.append(
            FrequencyCheck(
                f"coupled_martingale[{j}]", int(np.sum(np.abs(martingales[:, j]) > martingale_bound)), n_replicates, 4.0 * eps
            )
        )

    details = {
        "max_coupling_defect": float(np.max(defects)),
        "decoupling_constant": constants.c,
        "decoupling_bound": integral_bounds,
        "martingale_bound": martingale_bounds,
        "median_abs_decoupling_integral": np.median(np.abs(integrals), axis=0).tolist(),
        "median_abs_martingale": np.median(np.abs(martingales), axis=0).tolist(),
    }
    report = VerificationReport("decoupling", eps, n_replicates, tuple(checks), details)
    logger.info("decoupling verification: %s", report.as_dict()["message"])
    return report


def verify_ou_concentration(config: SystemConfig, n_replicates: int, eps: float, threads: int = 1) -> VerificationReport:
    """
    Check the two concentration statements for N independent OU processes.

    The centered energy (1/N) sum_i int (|Y^i_j|^2 - E|Y^i_j|^2) ds uses exact-transition paths;
    the martingale (1/N) sum_i int Y^i_j dW^i_j uses an Euler shadow run with stored noise.
    """
    _require_noise(config)
    _require_martingale_eps(config, eps)
    lam, v = _eigen_frame(config)
    n, h, sigma, t = config.n_particles, config.step_size, config.sigma, config.t_final
    tau2 = np.einsum("aj,a,aj->j", v, np.asarray(config.init_variances), v)
    grid = np.arange(config.n_steps) * h
    second_moment = np.array([[ou_moments(lam_j, sigma, tau2[j], s)[1] for j, lam_j in enumerate(lam)] for s in grid])

    def one(replicate: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        exact = simulate_ou_exact(config, store_noise=False, replicate=replicate).states @ v
        energy = h * np.sum(exact[:-1] ** 2, axis=1) / n
        integral = np.sum(energy, axis=0)
        centered = integral - h * np.sum(second_moment, axis=0)
        shadow = simulate_ou_euler(config, store_noise=True, replicate=replicate)
        y = shadow.states @ v
        dw = (shadow.noise_increments @ v) / sigma
        martingale = np.sum(y[:-1] * dw, axis=(0, 1)) / n
        return integral, centered, martingale

    outcomes = map_replicates(one, range(n_replicates), threads)
    integrals = np.array([o[0] for o in outcomes])
    centered = np.array([o[1] for o in outcomes])
    martingales = np.array([o[2] for o in outcomes])

    checks: List[FrequencyCheck] = []
    for j, lam_j in enumerate(lam):
        checks.append(
            FrequencyCheck(
                f"energy_fluctuation[{j}]",
                int(np.sum(np.abs(centered[:, j]) > fluctuation_threshold(t, lam_j, sigma, n, eps))),
                n_replicates,
                2.0 * eps,
            )
        )
        checks.append(
            FrequencyCheck(
                f"ou_martingale[{j}]",
                int(np.sum(np.abs(martingales[:, j]) > martingale_threshold(t, lam_j, sigma, n, eps))),
                n_replicates,
                4.0 * eps,
            )
        )

    spread = integrals.std(axis=0, ddof=1) if n_replicates > 1 else np.zeros(len(lam))
    details = {
        "mean_energy_integral": integrals.mean(axis=0).tolist(),
        "expected_energy_integral": (h * np.sum(second_moment, axis=0)).tolist(),
        "energy_integral_standard_error": (spread / math.sqrt(n_replicates)).tolist(),
        "stationary_energy_integral": [t * sigma * sigma / (2.0 * lam_j) for lam_j in lam],
    }
    report = VerificationReport("ou-concentration", eps, n_replicates, tuple(checks), details)
    logger.info("OU concentration verification: %s", report.as_dict()["message"])
    return report


def verify_mean_process(config: SystemConfig, n_replicates: int, threads: int = 1) -> VerificationReport:
    """
    Quadratic variation of sqrt(N) Xbar against sigma^2 t, median over replicates.

    The tolerance is 5 sigma^2 sqrt(2 h t), five standard deviations of the quadratic
    variation of a Brownian motion sampled at step h.
    """
    n, h, t, sigma = config.n_particles, config.step_size, config.t_final, config.sigma

    def one(replicate: int) -> np.ndarray:
        bundle = simulate_interacting(config, store_noise=False, replicate=replicate)
        return empirical_quadratic_variation(math.sqrt(n) * mean_process(bundle))

    qv = np.array(map_replicates(one, range(n_replicates), threads))
    median = np.median(qv, axis=0)
    target = sigma * sigma * t
    tolerance = 5.0 * sigma * sigma * math.sqrt(2.0 * h * t)
    misses = int(np.sum(np.abs(median - target) > tolerance))
    details = {"median_quadratic_variation": median.tolist(), "target": target, "tolerance": tolerance}
    return VerificationReport("mean-process", 0.0, n_replicates, (FrequencyCheck("median_qv", misses, 1, 0.0),), details)


def verify_denominator(config: SystemConfig, n_replicates: int, eps: float, threads: int = 1) -> VerificationReport:
    """
    Fraction of replicates with (1/N) sum_i int |Xbar_j - X^i_j|^2 ds >= t sigma^2 / (12 theta_j).

    Accepted when, for every eigen-coordinate, the failure frequency stays within 14 eps.
    """
    lam, v = _eigen_frame(config)
    n, h, t, sigma = config.n_particles, config.step_size, config.t_final, config.sigma

    def one(replicate: int) -> np.ndarray:
        x = simulate_interacting(config, store_noise=False, replicate=replicate).states @ v
        deviation = x.mean(axis=1, keepdims=True) - x
        return h * np.sum(deviation[:-1] ** 2, axis=(0, 1)) / n

    denominators = np.array(map_replicates(one, range(n_replicates), threads))
    lower = np.array([t * sigma * sigma / (12.0 * lam_j) for lam_j in lam])
    level = 1.0 - coverage_level(eps)
    checks = tuple(
        FrequencyCheck(f"denominator[{j}]", int(np.sum(denominators[:, j] < lower[j])), n_replicates, level)
        for j in range(len(lam))
    )
    details = {
        "lower_bound": lower.tolist(),
        "median_denominator": np.median(denominators, axis=0).tolist(),
        "fraction_above": np.mean(denominators >= lower, axis=0).tolist(),
        "required_fraction": coverage_level(eps),
    }
    return VerificationReport("denominator", eps, n_replicates, checks, details)
