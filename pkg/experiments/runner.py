"""
Seeded Monte Carlo campaigns over the estimator: single replicates, rate studies and coverage.

Every replicate draws from the streams keyed by (config.seed, replicate index), so results
do not depend on how many worker threads execute them; reductions run in replicate order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from particles.estimator import mle_matrix
from particles.likelihood import sufficient_stats
from particles.simulate import simulate_interacting
from particles.theory import coverage_level, eps_lower_limit, rate_bound, theorem_preconditions
from particles.types import SystemConfig
from utils.errors import DegenerateGrid, PreconditionError
from utils.linalg import SymMatrix
from utils.seeding import derive_stream_seed

from .fitting import fit_loglog_slope

logger = logging.getLogger(__name__)

T = TypeVar("T")

MIN_GRID_SPAN = 8.0


def map_replicates(fn: Callable[[int], T], indices: Sequence[int], threads: int = 1) -> List[T]:
    """Apply ``fn`` to every replicate index; output order follows ``indices`` whatever the thread count."""
    if threads <= 1 or len(indices) <= 1:
        return [fn(i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, indices))


@dataclass(frozen=True, eq=False)
class ReplicateResult:
    """One simulated trajectory set and its estimate; ``seed`` is the key of the replicate's first particle stream."""

    replicate_index: int
    seed: int
    theta_hat: SymMatrix
    spectral_error: float
    diag_errors: np.ndarray = field(repr=False)
    gram_condition: float

    def __post_init__(self) -> None:
        if not self.spectral_error >= 0.0:
            raise ValueError("spectral_error must be non-negative")


def run_replicate(config: SystemConfig, replicate: int) -> ReplicateResult:
    """
    Simulate one replicate, estimate Theta and measure the error.

    Raises:
        SingularGram: if the simulated deviations carry no information
    """
    bundle = simulate_interacting(config, store_noise=False, replicate=replicate)
    result = mle_matrix(sufficient_stats(bundle), config.theta)
    return ReplicateResult(
        replicate_index=replicate,
        seed=derive_stream_seed(config.seed, replicate, 0),
        theta_hat=result.theta_hat,
        spectral_error=float(result.spectral_error),
        diag_errors=np.abs(result.diag_estimates - np.diag(config.theta.entries)),
        gram_condition=result.gram_condition,
    )


@dataclass(frozen=True)
class RateRow:
    n: int
    t: float
    nt: float
    n_replicates: int
    median_error: float
    q90_error: float
    mean_error: float
    theory_bound: float
    preconditions_hold: bool

    def as_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "t": self.t,
            "nt": self.nt,
            "n_replicates": self.n_replicates,
            "median_error": self.median_error,
            "q90_error": self.q90_error,
            "mean_error": self.mean_error,
            "theory_bound": self.theory_bound,
            "preconditions_hold": self.preconditions_hold,
        }


@dataclass(frozen=True)
class RateTable:
    """Error quantiles per (N, t) row, sorted by N*t, with the fitted log-log slope of the median error."""

    rows: Tuple[RateRow, ...]
    fitted_slope: float
    fitted_intercept: float
    eps: float

    def __post_init__(self) -> None:
        nts = [row.nt for row in self.rows]
        if nts != sorted(nts):
            raise ValueError("rows must be sorted by N*t")
        for row in self.rows:
            if row.median_error > row.q90_error:
                raise ValueError(f"median error exceeds the 90% quantile in row N={row.n}, t={row.t}")

    def as_dict(self) -> Dict[str, Any]:
        return {
            "rows": [row.as_dict() for row in self.rows],
            "fitted_slope": self.fitted_slope,
            "fitted_intercept": self.fitted_intercept,
            "eps": self.eps,
        }


def row_config(base_config: SystemConfig, n: int, t: float) -> SystemConfig:
    """Base config moved to (N, t) at the base step size."""
    n_steps = max(1, int(round(t / base_config.step_size)))
    return base_config.replace(n_particles=n, t_final=t, n_steps=n_steps)


def rate_study(
    base_config: SystemConfig,
    grid: Sequence[Tuple[int, float]],
    n_replicates: int,
    eps: float = 0.05,
    threads: int = 1,
) -> RateTable:
    """
    Median, 90% quantile and mean spectral error across an (N, t) grid.

    Args:
        base_config: Template system; N, t_final and n_steps are overridden per row
        grid: (N, t) pairs spanning at least a factor 8 in N*t
        n_replicates: Replicates per row
        eps: Level at which the theoretical bound is evaluated
        threads: Worker threads

    Returns:
        RateTable with the least-squares slope of log(median error) on log(N*t)

    Raises:
        DegenerateGrid: if the N*t values do not span a factor of 8
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be positive")
    ordered = sorted(((int(n), float(t)) for n, t in grid), key=lambda nt: (nt[0] * nt[1], nt[0]))
    if len(ordered) < 2:
        raise DegenerateGrid("a rate study needs at least two grid points")
    nts = [n * t for n, t in ordered]
    if nts[-1] < MIN_GRID_SPAN * nts[0]:
        raise DegenerateGrid(f"grid spans only a factor {nts[-1] / nts[0]:.3g} in N*t; at least {MIN_GRID_SPAN:g} is needed")

    rows = []
    for row_index, (n, t) in enumerate(ordered):
        cfg = row_config(base_config, n, t)
        logger.info("rate study row N=%d t=%g (%d steps, %d replicates)", n, t, cfg.n_steps, n_replicates)
        offset = row_index * n_replicates
        results = map_replicates(lambda r: run_replicate(cfg, r), range(offset, offset + n_replicates), threads)
        errors = np.array([res.spectral_error for res in results])
        rows.append(
            RateRow(
                n=n,
                t=t,
                nt=n * t,
                n_replicates=n_replicates,
                median_error=float(np.median(errors)),
                q90_error=float(np.quantile(errors, 0.9)),
                mean_error=float(np.mean(errors)),
                theory_bound=rate_bound(cfg.sigma, cfg.theta_max, cfg.dim, n, t, eps, strict=False),
                preconditions_hold=not theorem_preconditions(cfg, eps),
            )
        )

    slope, intercept = fit_loglog_slope([(row.nt, row.median_error) for row in rows])
    logger.info("rate study fitted slope %.4f", slope)
    return RateTable(rows=tuple(rows), fitted_slope=slope, fitted_intercept=intercept, eps=eps)


@dataclass(frozen=True)
class CoverageReport:
    """Fraction of replicates whose spectral error stays within the theoretical bound."""

    eps: float
    bound: float
    coverage: float
    required: float
    errors: Tuple[float, ...] = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.coverage >= self.required

    def coverage_at(self, bound: float) -> float:
        return float(np.mean(np.asarray(self.errors) <= bound))

    def as_dict(self) -> Dict[str, Any]:
        return {
            "status": "passed" if self.passed else "failed",
            "eps": self.eps,
            "bound": self.bound,
            "coverage": self.coverage,
            "required": self.required,
            "n_replicates": len(self.errors),
            "message": f"{self.coverage:.3f} of replicates within the bound (required {self.required:.3f})",
        }


def coverage_check(
    config: SystemConfig,
    n_replicates: int,
    eps: float,
    threads: int = 1,
    errors: Optional[Sequence[float]] = None,
    strict: bool = False,
) -> CoverageReport:
    """
    Fraction of replicates with error below the rate bound, against the guaranteed 1 - 14 eps.

    The hypotheses on t, N and d are always required. An eps below exp(-N/400) is only
    logged unless ``strict`` is set, since the bound is still a well-defined target there.

    Args:
        config: System satisfying the theorem's hypotheses
        n_replicates: Number of replicates
        eps: Confidence parameter in (0, 1)
        threads: Worker threads
        errors: Previously computed spectral errors to reuse instead of simulating
        strict: Also require eps >= exp(-N/400)

    Raises:
        PreconditionError: if the theorem's hypotheses fail for (config, eps)
    """
    violations = theorem_preconditions(config, eps, include_eps=strict)
    if violations:
        raise PreconditionError(violations)
    if not 0.0 < eps < 1.0:
        raise PreconditionError([f"eps in (0, 1) (got eps={eps!r})"])
    floor = eps_lower_limit(config.n_particles)
    if eps < floor:
        logger.warning("eps=%g is below exp(-N/400)=%.4g; coverage is measured against the bound anyway", eps, floor)
    if errors is None:
        results = map_replicates(lambda r: run_replicate(config, r), range(n_replicates), threads)
        errors = [res.spectral_error for res in results]
    bound = rate_bound(config.sigma, config.theta_max, config.dim, config.n_particles, config.t_final, eps, strict=False)
    coverage = float(np.mean(np.asarray(errors) <= bound))
    logger.info("coverage %.3f at eps=%g (bound %.4g)", coverage, eps, bound)
    return CoverageReport(eps=eps, bound=bound, coverage=coverage, required=coverage_level(eps), errors=tuple(errors))
