"""Closed-form maximum likelihood estimation of the interaction matrix."""

import logging
from typing import Optional

import numpy as np

from utils.errors import SingularGram, ZeroDenominator
from utils.linalg import SymMatrix, extreme_eigenvalues, spectral_norm_sym, sym_eigen, sym_solve

from .likelihood import _log_likelihood_matrix, sufficient_stats
from .types import EstimateResult, SufficientStats, TrajectoryBundle

logger = logging.getLogger(__name__)

MAX_GRAM_CONDITION = 1e12
WARN_GRAM_CONDITION = 1e8


def _restricted_stationary_point(gram: SymMatrix, cross: np.ndarray) -> SymMatrix:
    """Solve A G + G A = B + B^T for symmetric A in the eigenbasis of G."""
    lam, u = sym_eigen(gram)
    rhs = u.T @ (cross + cross.T) @ u
    rotated = rhs / (lam[:, None] + lam[None, :])
    return SymMatrix.symmetrize(u @ rotated @ u.T)


def mle_diagonal(stats: SufficientStats) -> np.ndarray:
    """
    Per-coordinate estimates: ratio of the Ito sum to the time-integrated squared deviation.

    Raises:
        ZeroDenominator: if some coordinate never deviates from the mean
    """
    for j, den in enumerate(stats.per_coord_den):
        if not den > 0.0:
            raise ZeroDenominator(j)
    return stats.per_coord_num / stats.per_coord_den


def spectral_error(theta_hat: SymMatrix, theta_true: SymMatrix) -> float:
    """Spectral norm of theta_hat - theta_true."""
    if theta_hat.dim != theta_true.dim:
        raise ValueError(f"dimension mismatch: {theta_hat.dim} vs {theta_true.dim}")
    return spectral_norm_sym(SymMatrix(theta_hat.entries - theta_true.entries))


def mle_matrix(stats: SufficientStats, theta_true: Optional[SymMatrix] = None) -> EstimateResult:
    """
    Maximum likelihood estimate from sufficient statistics.

    Args:
        stats: Output of sufficient_stats
        theta_true: Ground truth; when given, the spectral error is reported

    Returns:
        EstimateResult with the raw stationary point cross @ gram^-1, its symmetric part,
        the symmetric-restricted stationary point and conditioning diagnostics

    Raises:
        SingularGram: if the Gram matrix condition number exceeds 1e12
    """
    top, bottom = extreme_eigenvalues(stats.gram)
    condition = top / bottom if bottom > 0.0 else float("inf")
    if not condition <= MAX_GRAM_CONDITION:
        raise SingularGram(condition)
    if condition > WARN_GRAM_CONDITION:
        logger.warning("Gram matrix is ill-conditioned (condition %.3g)", condition)

    # gram is symmetric, so cross @ gram^-1 = (gram^-1 @ cross^T)^T
    raw = sym_solve(stats.gram, stats.cross.T).T
    theta_hat = SymMatrix.symmetrize(raw)
    _, min_eig = extreme_eigenvalues(theta_hat)
    if min_eig <= 0.0:
        logger.warning("estimate left the positive definite cone (min eigenvalue %.3g)", min_eig)

    return EstimateResult(
        theta_hat=theta_hat,
        theta_hat_raw=raw,
        theta_hat_restricted=_restricted_stationary_point(stats.gram, stats.cross),
        diag_estimates=mle_diagonal(stats),
        gram_condition=condition,
        min_eigenvalue=min_eig,
        spectral_error=spectral_error(theta_hat, theta_true) if theta_true is not None else None,
    )


def estimate(bundle: TrajectoryBundle, theta_true: Optional[SymMatrix] = None) -> EstimateResult:
    return mle_matrix(sufficient_stats(bundle), theta_true)


def _symmetric_directions(dim: int) -> list:
    directions = []
    for i in range(dim):
        for j in range(i, dim):
            e = np.zeros((dim, dim))
            e[i, j] = e[j, i] = 1.0
            directions.append(e)
    return directions


def likelihood_gradient(bundle: TrajectoryBundle, a: SymMatrix, relative_step: float = 1e-5) -> np.ndarray:
    """
    Central finite-difference gradient of the log-likelihood over the d(d+1)/2 symmetric coordinates.

    Args:
        bundle: Observed trajectories
        a: Point of evaluation
        relative_step: Step is relative_step * (1 + ||a||)
    """
    step = relative_step * (1.0 + spectral_norm_sym(a))
    base = a.entries
    grads = []
    for e in _symmetric_directions(a.dim):
        upper = _log_likelihood_matrix(bundle, base + step * e)
        lower = _log_likelihood_matrix(bundle, base - step * e)
        grads.append((upper - lower) / (2.0 * step))
    return np.asarray(grads)


def optimality_gap(bundle: TrajectoryBundle, theta_hat: SymMatrix, relative_step: float = 1e-5) -> float:
    """Max-norm of the symmetric finite-difference gradient at theta_hat; zero at the restricted maximizer."""
    return float(np.max(np.abs(likelihood_gradient(bundle, theta_hat, relative_step))))
