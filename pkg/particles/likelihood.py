"""
Girsanov log-likelihood of the interaction matrix and the sufficient statistics behind it.

All quantities refer to the process rescaled by sigma (unit diffusion); a config with
sigma = 0 is used unscaled. Stochastic integrals are left-endpoint (Ito) sums, and the
ds-integrals use left endpoints as well, so both likelihood forms agree on Euler data.
"""

from typing import Tuple

import numpy as np

from utils.errors import MissingNoise
from utils.linalg import SymMatrix

from .types import SufficientStats, TrajectoryBundle


def _scale(bundle: TrajectoryBundle) -> float:
    sigma = bundle.config.sigma
    return sigma if sigma > 0.0 else 1.0


def _deviations_and_increments(bundle: TrajectoryBundle) -> Tuple[np.ndarray, np.ndarray]:
    """Left-endpoint deviations Xbar_k - X^i_k and forward increments, both rescaled, shape (K, N, d)."""
    x = bundle.states / _scale(bundle)
    deviation = x.mean(axis=1, keepdims=True) - x
    return deviation[:-1], np.diff(x, axis=0)


def _check_dim(bundle: TrajectoryBundle, a: np.ndarray) -> None:
    d = bundle.config.dim
    if a.shape != (d, d):
        raise ValueError(f"argument is {a.shape[0]}x{a.shape[1]} but the bundle has dim={d}")


def _log_likelihood_matrix(bundle: TrajectoryBundle, a: np.ndarray) -> float:
    """Observation-form log-likelihood for a general (not necessarily symmetric) d x d matrix."""
    _check_dim(bundle, a)
    deviation, increment = _deviations_and_increments(bundle)
    pulled = deviation @ a.T
    h = bundle.step_size
    return float(-0.5 * h * np.sum(pulled**2) + np.sum(pulled * increment))


def log_likelihood(bundle: TrajectoryBundle, a: SymMatrix) -> float:
    """
    Log-likelihood of the drift matrix ``a`` given observed paths.

    sum_i [ -1/2 int |a (Xbar - X^i)|^2 ds + int a (Xbar - X^i) . dX^i ]

    Args:
        bundle: Observed trajectories
        a: Candidate interaction matrix

    Returns:
        Scalar log-likelihood
    """
    return _log_likelihood_matrix(bundle, a.entries)


def log_likelihood_trace_form(bundle: TrajectoryBundle, a: SymMatrix, theta_true: SymMatrix) -> float:
    """
    Log-likelihood written through the mean-field covariance and the driving noise.

    N int tr[M_s (-1/2 a a^T + a Theta)] ds + sum_i int a (Xbar - X^i) . dW^i

    Raises:
        MissingNoise: if the bundle was simulated without stored increments
    """
    if bundle.noise_increments is None:
        raise MissingNoise()
    a_mat = a.entries
    _check_dim(bundle, a_mat)
    _check_dim(bundle, theta_true.entries)
    deviation, _ = _deviations_and_increments(bundle)
    n = bundle.config.n_particles
    h = bundle.step_size

    covariances = np.einsum("kia,kib->kab", deviation, deviation) / n
    weight = -0.5 * a_mat @ a_mat.T + a_mat @ theta_true.entries
    trace_term = n * h * float(np.einsum("kab,ba->", covariances, weight))

    noise = bundle.noise_increments / _scale(bundle)
    noise_term = float(np.sum((deviation @ a_mat.T) * noise))
    return trace_term + noise_term


def mean_field_covariance(bundle: TrajectoryBundle, step: int) -> SymMatrix:
    """(1/N) sum_i (Xbar - X^i)(Xbar - X^i)^T at one grid index, in the original (unscaled) units."""
    if not 0 <= step <= bundle.n_steps:
        raise IndexError(f"step {step} outside 0..{bundle.n_steps}")
    x = bundle.states[step]
    deviation = x.mean(axis=0) - x
    return SymMatrix.symmetrize(deviation.T @ deviation / bundle.config.n_particles)


def sufficient_stats(bundle: TrajectoryBundle) -> SufficientStats:
    """
    Reduce a bundle to the Gram matrix, the cross term and the per-coordinate ratios.

    gram  = sum_k h sum_i D_ik D_ik^T
    cross = sum_k sum_i (X^i_{k+1} - X^i_k) D_ik^T
    """
    deviation, increment = _deviations_and_increments(bundle)
    n = bundle.config.n_particles
    h = bundle.step_size

    gram = SymMatrix.symmetrize(h * np.einsum("kia,kib->ab", deviation, deviation))
    cross = np.einsum("kia,kib->ab", increment, deviation)
    per_coord_num = np.einsum("kij,kij->j", deviation, increment) / n
    per_coord_den = h * np.einsum("kij,kij->j", deviation, deviation) / n
    return SufficientStats(
        gram=gram,
        cross=cross,
        per_coord_num=per_coord_num,
        per_coord_den=per_coord_den,
        t_final=bundle.config.t_final,
        n_particles=n,
    )


def log_likelihood_from_stats(stats: SufficientStats, a: SymMatrix) -> float:
    """The same log-likelihood assembled from sufficient statistics alone: -1/2 tr(a G a^T) + tr(a B^T)."""
    a_mat = a.entries
    return float(-0.5 * np.trace(a_mat @ stats.gram.entries @ a_mat.T) + np.trace(a_mat @ stats.cross.T))
