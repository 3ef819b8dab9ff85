"""
Trajectory generation for the linear interacting particle system and its OU limit.

Every particle owns one random stream keyed by (seed, replicate, particle); the stream
first yields the initial position and then the standard normal increments of all steps.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from utils.errors import CapacityError, ConfigError, StabilityError
from utils.seeding import particle_generators

from .types import SystemConfig, TrajectoryBundle

logger = logging.getLogger(__name__)

STABILITY_LIMIT = 0.5
ACCURACY_RULE = 0.01
INTERACTION_MATRIX_CAP = 4096


def default_n_steps(theta_max: float, t_final: float) -> int:
    """Step count from the default rule h = min(0.01 / theta_1, t_final / 100)."""
    h = min(ACCURACY_RULE / theta_max, t_final / 100.0)
    return max(1, math.ceil(t_final / h - 1e-9))


def check_step_size(config: SystemConfig) -> None:
    """
    Enforce the explicit Euler step rule.

    Raises:
        StabilityError: if h * theta_1 > 0.5
    """
    h_theta = config.step_size * config.theta_max
    if h_theta > STABILITY_LIMIT:
        raise StabilityError(h_theta)
    if h_theta > ACCURACY_RULE * (1.0 + 1e-12):
        logger.warning("h*theta_1 = %.4g is above %.2g; discretization bias may be visible", h_theta, ACCURACY_RULE)


def _require_interacting(config: SystemConfig) -> None:
    if config.n_particles < 2:
        raise ConfigError(f"the interacting system needs at least 2 particles, got {config.n_particles}", "n_particles")


def _draw_inputs(config: SystemConfig, replicate: int) -> Tuple[np.ndarray, np.ndarray]:
    """Initial positions (N, d) and standard normal draws (n_steps, N, d) from the particle streams."""
    n, d, k = config.n_particles, config.dim, config.n_steps
    scale = np.sqrt(np.asarray(config.init_variances, dtype=np.float64))
    xi = np.empty((n, d))
    z = np.empty((k, n, d))
    for p, gen in enumerate(particle_generators(config.seed, replicate, n)):
        xi[p] = scale * gen.standard_normal(d)
        z[:, p, :] = gen.standard_normal((k, d))
    return xi, z


def _time_grid(config: SystemConfig) -> np.ndarray:
    return np.arange(config.n_steps + 1, dtype=np.float64) * config.step_size


def _euler_interacting(config: SystemConfig, xi: np.ndarray, noise: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Euler-Maruyama states and the carried particle average.

    The average moves by the particle mean of each noise increment and nothing else;
    deviations from it follow the centered drift and centered noise.
    """
    theta = config.theta.entries
    h = config.step_size
    noise_mean = noise.mean(axis=1)
    states = np.empty((config.n_steps + 1,) + xi.shape)
    mean_path = np.empty((config.n_steps + 1, xi.shape[1]))
    center = xi.mean(axis=0)
    deviation = xi - center
    states[0] = xi
    mean_path[0] = center
    for k in range(config.n_steps):
        center = center + noise_mean[k]
        deviation = deviation - h * (deviation @ theta) + (noise[k] - noise_mean[k])
        mean_path[k + 1] = center
        states[k + 1] = center + deviation
    return states, mean_path


def _euler_ou(config: SystemConfig, xi: np.ndarray, noise: np.ndarray) -> np.ndarray:
    theta = config.theta.entries
    h = config.step_size
    states = np.empty((config.n_steps + 1,) + xi.shape)
    states[0] = xi
    y = xi
    for k in range(config.n_steps):
        y = y + h * (-y @ theta) + noise[k]
        states[k + 1] = y
    return states


def simulate_interacting(config: SystemConfig, store_noise: bool = False, replicate: int = 0) -> TrajectoryBundle:
    """
    Euler-Maruyama paths of dX^i = Theta (Xbar - X^i) dt + sigma dW^i.

    Args:
        config: System description
        store_noise: Keep the sigma * sqrt(h) * Z increments in the bundle
        replicate: Replicate index selecting the stream family

    Returns:
        Trajectory bundle of all particles
    """
    _require_interacting(config)
    check_step_size(config)
    xi, z = _draw_inputs(config, replicate)
    noise = config.sigma * math.sqrt(config.step_size) * z
    states, mean_path = _euler_interacting(config, xi, noise)
    return TrajectoryBundle(config, _time_grid(config), states, noise if store_noise else None, mean_path)


def simulate_ou_euler(config: SystemConfig, store_noise: bool = False, replicate: int = 0) -> TrajectoryBundle:
    """Euler-Maruyama paths of N independent OU processes dY = -Theta Y dt + sigma dW on the particle streams."""
    check_step_size(config)
    xi, z = _draw_inputs(config, replicate)
    noise = config.sigma * math.sqrt(config.step_size) * z
    states = _euler_ou(config, xi, noise)
    return TrajectoryBundle(config, _time_grid(config), states, noise if store_noise else None)


def simulate_ou_exact(config: SystemConfig, store_noise: bool = False, replicate: int = 0) -> TrajectoryBundle:
    """
    Exact-transition OU paths, one independent process per particle.

    Each eigen-coordinate y of Theta = V diag(lambda) V^T moves as
    y <- exp(-lambda h) y + eta with eta ~ N(0, sigma^2 (1 - exp(-2 lambda h)) / (2 lambda)).
    Stored noise holds the innovations eta mapped back to the original coordinates.
    """
    lam, v = config.theta_eigen
    h = config.step_size
    xi, z = _draw_inputs(config, replicate)
    decay = np.exp(-lam * h)
    innovation_sd = config.sigma * np.sqrt(-np.expm1(-2.0 * lam * h) / (2.0 * lam))

    innovations = z * innovation_sd
    eig_states = np.empty((config.n_steps + 1, config.n_particles, config.dim))
    y = xi @ v
    eig_states[0] = y
    for k in range(config.n_steps):
        y = decay * y + innovations[k]
        eig_states[k + 1] = y

    states = eig_states @ v.T
    noise = innovations @ v.T if store_noise else None
    return TrajectoryBundle(config, _time_grid(config), states, noise)


@dataclass(frozen=True, eq=False)
class CoupledBundle:
    """Interacting paths X and OU paths Y driven by the same noise from the same initial positions."""

    interacting: TrajectoryBundle
    decoupled: TrajectoryBundle

    def __post_init__(self) -> None:
        x, y = self.interacting, self.decoupled
        if x.config is not y.config or x.noise_increments is None or x.noise_increments is not y.noise_increments:
            raise ValueError("coupled bundles must share config and noise increments")
        if not np.array_equal(x.times, y.times):
            raise ValueError("coupled bundles must share the time grid")

    def difference_process(self) -> np.ndarray:
        """Delta^i_k = Xbar_k - X^i_k + Y^i_k, indexed [step][particle][coordinate]."""
        x = self.interacting.states
        return x.mean(axis=1, keepdims=True) - x + self.decoupled.states

    def coupling_defect(self) -> float:
        """Largest deviation of any Delta^i from Delta^1."""
        delta = self.difference_process()
        return float(np.max(np.abs(delta - delta[:, :1, :])))


def simulate_coupled(config: SystemConfig, replicate: int = 0) -> CoupledBundle:
    """Simulate X (interacting) and Y (OU, Euler-Maruyama) on identical noise and initial positions."""
    _require_interacting(config)
    check_step_size(config)
    xi, z = _draw_inputs(config, replicate)
    noise = config.sigma * math.sqrt(config.step_size) * z
    noise.setflags(write=False)
    times = _time_grid(config)
    states, mean_path = _euler_interacting(config, xi, noise)
    interacting = TrajectoryBundle(config, times, states, noise, mean_path)
    decoupled = TrajectoryBundle(config, times, _euler_ou(config, xi, noise), interacting.noise_increments)
    return CoupledBundle(interacting, decoupled)


def mean_process(bundle: TrajectoryBundle) -> np.ndarray:
    """Particle average indexed [step][coordinate], the simulator's carried path when the bundle has one."""
    if bundle.mean_path is not None:
        return bundle.mean_path
    return bundle.states.mean(axis=1)


def empirical_quadratic_variation(path: np.ndarray) -> np.ndarray:
    """
    Sum of squared increments per coordinate.

    Args:
        path: Array indexed [step][coordinate] with at least two time points
    """
    arr = np.asarray(path, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[0] < 2:
        raise ValueError("quadratic variation needs at least two time points")
    return np.sum(np.diff(arr, axis=0) ** 2, axis=0)


def interaction_matrix(n_particles: int, dim: int) -> np.ndarray:
    """
    The (N d) x (N d) centering projection I - (1/N) 1 1^T (x) I_d.

    Raises:
        CapacityError: if N * d exceeds the testing cap of 4096
    """
    if n_particles < 1 or dim < 1:
        raise ValueError("n_particles and dim must be positive")
    if n_particles * dim > INTERACTION_MATRIX_CAP:
        raise CapacityError(f"N*d = {n_particles * dim} exceeds the cap of {INTERACTION_MATRIX_CAP}")
    centering = np.eye(n_particles) - np.full((n_particles, n_particles), 1.0 / n_particles)
    return np.kron(centering, np.eye(dim))
