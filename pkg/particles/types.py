"""Domain types shared by the simulators, the likelihood and the estimator."""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from utils.linalg import SymMatrix, sym_eigen
from utils.seeding import MASK64


def _frozen(arr: Any) -> np.ndarray:
    if isinstance(arr, np.ndarray) and arr.dtype == np.float64 and not arr.flags.writeable:
        return arr
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


class SystemConfig(BaseModel):
    """
    Full description of one stochastic particle system.

    Args:
        n_particles: Number of particles N
        dim: Spatial dimension d
        theta: Interaction matrix (symmetric positive definite, d x d)
        sigma: Diffusion coefficient, shared by all coordinates
        init_variances: Variances of the i.i.d. Gaussian initialization, one per coordinate
        t_final: Observation horizon
        n_steps: Number of uniform time steps
        seed: Master seed (unsigned 64-bit)
    """

    model_config = ConfigDict(extra="forbid", frozen=True, arbitrary_types_allowed=True)

    n_particles: int = Field(ge=1)
    dim: int = Field(ge=1)
    theta: SymMatrix
    sigma: float = Field(ge=0.0)
    init_variances: Tuple[float, ...]
    t_final: float = Field(gt=0.0)
    n_steps: int = Field(gt=0)
    seed: int = Field(default=0, ge=0, le=MASK64)

    @field_validator("theta", mode="before")
    @classmethod
    def _coerce_theta(cls, value: Any) -> SymMatrix:
        if isinstance(value, SymMatrix):
            return value
        return SymMatrix(np.asarray(value, dtype=np.float64))

    @field_validator("init_variances")
    @classmethod
    def _non_negative_variances(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        for j, v in enumerate(value):
            if not np.isfinite(v) or v < 0.0:
                raise ValueError(f"init_variances[{j}] must be a non-negative real, got {v!r}")
        return value

    @model_validator(mode="after")
    def _check_consistency(self) -> "SystemConfig":
        if self.theta.dim != self.dim:
            raise ValueError(f"theta is {self.theta.dim}x{self.theta.dim} but dim={self.dim}")
        if len(self.init_variances) != self.dim:
            raise ValueError(f"init_variances has {len(self.init_variances)} entries, expected {self.dim}")
        eigenvalues, _ = sym_eigen(self.theta)
        if eigenvalues[-1] <= 0.0:
            raise ValueError(f"theta must be positive definite; smallest eigenvalue is {eigenvalues[-1]:.6g}")
        if not self.t_final / self.n_steps > 0.0:
            raise ValueError("step size t_final / n_steps must be positive")
        return self

    @field_serializer("theta")
    def _serialize_theta(self, theta: SymMatrix) -> list:
        return theta.to_list()

    @property
    def step_size(self) -> float:
        return self.t_final / self.n_steps

    @cached_property
    def theta_eigen(self) -> Tuple[np.ndarray, np.ndarray]:
        """Eigenvalues of theta (descending) and the matching orthogonal eigenvectors."""
        return sym_eigen(self.theta)

    @property
    def theta_max(self) -> float:
        return float(self.theta_eigen[0][0])

    @property
    def theta_min(self) -> float:
        return float(self.theta_eigen[0][-1])

    def replace(self, **changes: Any) -> "SystemConfig":
        """Validated copy with some fields changed."""
        data: Dict[str, Any] = self.model_dump()
        data.update(changes)
        return SystemConfig.model_validate(data)


@dataclass(frozen=True, eq=False)
class TrajectoryBundle:
    """
    Discretized paths of all particles on a uniform grid.

    ``states`` is indexed [step][particle][coordinate]; ``noise_increments`` holds the
    sigma * dW increments that moved step k to step k + 1. ``mean_path`` is the particle
    average carried by the simulator, indexed [step][coordinate], when one was kept.
    """

    config: SystemConfig
    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    noise_increments: Optional[np.ndarray] = field(default=None, repr=False)
    mean_path: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        cfg = self.config
        times = _frozen(self.times)
        states = _frozen(self.states)
        if times.shape != (cfg.n_steps + 1,):
            raise ValueError(f"times has shape {times.shape}, expected ({cfg.n_steps + 1},)")
        spacing = np.diff(times)
        if np.any(spacing <= 0.0) or np.max(np.abs(spacing - cfg.step_size)) > 1e-12 * max(cfg.step_size, cfg.t_final):
            raise ValueError("times must be a uniform, strictly increasing grid with spacing t_final / n_steps")
        expected = (cfg.n_steps + 1, cfg.n_particles, cfg.dim)
        if states.shape != expected:
            raise ValueError(f"states has shape {states.shape}, expected {expected}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if self.noise_increments is not None:
            noise = _frozen(self.noise_increments)
            if noise.shape != (cfg.n_steps, cfg.n_particles, cfg.dim):
                raise ValueError(f"noise_increments has shape {noise.shape}, expected {(cfg.n_steps,) + expected[1:]}")
            object.__setattr__(self, "noise_increments", noise)
        if self.mean_path is not None:
            mean = _frozen(self.mean_path)
            if mean.shape != (cfg.n_steps + 1, cfg.dim):
                raise ValueError(f"mean_path has shape {mean.shape}, expected {(cfg.n_steps + 1, cfg.dim)}")
            object.__setattr__(self, "mean_path", mean)

    @property
    def step_size(self) -> float:
        return self.config.step_size

    @property
    def n_steps(self) -> int:
        return self.config.n_steps

    @property
    def has_noise(self) -> bool:
        return self.noise_increments is not None


@dataclass(frozen=True, eq=False)
class SufficientStats:
    """
    Discretized integrals from which the maximum likelihood estimate is a closed-form function.

    gram is the time-integrated sum of deviation outer products, cross the Ito sum of
    increment-times-deviation outer products; both refer to the process rescaled by sigma.
    """

    gram: SymMatrix
    cross: np.ndarray = field(repr=False)
    per_coord_num: np.ndarray = field(repr=False)
    per_coord_den: np.ndarray = field(repr=False)
    t_final: float
    n_particles: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "cross", _frozen(self.cross))
        object.__setattr__(self, "per_coord_num", _frozen(self.per_coord_num))
        object.__setattr__(self, "per_coord_den", _frozen(self.per_coord_den))
        if np.any(self.per_coord_den < 0.0):
            raise ValueError("per-coordinate denominators must be non-negative")
        eigenvalues, _ = sym_eigen(self.gram)
        if eigenvalues[-1] < -1e-10 * max(abs(eigenvalues[0]), 0.0):
            raise ValueError(f"gram is not positive semi-definite (smallest eigenvalue {eigenvalues[-1]:.3g})")

    @property
    def dim(self) -> int:
        return self.gram.dim


@dataclass(frozen=True, eq=False)
class EstimateResult:
    """
    Closed-form estimate of the interaction matrix.

    theta_hat is the symmetric part of the unconstrained stationary point theta_hat_raw;
    theta_hat_restricted is the stationary point over symmetric matrices.
    """

    theta_hat: SymMatrix
    theta_hat_raw: np.ndarray = field(repr=False)
    theta_hat_restricted: SymMatrix
    diag_estimates: np.ndarray = field(repr=False)
    gram_condition: float
    min_eigenvalue: float
    spectral_error: Optional[float] = None

    def __post_init__(self) -> None:
        raw = _frozen(self.theta_hat_raw)
        object.__setattr__(self, "theta_hat_raw", raw)
        object.__setattr__(self, "diag_estimates", _frozen(self.diag_estimates))
        if not np.array_equal(self.theta_hat.entries, 0.5 * (raw + raw.T)):
            raise ValueError("theta_hat must equal the symmetric part of theta_hat_raw")
        if self.spectral_error is not None and self.spectral_error < 0.0:
            raise ValueError("spectral_error must be non-negative")

    def as_dict(self) -> Dict[str, Any]:
        return {
            "theta_hat": self.theta_hat.to_list(),
            "theta_hat_raw": self.theta_hat_raw.tolist(),
            "theta_hat_restricted": self.theta_hat_restricted.to_list(),
            "diag_estimates": self.diag_estimates.tolist(),
            "gram_condition": self.gram_condition,
            "min_eigenvalue": self.min_eigenvalue,
            "spectral_error": self.spectral_error,
        }
