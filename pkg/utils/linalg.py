"""Small dense symmetric linear algebra used by the estimator and the simulators."""

from dataclasses import dataclass, field
from typing import Iterable, Tuple, Union

import numpy as np
import scipy.linalg as sla

from .errors import EigenSolverError, SingularGram

ArrayLike = Union[np.ndarray, Iterable[Iterable[float]]]

JACOBI_MAX_SWEEPS = 60
JACOBI_TOL = 1e-14
SINGULAR_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """
    Immutable symmetric matrix.

    Args:
        entries: Square array; must be exactly symmetric
    """

    entries: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.array(self.entries, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ValueError(f"expected a non-empty square matrix, got shape {arr.shape}")
        if not np.array_equal(arr, arr.T):
            i, j = np.argwhere(arr != arr.T)[0]
            raise ValueError(f"matrix is not symmetric: entry [{i}][{j}]={arr[i, j]!r} but [{j}][{i}]={arr[j, i]!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @classmethod
    def symmetrize(cls, m: ArrayLike) -> "SymMatrix":
        """Build (m + mᵀ)/2 from a general square matrix."""
        arr = np.asarray(m, dtype=np.float64)
        return cls(0.5 * (arr + arr.T))

    @classmethod
    def identity(cls, dim: int) -> "SymMatrix":
        return cls(np.eye(dim))

    @classmethod
    def diag(cls, values: Iterable[float]) -> "SymMatrix":
        return cls(np.diag(np.asarray(list(values), dtype=np.float64)))

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    def to_list(self) -> list:
        return self.entries.tolist()

    def __array__(self, dtype=None, copy=None) -> np.ndarray:
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __repr__(self) -> str:
        return f"SymMatrix({self.to_list()!r})"


def _off_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def _jacobi_sweeps(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi rotations on a copy of ``a``; returns (diagonalized a, accumulated rotations)."""
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n == 1 or scale == 0.0:
        return a, v

    for _ in range(JACOBI_MAX_SWEEPS):
        off = _off_norm(a)
        if off <= JACOBI_TOL * scale:
            return a, v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0.0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq

    off = _off_norm(a)
    if off > 1e4 * JACOBI_TOL * scale:
        raise EigenSolverError(f"Jacobi iteration did not converge after {JACOBI_MAX_SWEEPS} sweeps (off-norm {off:.3g})")
    return a, v


def sym_eigen(m: SymMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Args:
        m: Symmetric matrix

    Returns:
        (eigenvalues sorted descending, orthogonal matrix whose columns are the eigenvectors)
    """
    a, v = _jacobi_sweeps(np.array(m.entries, dtype=np.float64, copy=True))
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def extreme_eigenvalues(m: SymMatrix) -> Tuple[float, float]:
    w, _ = sym_eigen(m)
    return float(w[0]), float(w[-1])


def condition_number(m: SymMatrix) -> float:
    """Ratio of largest to smallest eigenvalue; ``inf`` when the smallest is not positive."""
    top, bottom = extreme_eigenvalues(m)
    if bottom <= 0.0:
        return float("inf")
    return top / bottom


def sym_solve(m: SymMatrix, rhs: ArrayLike) -> np.ndarray:
    """
    Solve ``m @ x = rhs`` for a positive definite ``m``.

    Args:
        m: Symmetric positive definite matrix
        rhs: Right-hand side, vector or matrix with ``m.dim`` rows

    Returns:
        Solution with the shape of ``rhs``

    Raises:
        SingularGram: if the smallest eigenvalue is not above 1e-12 times the largest
    """
    top, bottom = extreme_eigenvalues(m)
    if top <= 0.0 or bottom <= SINGULAR_RTOL * top:
        condition = top / bottom if bottom > 0.0 else float("inf")
        raise SingularGram(condition)
    b = np.asarray(rhs, dtype=np.float64)
    if b.shape[0] != m.dim:
        raise ValueError(f"rhs has {b.shape[0]} rows, expected {m.dim}")
    factor = sla.cho_factor(m.entries, lower=True, check_finite=False)
    return sla.cho_solve(factor, b, check_finite=False)


def spectral_norm_sym(m: SymMatrix) -> float:
    """Largest absolute eigenvalue."""
    w, _ = sym_eigen(m)
    return float(np.max(np.abs(w)))
