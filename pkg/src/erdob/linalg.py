"""Small dense-matrix kernel used throughout the simulator.

Everything here operates on plain numpy arrays: matrices are 2-D float
arrays, vectors are 1-D.  Only the handful of primitives the observer and
controller actually need are exposed, with the conventions they rely on
(column-major vectorization in particular) pinned down in one place.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = [
    "RankDeficiencyError",
    "NonFiniteDerivativeError",
    "kron",
    "kron_row",
    "pinv",
    "vec_cols",
    "unvec_cols",
    "min_eig_sym",
    "max_eig_sym",
    "spectral_norm",
    "rk4_step",
]


class RankDeficiencyError(ValueError):
    """Raised when a pseudoinverse is requested for a rank-deficient matrix."""


class NonFiniteDerivativeError(ArithmeticError):
    """Raised when an integrator stage produces NaN or infinity."""


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices (m*p x n*q)."""
    return np.kron(a, b)


def kron_row(e: np.ndarray, b: np.ndarray) -> np.ndarray:
    """kron(e^T, B) for a vector e: the single-row case the update law uses.

    Equivalent to kron(e.reshape(1, -1), B) but cheap enough for the
    integration hot path.
    """
    e = np.asarray(e, dtype=float)
    b = np.asarray(b, dtype=float)
    return (e[None, :, None] * b[:, None, :]).reshape(b.shape[0], e.shape[0] * b.shape[1])


def pinv(a: np.ndarray) -> np.ndarray:
    """Left pseudoinverse (A^T A)^-1 A^T of a full-column-rank matrix.

    Solved through the normal equations; the matrices in this code base are
    tiny and well conditioned, so no SVD is warranted.  Raises
    RankDeficiencyError when A^T A is singular to working precision.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("pinv expects a 2-D array")
    gram = a.T @ a
    eigs = np.linalg.eigvalsh(gram)
    if eigs[0] <= max(eigs[-1], 1.0) * 1e-12:
        raise RankDeficiencyError(
            f"matrix of shape {a.shape} is rank deficient (gram eigenvalues {eigs})"
        )
    return np.linalg.solve(gram, a.T)


def vec_cols(a: np.ndarray) -> np.ndarray:
    """Stack the columns of a matrix into one vector.

    Column stacking is the convention that makes
    vec(A B C) == kron(C^T, A) @ vec(B), which the adaptive update law
    depends on; do not swap it for row stacking.
    """
    return np.asarray(a, dtype=float).reshape(-1, order="F")


def unvec_cols(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of vec_cols for a known shape."""
    return np.asarray(v, dtype=float).reshape((rows, cols), order="F")


def _check_symmetric(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > tol * scale:
        raise ValueError("matrix is not symmetric to tolerance")
    return a


def min_eig_sym(a: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(_check_symmetric(a))[0])


def max_eig_sym(a: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(_check_symmetric(a))[-1])


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value, computed as sqrt(max eig of A^T A)."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("spectral_norm expects a 2-D array")
    gram = a.T @ a
    return float(np.sqrt(max(np.linalg.eigvalsh(gram)[-1], 0.0)))


def rk4_step(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t: float,
    y: np.ndarray,
    h: float,
) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step.

    Raises NonFiniteDerivativeError if any stage derivative is non-finite,
    which the simulator treats as a blow-up diagnostic.
    """
    if h <= 0.0:
        raise ValueError("step size must be positive")
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1)
    k3 = rhs(t + 0.5 * h, y + (0.5 * h) * k2)
    k4 = rhs(t + h, y + h * k3)
    # NaN/inf propagate through the sum, so one check covers all stages.
    probe = k1 + k2 + k3 + k4
    if not np.all(np.isfinite(probe)):
        for name, k in (("k1", k1), ("k2", k2), ("k3", k3), ("k4", k4)):
            if not np.all(np.isfinite(k)):
                raise NonFiniteDerivativeError(
                    f"non-finite derivative in stage {name} at t={t:.6g}"
                )
        raise NonFiniteDerivativeError(f"non-finite derivative at t={t:.6g}")
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
