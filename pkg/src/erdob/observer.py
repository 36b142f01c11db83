"""Adaptive disturbance observer.

The disturbance estimate is built from measured quantities only:

    epsT_hat = (S_hat + a*I) @ eps + rho_delta_hat
    epsdot_hat = -a * eps_hat + epsT_hat
    rhodot_delta_hat = -a * rho_delta_hat

with eps = F eps_bar computed from the filtered states.  The innovation
e_tilde = eps_bar - D eps_hat (identically x - x_hat) drives a gradient
update of the vectorized estimate of the exosystem matrix:

    svecdot_hat = Gamma * kron((F eps_bar)^T, D)^T @ e_tilde

Column stacking is used for the vectorization throughout; see linalg.
Gamma may be a positive scalar or a full positive-definite matrix of size
d^2 x d^2.
"""

from __future__ import annotations

import numpy as np

from .linalg import kron_row, max_eig_sym, min_eig_sym

__all__ = [
    "estimate_disturbance",
    "observer_rhs",
    "innovation",
    "baseline_update",
    "gamma_apply",
    "gamma_inv_extrema",
]


def estimate_disturbance(
    s_hat: np.ndarray,
    eps: np.ndarray,
    rho_delta_hat: np.ndarray,
    a: float,
) -> np.ndarray:
    """epsT_hat = (S_hat + a*I) @ eps + rho_delta_hat."""
    return s_hat @ eps + a * eps + rho_delta_hat


def observer_rhs(
    eps_hat: np.ndarray,
    rho_delta_hat: np.ndarray,
    eps_T_hat: np.ndarray,
    a: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Auxiliary estimation dynamics (epsdot_hat, rhodot_delta_hat)."""
    return (-a * eps_hat + eps_T_hat, -a * rho_delta_hat)


def innovation(eps_bar: np.ndarray, eps_hat: np.ndarray, d_mat: np.ndarray) -> np.ndarray:
    """e_tilde = eps_bar - D @ eps_hat (equals x - x_hat by construction)."""
    return eps_bar - d_mat @ eps_hat


def gamma_apply(gamma: float | np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply the adaptation gain: scalar multiple or matrix product."""
    if np.isscalar(gamma):
        return float(gamma) * v
    return np.asarray(gamma) @ v


def gamma_inv_extrema(gamma: float | np.ndarray, dim: int) -> tuple[float, float]:
    """(min, max) eigenvalues of Gamma^-1 without forming the inverse."""
    if np.isscalar(gamma):
        g = float(gamma)
        if g <= 0.0:
            raise ValueError("adaptation gain must be positive")
        return 1.0 / g, 1.0 / g
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (dim, dim):
        raise ValueError(f"adaptation gain matrix must be {dim}x{dim}")
    lo, hi = min_eig_sym(gamma), max_eig_sym(gamma)
    if lo <= 0.0:
        raise ValueError("adaptation gain matrix must be positive definite")
    return 1.0 / hi, 1.0 / lo


def baseline_update(
    e_tilde: np.ndarray,
    eps_bar: np.ndarray,
    f_mat: np.ndarray,
    d_mat: np.ndarray,
    gamma: float | np.ndarray,
) -> np.ndarray:
    """Gradient-style derivative of the vectorized exosystem estimate.

    The regressor kron((F eps_bar)^T, D) is exactly the matrix mapping the
    vectorized estimation error to the innovation dynamics, so this is the
    steepest-descent direction weighted by Gamma.  Stalls when either the
    innovation or the filtered disturbance vanishes.
    """
    w = kron_row(f_mat @ eps_bar, d_mat)
    return gamma_apply(gamma, w.T @ e_tilde)
