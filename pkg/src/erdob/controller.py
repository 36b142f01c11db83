"""Two-phase tracking controller.

While the history stack is still filling, a plain disturbance-compensating
feedback keeps the plant stable:

    u = g^+ (-f(x) + xd_dot - D epsT_hat - hslash * e_x)

Once the stack is rich the integral terminal sliding-mode law takes over:

    sigma = e_x + e_I,   e_I integrating sign(e_x) from the switch,
    u = g^+ (-f(x) + xd_dot - D epsT_hat - sign(e_x) - k(t) sign(sigma))

with the adaptive switching gain

    k(t) = k0 + k1 * ||eps_bar|| * exp(-lambda1 * (t - T))

whose decaying excess follows the certified estimation convergence rate,
so the gain never has to be sized for the worst-case disturbance.  The
admissibility condition is k1 >= ||F|| * ||D||.

sign(0) = 0 componentwise.  An optional boundary layer replaces sign(v)
with tanh(v / width) to tame chattering; the default width of zero keeps
the exact discontinuous law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import spectral_norm
from .plant import RegressorPlant

__all__ = [
    "ControllerConfig",
    "switching_sign",
    "tracking_error",
    "sliding_surface",
    "adaptive_gain",
    "itsmc_control",
    "pre_rich_control",
]


@dataclass
class ControllerConfig:
    k0: float = 0.1
    k1: float | None = None       # defaults to the admissibility floor
    hslash: float = 5.0
    boundary_layer: float = 0.0

    def resolve_k1(self, plant: RegressorPlant) -> float:
        floor = spectral_norm(plant.dist_pinv) * spectral_norm(plant.dist_map)
        k1 = floor if self.k1 is None else self.k1
        if self.k0 <= 0.0:
            raise ValueError("k0 must be positive")
        if self.hslash <= 0.0:
            raise ValueError("hslash must be positive")
        if self.boundary_layer < 0.0:
            raise ValueError("boundary layer width cannot be negative")
        if k1 < floor - 1e-12:
            raise ValueError(
                f"switching gain k1={k1:.6g} violates k1 >= ||F||*||D|| = {floor:.6g}"
            )
        return k1


def switching_sign(v: np.ndarray, boundary_layer: float = 0.0) -> np.ndarray:
    """Componentwise sign with sign(0) = 0, optionally smoothed."""
    if boundary_layer > 0.0:
        return np.tanh(v / boundary_layer)
    return np.sign(v)


def tracking_error(x: np.ndarray, x_d: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    x_d = np.asarray(x_d, dtype=float)
    if x.shape != x_d.shape:
        raise ValueError("state and reference dimensions differ")
    return x - x_d


def sliding_surface(e_x: np.ndarray, e_I: np.ndarray) -> np.ndarray:
    """sigma = e_x + e_I with e_I the running integral of sign(e_x)."""
    return e_x + e_I


def adaptive_gain(
    k0: float,
    k1: float,
    eps_bar: np.ndarray,
    t_since_switch: float,
    lambda1: float,
) -> float:
    """k(t) = k0 + k1 ||eps_bar|| exp(-lambda1 * t_since_switch); always >= k0."""
    return k0 + k1 * float(np.linalg.norm(eps_bar)) * np.exp(-lambda1 * max(t_since_switch, 0.0))


def itsmc_control(
    plant: RegressorPlant,
    x: np.ndarray,
    xd_dot: np.ndarray,
    e_x: np.ndarray,
    sigma: np.ndarray,
    eps_T_hat: np.ndarray,
    k: float,
    boundary_layer: float = 0.0,
) -> np.ndarray:
    """Sliding-phase control input."""
    v = (
        -plant.f(x)
        + xd_dot
        - plant.dist_map @ eps_T_hat
        - switching_sign(e_x, boundary_layer)
        - k * switching_sign(sigma, boundary_layer)
    )
    return plant.g_pinv @ v


def pre_rich_control(
    plant: RegressorPlant,
    x: np.ndarray,
    xd_dot: np.ndarray,
    e_x: np.ndarray,
    eps_T_hat: np.ndarray,
    hslash: float,
) -> np.ndarray:
    """Collection-phase control input.

    With a square input map the closed-loop error obeys
    edot_x = -hslash e_x + D (eps_T - epsT_hat), so the error stays within
    an input-to-state bound while the stack fills.
    """
    v = -plant.f(x) + xd_dot - plant.dist_map @ eps_T_hat - hslash * e_x
    return plant.g_pinv @ v
