"""Filtered-regressor states.

Low-pass filtering the regressor and the state with a common pole -a turns
the plant's differential relation into an algebraic one:

    x = phi_star @ h + a*l + eps_bar + rho(t)

with hdot = -a h + z, ldot = -a l + x, rhodot = -a rho, rho(0) = x(0).
Rearranged, eps_bar (the filtered output disturbance) is measurable from
the state alone, and the filtered disturbance eps = F eps_bar follows from
the left inverse F of the disturbance map.  No state derivative is ever
needed.
"""

from __future__ import annotations

import numpy as np

__all__ = ["filter_rhs", "measured_eps_bar", "eps_from_eps_bar"]


def filter_rhs(
    a: float,
    h: np.ndarray,
    l: np.ndarray,
    rho: np.ndarray,
    x: np.ndarray,
    z: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Derivatives of the filter states (hdot, ldot, rhodot)."""
    return (-a * h + z, -a * l + x, -a * rho)


def measured_eps_bar(
    x: np.ndarray,
    h: np.ndarray,
    l: np.ndarray,
    rho: np.ndarray,
    phi_star: np.ndarray,
    a: float,
) -> np.ndarray:
    """Filtered output disturbance recovered from measured quantities only.

    eps_bar = x - phi_star @ h - a*l - rho.  At t = 0 all filter states and
    rho cancel x(0), so the value starts at exactly zero.
    """
    return x - phi_star @ h - a * l - rho


def eps_from_eps_bar(eps_bar: np.ndarray, f_mat: np.ndarray) -> np.ndarray:
    """Filtered disturbance state eps = F eps_bar, F the left inverse of D.

    eps_bar lies in the range of D along exact trajectories, so D @ eps
    restores eps_bar.
    """
    return f_mat @ eps_bar
