"""Experience-replay machinery: window integrals, history stack, fast law.

Over a trailing window of length delta_t the simulator accumulates

    Y(t)    = integral of kron(eps_bar^T F^T, D)   (n x d^2)
    Ybar(t) = a * integral of eps_bar              (n,)
    Zint(t) = integral of phi_star @ z             (n,)

all zero until the window first fills after the collection start t0.
Integrating the plant over the same window gives the algebraic identity

    x(t) - x(t - delta_t) = Y(t) @ svec_true + Zint(t) + Ybar(t) + leak

where the leak is the integral of the exponentially decaying initial
condition term and is negligible once t0 is large enough.  A record
therefore stores (t_i, Y_i, b_i) with b_i = x(t_i) - x(t_i - delta_t)
- Zint_i - Ybar_i, and b_i - Y_i @ svec_hat is a residual the update law
can drive to zero without ever touching the true exosystem matrix.

The stack keeps at most `capacity` records and only ever swaps a record
in when doing so increases the minimum eigenvalue of sum(Y_i^T Y_i); the
stack's excitation level is thus non-decreasing.  Once that eigenvalue
exceeds the richness threshold omega, the accelerated update term is
activated and an exponential convergence rate can be certified.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import kron_row
from .observer import baseline_update, gamma_apply, gamma_inv_extrema

__all__ = [
    "WindowIntegrals",
    "StackRecord",
    "HistoryStack",
    "RateCertificate",
    "NotRichError",
    "integrated_identity_residual",
    "er_update",
    "rate_certificate",
]


class NotRichError(RuntimeError):
    """Raised when a rate certificate is requested before the stack is rich."""


class WindowIntegrals:
    """Trailing-window integrals on a fixed step grid.

    Per-step trapezoids are accumulated into running sums; a window value
    is then the difference of two running sums, which keeps the cost per
    step constant and makes the trapezoid exact for constant integrands.
    """

    def __init__(self, n: int, d: int, step: float, delta_t: float, t0: float, n_steps: int):
        if delta_t <= 0.0 or step <= 0.0:
            raise ValueError("window length and step must be positive")
        self.n = n
        self.d = d
        self.step = step
        self.window_steps = max(1, int(round(delta_t / step)))
        self.delta_t = self.window_steps * step   # snapped to the grid
        self.t0 = t0
        self._cum_w = np.zeros((n_steps + 1, n * d * d))
        self._cum_eb = np.zeros((n_steps + 1, n))
        self._cum_pz = np.zeros((n_steps + 1, n))
        self._prev: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
        self._count = 0
        self._a = 0.0

    def accumulate(
        self,
        eps_bar: np.ndarray,
        phi_z: np.ndarray,
        f_mat: np.ndarray,
        d_mat: np.ndarray,
        a: float,
    ) -> None:
        """Push the integrand samples for the next grid point.

        Call once per grid point, starting with the initial state.  The
        Ybar scaling by the filter pole is applied on readout.
        """
        w_flat = kron_row(f_mat @ eps_bar, d_mat).ravel()
        eb = np.asarray(eps_bar, dtype=float)
        pz = np.asarray(phi_z, dtype=float)
        self._a = a
        if self._prev is None:
            self._prev = (w_flat, eb, pz)
            return
        k = self._count
        half = 0.5 * self.step
        pw, pe, pp = self._prev
        self._cum_w[k + 1] = self._cum_w[k] + half * (pw + w_flat)
        self._cum_eb[k + 1] = self._cum_eb[k] + half * (pe + eb)
        self._cum_pz[k + 1] = self._cum_pz[k] + half * (pp + pz)
        self._prev = (w_flat, eb, pz)
        self._count = k + 1

    def window(self, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Y, Ybar, Zint) for grid index k; exact zeros before t0 + delta_t."""
        t = k * self.step
        w = self.window_steps
        if k < w or t <= self.t0 + self.delta_t:
            dd = self.d * self.d
            return np.zeros((self.n, dd)), np.zeros(self.n), np.zeros(self.n)
        y = (self._cum_w[k] - self._cum_w[k - w]).reshape(self.n, self.d * self.d)
        ybar = self._a * (self._cum_eb[k] - self._cum_eb[k - w])
        zint = self._cum_pz[k] - self._cum_pz[k - w]
        return y, ybar, zint


@dataclass
class StackRecord:
    """One stored experience: capture time, window matrix, data vector."""

    t: float
    y: np.ndarray        # n x d^2
    b: np.ndarray        # n-vector: x(t) - x(t - delta_t) - Zint - Ybar


def integrated_identity_residual(record: StackRecord, s_vec: np.ndarray) -> np.ndarray:
    """b - Y @ s_vec; with the true vectorized matrix only the decaying
    initial-condition leakage remains."""
    return record.b - record.y @ np.asarray(s_vec, dtype=float)


class HistoryStack:
    """Bounded stack of experiences with a monotone excitation policy."""

    def __init__(self, capacity: int, omega: float, kappa: float, dim: int):
        if capacity < 1:
            raise ValueError("stack capacity must be at least 1")
        if omega <= 0.0:
            raise ValueError("richness threshold must be positive")
        if kappa <= 0.0:
            raise ValueError("replay gain must be positive")
        self.capacity = capacity
        self.omega = omega
        self.kappa = kappa
        self.dim = dim                      # d^2
        self.records: list[StackRecord] = []
        self.gram = np.zeros((dim, dim))    # sum of Y_i^T Y_i
        self.data_vec = np.zeros(dim)       # sum of Y_i^T b_i
        self.lambda_min = 0.0
        self.rich_since: float | None = None

    def _refresh(self) -> None:
        gram = np.zeros((self.dim, self.dim))
        data = np.zeros(self.dim)
        for r in self.records:
            gram += r.y.T @ r.y
            data += r.y.T @ r.b
        self.gram = gram
        self.data_vec = data
        self.lambda_min = float(np.linalg.eigvalsh(gram)[0]) if self.records else 0.0

    def try_record(self, record: StackRecord) -> bool:
        """Insert, or swap in if that raises lambda_min; else drop.

        Returns True when the stack changed.
        """
        if len(self.records) < self.capacity:
            self.records.append(record)
            self._refresh()
            return True
        cand = record.y.T @ record.y
        best_j = -1
        best_lam = self.lambda_min
        for j, old in enumerate(self.records):
            lam_j = float(np.linalg.eigvalsh(self.gram - old.y.T @ old.y + cand)[0])
            if lam_j > best_lam + 1e-15:
                best_lam = lam_j
                best_j = j
        if best_j < 0:
            return False
        self.records[best_j] = record
        self._refresh()
        return True

    def richness(self, t: float | None = None) -> tuple[float, bool]:
        """(lambda_min, rich).  Latches the first time the threshold is met."""
        rich = self.lambda_min > self.omega
        if rich and self.rich_since is None:
            self.rich_since = t if t is not None else 0.0
        return self.lambda_min, rich

    def replay_residual_sum(self, s_vec_hat: np.ndarray) -> np.ndarray:
        """sum_i Y_i^T (b_i - Y_i @ svec_hat), via the cached sums."""
        return self.data_vec - self.gram @ np.asarray(s_vec_hat, dtype=float)


def er_update(
    e_tilde: np.ndarray,
    eps_bar: np.ndarray,
    f_mat: np.ndarray,
    d_mat: np.ndarray,
    gamma: float | np.ndarray,
    stack: HistoryStack,
    s_vec_hat: np.ndarray,
) -> np.ndarray:
    """Experience-replay adaptive law.

    The gradient term of the plain observer plus kappa * Gamma times the
    summed stored residuals.  With an empty stack this reduces exactly to
    the plain gradient update; with a rich stack the extra term contracts
    the vectorized estimation error through sum(Y_i^T Y_i).
    """
    ds = baseline_update(e_tilde, eps_bar, f_mat, d_mat, gamma)
    if stack.records:
        ds = ds + gamma_apply(gamma, stack.kappa * stack.replay_residual_sum(s_vec_hat))
    return ds


@dataclass
class RateCertificate:
    """Certified exponential rate once the stack is rich.

    lambda1 = (2 / varpi1) * min(a, kappa * omega_observed) with
    varpi1 = max(1, max eig of Gamma^-1) and omega_observed the stack's
    current minimum eigenvalue.
    """

    lambda1: float
    varpi1: float
    varpi2: float
    omega_observed: float
    rich_since: float = field(default=0.0)


def rate_certificate(
    stack: HistoryStack,
    gamma: float | np.ndarray,
    a: float,
) -> RateCertificate:
    lam, rich = stack.richness()
    if not rich or stack.rich_since is None:
        raise NotRichError(
            f"history stack is not rich: lambda_min={lam:.3g} <= omega={stack.omega:.3g}"
        )
    inv_lo, inv_hi = gamma_inv_extrema(gamma, stack.dim)
    varpi1 = max(1.0, inv_hi)
    varpi2 = min(1.0, inv_lo)
    lambda1 = (2.0 / varpi1) * min(a, stack.kappa * lam)
    return RateCertificate(lambda1, varpi1, varpi2, lam, stack.rich_since)
