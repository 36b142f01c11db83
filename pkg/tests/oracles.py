"""Independent reference computations used as test oracles.

Everything here deliberately avoids the code paths under test: the
determinant is expanded by cofactors in pure Python, eigenvalue extrema
come from sign changes of the characteristic polynomial under bisection,
the filtered disturbance is reconstructed from its convolution solution
with Simpson quadrature on a refined grid, and the planar exosystem is
evaluated in closed rotation form.
"""

from __future__ import annotations

import math

import numpy as np


def brute_kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product by the entry-index definition."""
    m, n = a.shape
    p, q = b.shape
    out = np.zeros((m * p, n * q))
    for i in range(m):
        for j in range(n):
            for k in range(p):
                for l in range(q):
                    out[i * p + k, j * q + l] = a[i, j] * b[k, l]
    return out


def det_cofactor(m: list[list[float]]) -> float:
    """Determinant via Laplace expansion (pure Python, small matrices)."""
    size = len(m)
    if size == 1:
        return m[0][0]
    if size == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    total = 0.0
    for j in range(size):
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        total += ((-1.0) ** j) * m[0][0 + j] * det_cofactor(minor)
    return total


def _chol_succeeds(m: list[list[float]]) -> bool:
    """Pure-Python Cholesky attempt: True iff the matrix is positive definite."""
    size = len(m)
    lower = [[0.0] * size for _ in range(size)]
    for i in range(size):
        for j in range(i + 1):
            acc = m[i][j]
            for k in range(j):
                acc -= lower[i][k] * lower[j][k]
            if i == j:
                if acc <= 0.0 or math.isnan(acc):
                    return False
                lower[i][j] = math.sqrt(acc)
            else:
                lower[i][j] = acc / lower[j][j]
    return True


def bisect_min_eig(g: np.ndarray, tol: float = 1e-13) -> float:
    """Smallest eigenvalue of a symmetric matrix by bisection.

    The predicate "G - lam*I is positive definite" (checked by a
    hand-rolled Cholesky) is monotone in lam and flips exactly at the
    smallest root of the characteristic polynomial, multiplicity included.
    """
    g = np.asarray(g, dtype=float)
    radius = float(np.abs(g).sum(axis=1).max()) + 1.0   # Gershgorin bound
    lo, hi = -radius, radius

    def pd(lam: float) -> bool:
        shifted = (g - lam * np.eye(g.shape[0])).tolist()
        return _chol_succeeds(shifted)

    assert pd(lo) and not pd(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if pd(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def bisect_max_eig(g: np.ndarray, tol: float = 1e-12) -> float:
    """Largest eigenvalue via the same oracle on the negated matrix."""
    return -bisect_min_eig(-np.asarray(g, dtype=float), tol)


def rotation_exo_state(s: np.ndarray, eps0: np.ndarray, t: np.ndarray | float) -> np.ndarray:
    """Closed-form state of a planar rotation generator [[0, b], [-b, 0]]."""
    s = np.asarray(s, dtype=float)
    assert s.shape == (2, 2)
    assert abs(s[0, 0]) < 1e-14 and abs(s[1, 1]) < 1e-14
    assert abs(s[0, 1] + s[1, 0]) < 1e-12
    b = s[0, 1]
    t = np.asarray(t, dtype=float)
    c, sn = np.cos(b * t), np.sin(b * t)
    e1, e2 = float(eps0[0]), float(eps0[1])
    return np.stack([c * e1 + sn * e2, -sn * e1 + c * e2], axis=-1)


def filtered_disturbance_oracle(
    t_grid: np.ndarray,
    a: float,
    d_mat: np.ndarray,
    s_mat: np.ndarray,
    eps0: np.ndarray,
    refine: int = 10,
) -> np.ndarray:
    """Filtered output disturbance from its convolution solution.

    eps_bar(t) = integral_0^t exp(-a (t - tau)) D eps_T(tau) dtau, advanced
    grid point to grid point with the exact decay factor and composite
    Simpson quadrature on a refine-times-finer grid, with the exact
    closed-form disturbance as integrand.  refine must be even.
    """
    if refine % 2 != 0:
        raise ValueError("refine must be even for Simpson quadrature")
    t_grid = np.asarray(t_grid, dtype=float)
    h = t_grid[1] - t_grid[0]
    fine = h / refine
    offsets = np.arange(refine + 1) * fine
    weights = np.ones(refine + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    weights *= fine / 3.0
    decay = np.exp(-a * (h - offsets)) * weights          # (refine+1,)

    n_steps = len(t_grid) - 1
    # disturbance at every fine node of every step, in closed form
    taus = t_grid[:-1, None] + offsets[None, :]           # (n_steps, refine+1)
    eps_t = rotation_exo_state(s_mat, eps0, taus)          # (n_steps, refine+1, d)
    forced = eps_t @ d_mat.T                               # (n_steps, refine+1, n)
    increments = np.einsum("r,srn->sn", decay, forced)

    out = np.zeros((len(t_grid), d_mat.shape[0]))
    fade = math.exp(-a * h)
    acc = out[0].copy()
    for k in range(n_steps):
        acc = fade * acc + increments[k]
        out[k + 1] = acc
    return out


def simpson_window(values: np.ndarray, fine: float) -> np.ndarray:
    """Composite Simpson quadrature over an even-count sample window.

    values has shape (m + 1, ...) with m even and spacing fine.
    """
    m = values.shape[0] - 1
    if m % 2 != 0:
        raise ValueError("Simpson needs an even number of intervals")
    weights = np.ones(m + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    weights *= fine / 3.0
    return np.tensordot(weights, values, axes=(0, 0))
