"""Plant and disturbance models in weight/basis regressor form.

A plant is written as xdot = phi_star @ z(x, u) + D @ eps_T with
z(x, u) = [xi(x); u], so the drift is f(x) = theta_star @ xi(x) and the
input map g is a constant full-column-rank matrix.  The disturbance
eps_T is the state of an autonomous linear exosystem epsdot_T = S eps_T
whose matrix is unknown to the observer.

Two benchmark scenarios ship built in: a planar nonlinear system with an
identity input map ("example1") and a two-mass-spring system ("example2").
Custom scenarios are assembled from a small registry of basis atoms
(monomials up to degree three, sine and cosine of a single state).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import pinv, spectral_norm

__all__ = [
    "RegressorPlant",
    "Exosystem",
    "Reference",
    "Scenario",
    "builtin_scenario",
    "make_custom_plant",
    "parse_basis_atoms",
    "parse_reference_terms",
    "exosystem_spectrum_class",
    "BUILTIN_SCENARIOS",
]

_EXO_IMAG_AXIS_TOL = 1e-8


@dataclass
class RegressorPlant:
    """Controlled plant in regressor form."""

    n: int
    m: int
    d: int
    theta_star: np.ndarray            # n x p_xi drift weights
    g_mat: np.ndarray                 # n x m constant input map
    dist_map: np.ndarray              # n x d disturbance channel D
    xi: Callable[[np.ndarray], np.ndarray]   # drift basis, p_xi-vector
    p_xi: int
    xi_labels: tuple[str, ...] = ()
    phi_star: np.ndarray = field(init=False)
    dist_pinv: np.ndarray = field(init=False)  # F = D^+
    g_pinv: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.theta_star = np.asarray(self.theta_star, dtype=float)
        self.g_mat = np.asarray(self.g_mat, dtype=float)
        self.dist_map = np.asarray(self.dist_map, dtype=float)
        if self.theta_star.shape != (self.n, self.p_xi):
            raise ValueError("theta_star shape does not match (n, p_xi)")
        if self.g_mat.shape != (self.n, self.m):
            raise ValueError("input map shape does not match (n, m)")
        if self.dist_map.shape != (self.n, self.d):
            raise ValueError("disturbance map shape does not match (n, d)")
        self.phi_star = np.hstack([self.theta_star, self.g_mat])
        try:
            self.dist_pinv = pinv(self.dist_map)
        except Exception as exc:
            raise type(exc)(
                "disturbance map must have full column rank so its left "
                f"pseudoinverse exists: {exc}"
            ) from exc
        try:
            self.g_pinv = pinv(self.g_mat)
        except Exception as exc:
            raise type(exc)(
                f"input map must have full column rank: {exc}"
            ) from exc

    @property
    def z_dim(self) -> int:
        return self.p_xi + self.m

    def regressor(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """z(x, u) = [xi(x); u], chosen so phi_star @ z = f(x) + g u."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if x.shape != (self.n,) or u.shape != (self.m,):
            raise ValueError("state or input dimension mismatch")
        return np.concatenate([self.xi(x), u])

    def f(self, x: np.ndarray) -> np.ndarray:
        return self.theta_star @ self.xi(np.asarray(x, dtype=float))

    def g(self, x: np.ndarray) -> np.ndarray:  # noqa: ARG002 - constant map
        return self.g_mat

    def rhs(self, x: np.ndarray, u: np.ndarray, eps_T: np.ndarray) -> np.ndarray:
        """xdot = phi_star @ z(x, u) + D @ eps_T."""
        out = self.phi_star @ self.regressor(x, u) + self.dist_map @ np.asarray(eps_T, dtype=float)
        if not np.all(np.isfinite(out)):
            raise ArithmeticError("plant derivative is non-finite")
        return out


@dataclass
class Exosystem:
    """Autonomous disturbance generator epsdot_T = S eps_T."""

    s_matrix: np.ndarray
    initial: np.ndarray

    def __post_init__(self) -> None:
        self.s_matrix = np.asarray(self.s_matrix, dtype=float)
        self.initial = np.asarray(self.initial, dtype=float)
        d = self.initial.shape[0]
        if self.s_matrix.shape != (d, d):
            raise ValueError("exosystem matrix must be square and match the state")

    @property
    def d(self) -> int:
        return self.initial.shape[0]

    def rhs(self, eps_T: np.ndarray) -> np.ndarray:
        return self.s_matrix @ np.asarray(eps_T, dtype=float)


def exosystem_spectrum_class(s_matrix: np.ndarray, tol: float = _EXO_IMAG_AXIS_TOL) -> str:
    """Classify the exosystem spectrum: 'marginal', 'stable' or 'unstable'.

    Marginal (all eigenvalues on the imaginary axis) is the intended
    operating regime.  A stable matrix only produces a decaying transient
    disturbance, so it is reported as a warning rather than rejected.
    """
    re_parts = np.real(np.linalg.eigvals(np.asarray(s_matrix, dtype=float)))
    if np.all(np.abs(re_parts) <= tol):
        return "marginal"
    if np.all(re_parts <= tol):
        return "stable"
    return "unstable"


@dataclass
class Reference:
    """Reference trajectory with an analytic derivative."""

    x_d: Callable[[float], np.ndarray]
    xd_dot: Callable[[float], np.ndarray]
    label: str = ""


@dataclass
class Scenario:
    """Bundle of plant, exosystem, reference and per-scenario defaults."""

    name: str
    plant: RegressorPlant
    exo: Exosystem
    reference: Reference
    defaults: dict = field(default_factory=dict)

    @property
    def s_true(self) -> np.ndarray:
        return self.exo.s_matrix


# ---------------------------------------------------------------------------
# Basis atoms for custom scenarios
# ---------------------------------------------------------------------------

_MONO_FACTOR = re.compile(r"^x(\d+)(?:\^(\d))?$")
_TRIG_FACTOR = re.compile(r"^(sin|cos)\(x(\d+)\)$")


def _parse_atom(token: str, n: int) -> tuple[Callable[[np.ndarray], float], str]:
    """One basis atom: product of monomial factors and/or sin/cos of a state.

    Total monomial degree is capped at three; anything richer should be a
    different atom.
    """
    factors: list[Callable[[np.ndarray], float]] = []
    degree = 0
    for part in token.split("*"):
        part = part.strip()
        m = _MONO_FACTOR.match(part)
        if m:
            idx = int(m.group(1)) - 1
            power = int(m.group(2) or 1)
            if not 0 <= idx < n:
                raise ValueError(f"basis atom {token!r}: state x{idx + 1} out of range")
            if power < 1:
                raise ValueError(f"basis atom {token!r}: bad exponent")
            degree += power
            # numpy scalar power overflows to inf instead of raising, so a
            # diverging state surfaces as a blow-up diagnostic downstream
            factors.append(lambda x, i=idx, p=power: np.float64(x[i]) ** p)
            continue
        m = _TRIG_FACTOR.match(part)
        if m:
            fn = np.sin if m.group(1) == "sin" else np.cos
            idx = int(m.group(2)) - 1
            if not 0 <= idx < n:
                raise ValueError(f"basis atom {token!r}: state x{idx + 1} out of range")
            factors.append(lambda x, f=fn, i=idx: float(f(x[i])))
            continue
        raise ValueError(
            f"unknown basis atom {part!r}; expected xN, xN^k (k<=3), sin(xN) or cos(xN)"
        )
    if degree > 3:
        raise ValueError(f"basis atom {token!r}: monomial degree {degree} exceeds 3")
    if not factors:
        raise ValueError("empty basis atom")

    def atom(x: np.ndarray) -> float:
        v = 1.0
        for f in factors:
            v *= f(x)
        return v

    return atom, token


def parse_basis_atoms(spec: str, n: int) -> tuple[Callable[[np.ndarray], np.ndarray], int, tuple[str, ...]]:
    """Build a vector basis evaluator from a whitespace-separated atom list."""
    tokens = spec.split()
    if not tokens:
        raise ValueError("basis specification is empty")
    atoms = [_parse_atom(tok, n) for tok in tokens]
    fns = [a[0] for a in atoms]
    labels = tuple(a[1] for a in atoms)

    def xi(x: np.ndarray) -> np.ndarray:
        return np.array([f(x) for f in fns], dtype=float)

    return xi, len(fns), labels


_REF_TERM = re.compile(
    r"^(?P<amp>[-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)?\s*\*?\s*"
    r"(?P<fn>sin|cos)\(\s*(?P<freq>\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)?\s*\*?\s*t\s*\)$"
)


def _parse_ref_component(text: str) -> tuple[Callable[[float], float], Callable[[float], float]]:
    """One reference component: 'A*sin(W*t)', 'A*cos(W*t)' or a constant."""
    text = text.strip()
    m = _REF_TERM.match(text)
    if m:
        amp = float(m.group("amp")) if m.group("amp") else 1.0
        freq = float(m.group("freq")) if m.group("freq") else 1.0
        if m.group("fn") == "sin":
            return (
                lambda t, a=amp, w=freq: a * math.sin(w * t),
                lambda t, a=amp, w=freq: a * w * math.cos(w * t),
            )
        return (
            lambda t, a=amp, w=freq: a * math.cos(w * t),
            lambda t, a=amp, w=freq: -a * w * math.sin(w * t),
        )
    try:
        c = float(text)
    except ValueError:
        raise ValueError(
            f"bad reference component {text!r}; expected A*sin(W*t), A*cos(W*t) or a constant"
        ) from None
    return (lambda t, v=c: v, lambda t: 0.0)


def parse_reference_terms(components: list[str]) -> Reference:
    pairs = [_parse_ref_component(c) for c in components]

    def x_d(t: float) -> np.ndarray:
        return np.array([p[0](t) for p in pairs], dtype=float)

    def xd_dot(t: float) -> np.ndarray:
        return np.array([p[1](t) for p in pairs], dtype=float)

    return Reference(x_d, xd_dot, label="; ".join(components))


def make_custom_plant(
    n: int,
    m: int,
    d: int,
    basis_spec: str,
    theta_star: np.ndarray,
    g_mat: np.ndarray,
    dist_map: np.ndarray,
) -> RegressorPlant:
    xi, p_xi, labels = parse_basis_atoms(basis_spec, n)
    return RegressorPlant(
        n=n, m=m, d=d,
        theta_star=theta_star, g_mat=g_mat, dist_map=dist_map,
        xi=xi, p_xi=p_xi, xi_labels=labels,
    )


# ---------------------------------------------------------------------------
# Built-in scenarios
# ---------------------------------------------------------------------------

def _example1() -> Scenario:
    def xi(x: np.ndarray) -> np.ndarray:
        r2 = x[0] * x[0] + x[1] * x[1]
        return np.array([x[0], x[1], x[0] * r2, x[1] * r2])

    plant = RegressorPlant(
        n=2, m=2, d=2,
        theta_star=np.array([[1.0, 1.0, -1.0, 0.0],
                             [-1.0, 1.0, 0.0, -1.0]]),
        g_mat=np.eye(2),
        dist_map=np.eye(2),
        xi=xi, p_xi=4,
        xi_labels=("x1", "x2", "x1*r2", "x2*r2"),
    )
    beta = 2.0
    exo = Exosystem(np.array([[0.0, beta], [-beta, 0.0]]), np.array([1.0, 0.0]))
    ref = Reference(
        lambda t: np.array([2.0 * math.sin(2.0 * t), 4.0 * math.cos(3.0 * t)]),
        lambda t: np.array([4.0 * math.cos(2.0 * t), -12.0 * math.sin(3.0 * t)]),
        label="[2*sin(2t), 4*cos(3t)]",
    )
    defaults = {"a": 2.0, "x0": np.zeros(2)}
    return Scenario("example1", plant, exo, ref, defaults)


def _example2() -> Scenario:
    m1 = m2 = 1.0
    k1 = k2 = 1.0
    a_mat = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [-(k1 + k2) / m1, 0.0, k2 / m1, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [-k2 / m2, 0.0, -k2 / m2, 0.0],
    ])
    b_mat = np.array([[0.0, 1.0 / m1, 0.0, 0.0],
                      [0.0, 0.0, 0.0, 1.0 / m2]]).T
    d_mat = np.array([[0.0, 1.0, 0.0, 1.0],
                      [-1.0, 0.0, -1.0, 0.0]]).T

    plant = RegressorPlant(
        n=4, m=2, d=2,
        theta_star=a_mat,
        g_mat=b_mat,
        dist_map=d_mat,
        xi=lambda x: np.asarray(x, dtype=float).copy(), p_xi=4,
        xi_labels=("x1", "x2", "x3", "x4"),
    )
    beta = 1.5
    exo = Exosystem(np.array([[0.0, -beta], [beta, 0.0]]), np.array([1.0, 0.0]))
    ref = Reference(
        lambda t: np.array([math.sin(t), math.cos(t), math.cos(t), -math.sin(t)]),
        lambda t: np.array([math.cos(t), -math.sin(t), -math.sin(t), -math.cos(t)]),
        label="[sin(t), cos(t), cos(t), -sin(t)]",
    )
    defaults = {"a": 3.0, "x0": np.zeros(4)}
    return Scenario("example2", plant, exo, ref, defaults)


BUILTIN_SCENARIOS = {"example1": _example1, "example2": _example2}


def builtin_scenario(name: str) -> Scenario:
    """Construct one of the bundled benchmark scenarios."""
    try:
        factory = BUILTIN_SCENARIOS[name]
    except KeyError:
        raise ValueError(
            f"unknown scenario {name!r}; available: {sorted(BUILTIN_SCENARIOS)}"
        ) from None
    return factory()


def validate_scenario(scenario: Scenario, k1_gain: float | None = None) -> tuple[list[str], list[str]]:
    """Run the model admissibility checks.

    Returns (hard_failures, warnings).  Hard failures: rank-deficient
    disturbance map (caught at construction normally), drift not vanishing
    at the origin, inconsistent dimensions, inadmissible switching gain.
    The exosystem spectrum placement is a warning only.
    """
    failures: list[str] = []
    warnings: list[str] = []
    p = scenario.plant

    f0 = p.f(np.zeros(p.n))
    if np.linalg.norm(f0) > 1e-9:
        failures.append(f"drift does not vanish at the origin: |f(0)| = {np.linalg.norm(f0):.3g}")

    if scenario.exo.d != p.d:
        failures.append("exosystem dimension does not match the disturbance channel")

    resid = np.abs(p.dist_pinv @ p.dist_map - np.eye(p.d)).max()
    if resid > 1e-10:
        failures.append(f"left inverse of the disturbance map is inaccurate: residual {resid:.3g}")

    xd0 = scenario.reference.x_d(0.0)
    if xd0.shape != (p.n,):
        failures.append("reference dimension does not match the state")

    spectrum = exosystem_spectrum_class(scenario.exo.s_matrix)
    if spectrum == "stable":
        warnings.append("exosystem is strictly stable: disturbance decays and can be ignored")
    elif spectrum == "unstable":
        warnings.append("exosystem has eigenvalues in the right half plane: disturbance grows unbounded")

    if k1_gain is not None:
        k1_floor = spectral_norm(p.dist_pinv) * spectral_norm(p.dist_map)
        if k1_gain < k1_floor - 1e-12:
            failures.append(
                f"switching gain k1={k1_gain:.6g} violates k1 >= ||F||*||D|| = {k1_floor:.6g}"
            )
    return failures, warnings
