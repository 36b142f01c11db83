"""Run configuration files.

Flat INI-style text with sections [scenario], [filter], [observer],
[replay], [controller], [sim].  Every key is optional except the scenario
name; unknown sections or keys are hard errors so a typo in a gain name
cannot silently fall back to a default.

Vectors are whitespace separated ("1 0"), matrices use ';' between rows
("0 2; -2 0").  The observer gain accepts either a single positive number
or a full matrix.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .plant import (
    Scenario,
    builtin_scenario,
    Exosystem,
    make_custom_plant,
    parse_reference_terms,
)
from .sim import MODES, SimConfig

__all__ = ["ConfigError", "RunSetup", "parse_ini", "build_setup", "load_config", "SCHEMA"]


class ConfigError(ValueError):
    """Configuration problem, annotated with the offending field path."""


SCHEMA: dict[str, tuple[str, ...]] = {
    "scenario": ("name", "n", "m", "d", "basis", "theta", "g", "d_map", "s", "reference"),
    "filter": ("a",),
    "observer": ("gamma", "s0"),
    "replay": ("kappa", "delta_t", "omega", "stack_capacity", "record_every", "t0"),
    "controller": ("k0", "k1", "hslash", "boundary_layer"),
    "sim": ("t_end", "step", "mode", "seed", "x0", "eps0", "eps0_scale"),
}

_CUSTOM_REQUIRED = ("n", "m", "d", "basis", "theta", "g", "d_map", "s", "reference")


@dataclass
class RunSetup:
    """Parsed and validated run description."""

    config: SimConfig
    scenario: Scenario
    raw: dict[str, dict[str, str]]


def parse_ini(path: str | Path) -> dict[str, dict[str, str]]:
    """Read an INI file into {section: {key: value}}, schema checked."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep keys case sensitive
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with path.open() as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raw: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{section}: unknown section (expected one of {sorted(SCHEMA)})")
        allowed = SCHEMA[section]
        raw[section] = {}
        for key, value in parser.items(section):
            if key not in allowed:
                raise ConfigError(f"{section}.{key}: unknown key (expected one of {allowed})")
            raw[section][key] = value
    return raw


def _get(raw: dict, section: str, key: str) -> str | None:
    return raw.get(section, {}).get(key)


def _parse_float(raw: dict, section: str, key: str) -> float | None:
    text = _get(raw, section, key)
    if text is None:
        return None
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected a number, got {text!r}") from None


def _parse_int(raw: dict, section: str, key: str) -> int | None:
    text = _get(raw, section, key)
    if text is None:
        return None
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected an integer, got {text!r}") from None


def _parse_vector(raw: dict, section: str, key: str) -> np.ndarray | None:
    text = _get(raw, section, key)
    if text is None:
        return None
    try:
        return np.array([float(tok) for tok in text.split()], dtype=float)
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected a space-separated vector, got {text!r}") from None


def _parse_matrix(raw: dict, section: str, key: str) -> np.ndarray | None:
    text = _get(raw, section, key)
    if text is None:
        return None
    try:
        rows = [[float(tok) for tok in row.split()] for row in text.split(";")]
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected rows of numbers separated by ';'") from None
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ConfigError(f"{section}.{key}: rows have inconsistent lengths")
    return np.array(rows, dtype=float)


def _parse_gamma(raw: dict) -> float | np.ndarray | None:
    text = _get(raw, "observer", "gamma")
    if text is None:
        return None
    if ";" not in text and len(text.split()) == 1:
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"observer.gamma: expected a number or matrix, got {text!r}") from None
        if value <= 0.0:
            raise ConfigError("observer.gamma: must be positive")
        return value
    return _parse_matrix(raw, "observer", "gamma")


def _build_custom_scenario(raw: dict) -> Scenario:
    sc = raw.get("scenario", {})
    missing = [k for k in _CUSTOM_REQUIRED if k not in sc]
    if missing:
        raise ConfigError(
            "scenario: custom scenarios require keys " + ", ".join(f"scenario.{k}" for k in missing)
        )
    n = _parse_int(raw, "scenario", "n")
    m = _parse_int(raw, "scenario", "m")
    d = _parse_int(raw, "scenario", "d")
    if n is None or m is None or d is None or min(n, m, d) < 1:
        raise ConfigError("scenario.n/m/d: must be positive integers")
    theta = _parse_matrix(raw, "scenario", "theta")
    g = _parse_matrix(raw, "scenario", "g")
    d_map = _parse_matrix(raw, "scenario", "d_map")
    s = _parse_matrix(raw, "scenario", "s")
    if s is None or s.shape != (d, d):
        raise ConfigError(f"scenario.s: expected a {d}x{d} matrix")
    try:
        plant = make_custom_plant(n, m, d, sc["basis"], theta, g, d_map)
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc
    components = [c for c in sc["reference"].split(",")]
    if len(components) != n:
        raise ConfigError(f"scenario.reference: expected {n} comma-separated components")
    try:
        ref = parse_reference_terms(components)
    except ValueError as exc:
        raise ConfigError(f"scenario.reference: {exc}") from exc
    exo = Exosystem(s, np.zeros(d))
    return Scenario("custom", plant, exo, ref, defaults={"a": 2.0, "x0": np.zeros(n)})


def build_setup(raw: dict[str, dict[str, str]]) -> RunSetup:
    """Turn a parsed INI mapping into a SimConfig plus scenario."""
    name = _get(raw, "scenario", "name")
    if name is None:
        raise ConfigError("scenario.name: required (example1, example2 or custom)")
    if name == "custom":
        scenario = _build_custom_scenario(raw)
    else:
        extra = [k for k in raw.get("scenario", {}) if k != "name"]
        if extra:
            raise ConfigError(
                f"scenario.{extra[0]}: only valid for scenario.name = custom"
            )
        try:
            scenario = builtin_scenario(name)
        except ValueError as exc:
            raise ConfigError(f"scenario.name: {exc}") from exc

    mode = _get(raw, "sim", "mode") or "replay"
    if mode not in MODES:
        raise ConfigError(f"sim.mode: unknown mode {mode!r}; expected one of {MODES}")

    kwargs: dict = dict(scenario=scenario, mode=mode)
    float_keys = (
        ("filter", "a", "a"),
        ("replay", "kappa", "kappa"),
        ("replay", "delta_t", "delta_t"),
        ("replay", "omega", "omega"),
        ("replay", "record_every", "record_every"),
        ("replay", "t0", "t0"),
        ("controller", "k0", "k0"),
        ("controller", "k1", "k1"),
        ("controller", "hslash", "hslash"),
        ("controller", "boundary_layer", "boundary_layer"),
        ("sim", "t_end", "t_end"),
        ("sim", "step", "step"),
        ("sim", "eps0_scale", "eps0_scale"),
    )
    for section, key, attr in float_keys:
        value = _parse_float(raw, section, key)
        if value is not None:
            kwargs[attr] = value
    gamma = _parse_gamma(raw)
    if gamma is not None:
        kwargs["gamma"] = gamma
    s0 = _parse_matrix(raw, "observer", "s0")
    if s0 is not None:
        kwargs["s_hat0"] = s0
    capacity = _parse_int(raw, "replay", "stack_capacity")
    if capacity is not None:
        kwargs["stack_capacity"] = capacity
    seed = _parse_int(raw, "sim", "seed")
    if seed is not None:
        kwargs["seed"] = seed
    for key, attr in (("x0", "x0"), ("eps0", "eps0")):
        vec = _parse_vector(raw, "sim", key)
        if vec is not None:
            kwargs[attr] = vec

    try:
        cfg = SimConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunSetup(config=cfg, scenario=scenario, raw=raw)


def load_config(path: str | Path) -> RunSetup:
    return build_setup(parse_ini(path))
