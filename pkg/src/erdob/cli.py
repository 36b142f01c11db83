"""Command-line front end.

Subcommands:

    erdob run <config> --out <dir>
    erdob compare <config_a> <config_b> --out <dir>
    erdob validate <config>
    erdob sweep <config> --param section.key=v1,v2,... --out <dir>

The output directory may also come from the ERDOB_OUT_DIR environment
variable.  A run writes trace.csv (17 significant digits per value),
metrics.json, metrics.txt, rendered figures with their data files, and a
manifest echoing the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMA, ConfigError, RunSetup, build_setup, load_config, parse_ini
from .linalg import RankDeficiencyError, spectral_norm
from .plant import exosystem_spectrum_class, validate_scenario
from .sim import (
    Metrics,
    ScenarioMismatchError,
    SimTrace,
    SimulationBlowup,
    compare,
    config_echo,
    metrics,
    run,
)

__all__ = ["main", "write_trace_csv", "read_trace_csv", "trace_csv_header"]

ENV_OUT_DIR = "ERDOB_OUT_DIR"


# ---------------------------------------------------------------------------
# Trace serialization
# ---------------------------------------------------------------------------

def trace_csv_header(n: int, m: int, d: int) -> list[str]:
    cols = ["t"]
    cols += [f"x{i + 1}" for i in range(n)]
    cols += [f"xd{i + 1}" for i in range(n)]
    cols += [f"ex{i + 1}" for i in range(n)]
    cols += [f"u{j + 1}" for j in range(m)]
    cols += [f"epsT{k + 1}" for k in range(d)]
    cols += [f"epsThat{k + 1}" for k in range(d)]
    cols += [f"S{i + 1}{j + 1}hat" for i in range(d) for j in range(d)]
    cols += ["Stilde_fro", "k"]
    cols += [f"sigma{i + 1}" for i in range(n)]
    cols += ["lambda_min", "phase"]
    return cols


def write_trace_csv(trace: SimTrace, path: str | Path) -> Path:
    path = Path(path)
    n = trace.x.shape[1]
    m = trace.u.shape[1]
    d = trace.eps_T.shape[1]
    # estimate entries are stored column-stacked; emit them in row-major order
    perm = [j * d + i for i in range(d) for j in range(d)]
    header = trace_csv_header(n, m, d)
    blocks = [
        trace.t[:, None], trace.x, trace.x_d, trace.e_x, trace.u,
        trace.eps_T, trace.eps_T_hat, trace.s_hat_vec[:, perm],
        trace.s_tilde_fro[:, None], trace.k_gain[:, None],
        trace.sigma, trace.lam_min[:, None],
    ]
    data = np.hstack(blocks)
    phase = trace.phase
    with path.open("w") as fh:
        fh.write(",".join(header) + "\n")
        for row, ph in zip(data, phase):
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write(f",{int(ph)}\n")
    return path


def read_trace_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Parse a trace file back into (header, value matrix)."""
    with Path(path).open() as fh:
        header = fh.readline().strip().split(",")
        data = [[float(tok) for tok in line.strip().split(",")] for line in fh if line.strip()]
    return header, np.array(data, dtype=float)


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return "absent"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_metrics(met: Metrics, out: Path) -> dict:
    payload = met.to_dict()
    with (out / "metrics.json").open("w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with (out / "metrics.txt").open("w") as fh:
        for key, value in payload.items():
            fh.write(f"{key} = {_fmt(value)}\n")
    return payload


def _write_manifest(out: Path, payload: dict) -> None:
    tmp = out / "manifest.json.tmp"
    with tmp.open("w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    os.replace(tmp, out / "manifest.json")


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get(ENV_OUT_DIR)
    if env:
        return Path(env)
    raise ConfigError(f"no output directory: pass --out or set {ENV_OUT_DIR}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    setup = load_config(args.config)
    echo = config_echo(setup.config)       # resolves and validates before any output
    out = _out_dir(args)
    started = time.perf_counter()
    trace = run(setup.config)
    duration = time.perf_counter() - started

    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out / "trace.csv")
    met = metrics(trace)
    payload = _write_metrics(met, out)
    outputs = ["trace.csv", "metrics.json", "metrics.txt"]
    if not args.no_figures:
        from .plots import save_run_figures

        figs = save_run_figures(trace, out / "figures")
        outputs += [str(p.relative_to(out)) for p in figs]
    _write_manifest(out, {
        "command": "run",
        "code_version": __version__,
        "config": echo,
        "wall_clock_seconds": duration,
        "metrics": payload,
        "outputs": outputs,
    })
    print(f"run complete: scenario={echo['scenario']} mode={echo['mode']} "
          f"t_end={echo['t_end']} -> {out}")
    for key, value in payload.items():
        print(f"  {key} = {_fmt(value)}")
    return 0


def cmd_compare(args) -> int:
    setup_a = load_config(args.config_a)
    setup_b = load_config(args.config_b)
    echo_a = config_echo(setup_a.config)
    echo_b = config_echo(setup_b.config)
    out = _out_dir(args)
    started = time.perf_counter()
    report, trace_a, trace_b = compare(setup_a.config, setup_b.config)
    duration = time.perf_counter() - started

    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace_a, out / "trace_a.csv")
    write_trace_csv(trace_b, out / "trace_b.csv")

    rows = report.rows()
    with (out / "comparison.csv").open("w") as fh:
        fh.write("metric,a,b,delta\n")
        for key, va, vb, delta in rows:
            fh.write(f"{key},{_fmt(va)},{_fmt(vb)},{_fmt(delta)}\n")
    with (out / "comparison.txt").open("w") as fh:
        fh.write(f"scenario: {report.scenario_name}\n")
        fh.write(f"a: {args.config_a} (mode={report.label_a})\n")
        fh.write(f"b: {args.config_b} (mode={report.label_b})\n\n")
        width = max(len(k) for k, *_ in rows) + 2
        fh.write(f"{'metric'.ljust(width)}{'a':>24}{'b':>24}{'delta (b-a)':>24}\n")
        for key, va, vb, delta in rows:
            fh.write(f"{key.ljust(width)}{_fmt(va):>24}{_fmt(vb):>24}{_fmt(delta):>24}\n")
        if report.trace_deltas:
            fh.write("\nper-series max |a - b|:\n")
            for name, value in report.trace_deltas.items():
                fh.write(f"  {name} = {value:.17g}\n")
    outputs = ["trace_a.csv", "trace_b.csv", "comparison.csv", "comparison.txt"]
    if not args.no_figures:
        from .plots import save_compare_figures

        figs = save_compare_figures(trace_a, trace_b, report.label_a, report.label_b, out / "figures")
        outputs += [str(p.relative_to(out)) for p in figs]
    _write_manifest(out, {
        "command": "compare",
        "code_version": __version__,
        "config_a": echo_a,
        "config_b": echo_b,
        "wall_clock_seconds": duration,
        "metrics_a": report.metrics_a.to_dict(),
        "metrics_b": report.metrics_b.to_dict(),
        "trace_deltas": report.trace_deltas,
        "outputs": outputs,
    })
    print(f"comparison written to {out}")
    for key, va, vb, delta in rows:
        print(f"  {key}: a={_fmt(va)} b={_fmt(vb)} delta={_fmt(delta)}")
    return 0


def cmd_validate(args) -> int:
    lines: list[tuple[str, str]] = []
    try:
        setup = load_config(args.config)
    except ConfigError as exc:
        print(f"[fail] {exc}")
        return 1
    scenario = setup.scenario
    plant = scenario.plant
    try:
        k1 = config_echo(setup.config)["k1"]
        lines.append(("ok", f"gain admissibility: k1={k1:.6g} >= ||F||*||D|| = "
                      f"{spectral_norm(plant.dist_pinv) * spectral_norm(plant.dist_map):.6g}"))
        k1_val: float | None = k1
    except ValueError as exc:
        lines.append(("fail", str(exc)))
        k1_val = None

    resid = float(np.abs(plant.dist_pinv @ plant.dist_map - np.eye(plant.d)).max())
    lines.append(("ok", f"disturbance map rank: left inverse residual |F D - I| = {resid:.3g}"))
    lines.append(("ok", f"dimensions: n={plant.n} m={plant.m} d={plant.d} "
                  f"regressor length {plant.z_dim}"))

    failures, warnings = validate_scenario(scenario, k1_gain=k1_val)
    spectrum = exosystem_spectrum_class(scenario.exo.s_matrix)
    lines.append(("ok" if spectrum == "marginal" else "warn",
                  f"exosystem spectrum: {spectrum}"))
    for w in warnings:
        if "exosystem" not in w:
            lines.append(("warn", w))
    for f in failures:
        lines.append(("fail", f))

    failed = False
    for level, text in lines:
        print(f"[{level}] {text}")
        failed = failed or level == "fail"
    return 1 if failed else 0


def cmd_sweep(args) -> int:
    raw = parse_ini(args.config)
    try:
        key, _, values_text = args.param.partition("=")
        section, _, option = key.partition(".")
        if section not in SCHEMA or option not in SCHEMA[section]:
            raise ConfigError(f"sweep parameter {key!r} is not a known config key")
        values = [v.strip() for v in values_text.split(",") if v.strip()]
        if not values:
            raise ConfigError("sweep parameter needs a comma-separated value list")
    except ConfigError:
        raise
    out = _out_dir(args)

    setups: list[tuple[str, RunSetup]] = []
    for value in values:
        variant = {sec: dict(opts) for sec, opts in raw.items()}
        variant.setdefault(section, {})[option] = value
        setups.append((value, build_setup(variant)))
    for _, setup in setups:
        config_echo(setup.config)

    out.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    started = time.perf_counter()
    for value, setup in setups:
        sub = out / f"{section}.{option}={value}"
        sub.mkdir(parents=True, exist_ok=True)
        trace = run(setup.config)
        write_trace_csv(trace, sub / "trace.csv")
        met = metrics(trace)
        payload = _write_metrics(met, sub)
        if not args.no_figures:
            from .plots import save_run_figures

            save_run_figures(trace, sub / "figures")
        summary_rows.append((value, payload))
        print(f"  {section}.{option} = {value}: done")
    duration = time.perf_counter() - started

    keys = list(summary_rows[0][1].keys())
    with (out / "sweep_summary.csv").open("w") as fh:
        fh.write(f"{section}.{option}," + ",".join(keys) + "\n")
        for value, payload in summary_rows:
            fh.write(value + "," + ",".join(_fmt(payload[k]) for k in keys) + "\n")
    _write_manifest(out, {
        "command": "sweep",
        "code_version": __version__,
        "parameter": f"{section}.{option}",
        "values": values,
        "wall_clock_seconds": duration,
        "outputs": ["sweep_summary.csv"],
    })
    print(f"sweep written to {out}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="erdob",
        description="Disturbance-observer simulation with experience replay "
                    "and finite-time sliding-mode rejection",
    )
    parser.add_argument("--version", action="version", version=f"erdob {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write its trace")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--no-figures", action="store_true")
    p_run.set_defaults(fn=cmd_run)

    p_cmp = sub.add_parser("compare", help="run two configs on one scenario side by side")
    p_cmp.add_argument("config_a")
    p_cmp.add_argument("config_b")
    p_cmp.add_argument("--out", default=None)
    p_cmp.add_argument("--no-figures", action="store_true")
    p_cmp.set_defaults(fn=cmd_compare)

    p_val = sub.add_parser("validate", help="check a config against the model assumptions")
    p_val.add_argument("config")
    p_val.set_defaults(fn=cmd_validate)

    p_swp = sub.add_parser("sweep", help="run a config across a list of parameter values")
    p_swp.add_argument("config")
    p_swp.add_argument("--param", required=True, metavar="section.key=v1,v2,...")
    p_swp.add_argument("--out", default=None)
    p_swp.add_argument("--no-figures", action="store_true")
    p_swp.set_defaults(fn=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ScenarioMismatchError, RankDeficiencyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SimulationBlowup as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
