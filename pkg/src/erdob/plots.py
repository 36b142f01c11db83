"""Figure rendering for run and comparison reports.

Each figure is written as a PNG next to a CSV holding exactly the plotted
series, so the pictures can be regenerated or restyled offline.  The
groupings mirror the quantities of interest: disturbance against its
estimate, entries of the exosystem matrix against their estimates,
tracking errors, sliding surface with the adaptive gain, and estimation
diagnostics.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .sim import SimTrace

__all__ = ["save_run_figures", "save_compare_figures"]

_MAX_POINTS = 20_000


def _stride(n: int) -> int:
    return max(1, n // _MAX_POINTS)


def _write_data(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    with path.open("w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _finish(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_run_figures(trace: SimTrace, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    s = _stride(len(trace.t))
    t = trace.t[::s]
    n = trace.x.shape[1]
    d = trace.eps_T.shape[1]
    paths: list[Path] = []

    # disturbance vs estimate
    fig, axes = plt.subplots(d, 1, figsize=(7, 2.2 * d), sharex=True, squeeze=False)
    header = ["t"]
    cols = [t]
    for i in range(d):
        ax = axes[i][0]
        ax.plot(t, trace.eps_T[::s, i], label=f"disturbance {i + 1}")
        ax.plot(t, trace.eps_T_hat[::s, i], "--", label=f"estimate {i + 1}")
        ax.set_ylabel(f"component {i + 1}")
        ax.grid(True, alpha=0.4)
        ax.legend(loc="upper right", fontsize=8)
        header += [f"epsT{i + 1}", f"epsThat{i + 1}"]
        cols += [trace.eps_T[::s, i], trace.eps_T_hat[::s, i]]
    axes[-1][0].set_xlabel("time [s]")
    fig.suptitle("Disturbance and its estimate")
    _finish(fig, out / "disturbance.png")
    _write_data(out / "disturbance.csv", header, cols)
    paths += [out / "disturbance.png", out / "disturbance.csv"]

    # exosystem matrix entries vs estimates
    s_true = trace.s_true
    fig, axes = plt.subplots(d, d, figsize=(3.2 * d, 2.2 * d), sharex=True, squeeze=False)
    header = ["t"]
    cols = [t]
    for i in range(d):
        for j in range(d):
            ax = axes[i][j]
            est = trace.s_hat_vec[::s, j * d + i]
            ax.plot(t, est, label=f"S{i + 1}{j + 1} estimate")
            ax.axhline(s_true[i, j], color="k", ls=":", lw=1, label="true")
            ax.grid(True, alpha=0.4)
            ax.legend(loc="upper right", fontsize=7)
            header.append(f"S{i + 1}{j + 1}hat")
            cols.append(est)
    for j in range(d):
        axes[-1][j].set_xlabel("time [s]")
    fig.suptitle("Exosystem matrix entries and estimates")
    _finish(fig, out / "s_entries.png")
    _write_data(out / "s_entries.csv", header, cols)
    paths += [out / "s_entries.png", out / "s_entries.csv"]

    # tracking errors
    fig, ax = plt.subplots(figsize=(7, 3.2))
    header = ["t"]
    cols = [t]
    for i in range(n):
        ax.plot(t, trace.e_x[::s, i], label=f"e{i + 1}")
        header.append(f"ex{i + 1}")
        cols.append(trace.e_x[::s, i])
    if trace.switch_time is not None:
        ax.axvline(trace.switch_time, color="k", ls=":", lw=1)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("tracking error")
    ax.grid(True, alpha=0.4)
    ax.legend(fontsize=8)
    fig.suptitle("Tracking errors")
    _finish(fig, out / "tracking.png")
    _write_data(out / "tracking.csv", header, cols)
    paths += [out / "tracking.png", out / "tracking.csv"]

    # sliding surface and adaptive gain
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 4.6), sharex=True)
    header = ["t"]
    cols = [t]
    for i in range(n):
        ax1.plot(t, trace.sigma[::s, i], label=f"sigma{i + 1}")
        header.append(f"sigma{i + 1}")
        cols.append(trace.sigma[::s, i])
    ax1.set_ylabel("sliding surface")
    ax1.grid(True, alpha=0.4)
    ax1.legend(fontsize=8)
    ax2.plot(t, trace.k_gain[::s], label="k(t)")
    ax2.set_ylabel("gain")
    ax2.set_xlabel("time [s]")
    ax2.grid(True, alpha=0.4)
    ax2.legend(fontsize=8)
    header.append("k")
    cols.append(trace.k_gain[::s])
    fig.suptitle("Sliding surface and adaptive gain")
    _finish(fig, out / "sliding_gain.png")
    _write_data(out / "sliding_gain.csv", header, cols)
    paths += [out / "sliding_gain.png", out / "sliding_gain.csv"]

    # estimation diagnostics
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 4.6), sharex=True)
    safe = np.maximum(trace.s_tilde_fro[::s], 1e-300)
    ax1.semilogy(t, safe, label="|S - S_hat|_F")
    ax1.grid(True, alpha=0.4)
    ax1.legend(fontsize=8)
    ax2.plot(t, trace.lam_min[::s], label="stack lambda_min")
    ax2.plot(t, trace.phase[::s].astype(float), ":", label="phase")
    ax2.set_xlabel("time [s]")
    ax2.grid(True, alpha=0.4)
    ax2.legend(fontsize=8)
    header = ["t", "Stilde_fro", "lambda_min", "phase"]
    cols = [t, trace.s_tilde_fro[::s], trace.lam_min[::s], trace.phase[::s].astype(float)]
    fig.suptitle("Estimation diagnostics")
    _finish(fig, out / "estimation_diag.png")
    _write_data(out / "estimation_diag.csv", header, cols)
    paths += [out / "estimation_diag.png", out / "estimation_diag.csv"]
    return paths


def save_compare_figures(
    trace_a: SimTrace,
    trace_b: SimTrace,
    label_a: str,
    label_b: str,
    out_dir: str | Path,
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sa, sb = _stride(len(trace_a.t)), _stride(len(trace_b.t))
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 5.2), sharex=True)
    ax1.semilogy(trace_a.t[::sa], np.maximum(trace_a.eps_err_norm[::sa], 1e-300), label=label_a)
    ax1.semilogy(trace_b.t[::sb], np.maximum(trace_b.eps_err_norm[::sb], 1e-300), "--", label=label_b)
    ax1.set_ylabel("|disturbance estimate error|")
    ax1.grid(True, alpha=0.4)
    ax1.legend(fontsize=8)
    ax2.semilogy(trace_a.t[::sa], np.maximum(trace_a.s_tilde_fro[::sa], 1e-300), label=label_a)
    ax2.semilogy(trace_b.t[::sb], np.maximum(trace_b.s_tilde_fro[::sb], 1e-300), "--", label=label_b)
    ax2.set_ylabel("|S - S_hat|_F")
    ax2.set_xlabel("time [s]")
    ax2.grid(True, alpha=0.4)
    ax2.legend(fontsize=8)
    fig.suptitle("Estimation convergence comparison")
    _finish(fig, out / "comparison.png")
    _write_data(
        out / "comparison_data.csv",
        ["t_a", "eps_err_a", "stilde_a"],
        [trace_a.t[::sa], trace_a.eps_err_norm[::sa], trace_a.s_tilde_fro[::sa]],
    )
    return [out / "comparison.png", out / "comparison_data.csv"]
