"""Render result files into figures, one PNG per experiment view.

The report path works purely from the emitted artifacts: the flat
record file (CSV or JSON) and, for convergence runs, the per-trial
trace CSVs sitting next to it.
"""

from __future__ import annotations

import glob
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiments import aggregate
from .results import load_records, load_trace_csv

__all__ = ["render_report"]

_AXIS_LABELS = {
    "dof_slope": "SNR [dB]",
    "mi_vs_rsnr": "RSNR [dB]",
    "rate_vs_snr": "receive SNR [dB]",
    "rate_vs_nr": "receive antennas",
    "convergence": "RF chains",
}


def _series(rows, metric):
    pts = sorted((r.sweep_value, r.mean, r.stderr) for r in rows if r.metric == metric)
    return (np.array([p[0] for p in pts]), np.array([p[1] for p in pts]),
            np.array([p[2] for p in pts]))


def _plot_metrics(rows, metrics, xlabel, ylabel, title, path):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for metric in metrics:
        x, y, err = _series(rows, metric)
        if x.size == 0:
            continue
        ax.errorbar(x, y, yerr=err, marker="o", capsize=3, label=metric)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_report(results_path, out_dir, traces_dir=None) -> list[str]:
    """Write PNG figures for a result file; returns the created paths."""
    records = load_records(results_path)
    if not records:
        raise ValueError(f"no records in {results_path}")
    experiment = records[0].experiment
    rows = aggregate(records)
    os.makedirs(out_dir, exist_ok=True)
    xlabel = _AXIS_LABELS.get(experiment, "sweep value")
    created = []

    if experiment == "dof_slope":
        created.append(_plot_metrics(
            rows, ["slope_iq", "slope_classical", "slope_inphase"], xlabel,
            "capacity slope [bits/octave]", "high-SNR capacity slopes",
            os.path.join(out_dir, "dof_slope.png")))
    elif experiment == "mi_vs_rsnr":
        created.append(_plot_metrics(
            rows, ["mi_linear_bits", "mi_mc_bits"], xlabel, "mutual information [bits]",
            "magnitude detection vs real-part approximation",
            os.path.join(out_dir, "mi_vs_rsnr.png")))
        created.append(_plot_metrics(
            rows, ["rel_error"], xlabel, "relative error",
            "approximation error", os.path.join(out_dir, "mi_rel_error.png")))
    elif experiment in ("rate_vs_snr", "rate_vs_nr"):
        metrics = ["rate_iq_digital", "rate_classical_digital",
                   "rate_fc_hybrid", "rate_sc_hybrid"]
        created.append(_plot_metrics(
            rows, metrics, xlabel, "achievable rate [bits/s/Hz]",
            "precoder comparison", os.path.join(out_dir, f"{experiment}.png")))
    elif experiment == "convergence":
        created.append(_plot_metrics(
            rows, ["rel_residual"], xlabel, "relative residual",
            "converged approximation error",
            os.path.join(out_dir, "convergence_residual.png")))
        trace_glob = None
        if traces_dir:
            trace_glob = os.path.join(traces_dir, "*_trace_*.csv")
        else:
            stem, _ = os.path.splitext(results_path)
            trace_glob = stem + "_trace_*.csv"
        trace_files = sorted(glob.glob(trace_glob))
        if trace_files:
            fig, ax = plt.subplots(figsize=(6.0, 4.0))
            for path in trace_files[:40]:
                objectives = load_trace_csv(path)
                ax.semilogy(np.arange(objectives.size), np.maximum(objectives, 1e-300),
                            alpha=0.6)
            ax.set_xlabel("iteration")
            ax.set_ylabel("objective")
            ax.set_title("alternating-minimization traces")
            ax.grid(True, alpha=0.3)
            fig.tight_layout()
            out = os.path.join(out_dir, "convergence_traces.png")
            fig.savefig(out, dpi=150)
            plt.close(fig)
            created.append(out)
    else:
        raise ValueError(f"no report renderer for experiment {experiment!r}")
    return created
