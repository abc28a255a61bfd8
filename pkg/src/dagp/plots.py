"""Static figure emission: one SVG line chart per trace metric."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import Trace

__all__ = ["emit_plots", "PLOT_SPECS"]

# (field, filename stem, y label, log-scale y)
PLOT_SPECS = (
    ("objective", "objective", "objective value", False),
    ("feasibility_gap", "feasibility_gap", "feasibility gap", True),
    ("consensus_error", "consensus_error", "max squared consensus error", True),
    ("grad_sum_norm", "grad_sum_norm", "norm of summed trackers", True),
    ("optimality_gap", "optimality_gap", "optimality gap", True),
)

plt.rcParams["svg.hashsalt"] = "dagp"


def emit_consensus_nodes_plot(
    ns: Sequence[int],
    series: dict[str, Sequence[float]],
    path: str | Path,
) -> Path:
    """Log-scale squared-error chart for a handful of tracked nodes."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ns = np.asarray(ns)
    for label, values in series.items():
        ys = np.asarray(values, dtype=float)
        mask = np.isfinite(ys) & (ys > 0)
        ax.plot(ns[mask], ys[mask], label=label, linewidth=1.2)
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("squared error vs reference node")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def emit_plots(traces: Sequence[tuple[str, Trace]], output_dir: str | Path) -> list[Path]:
    """Render the five standard charts to SVG files, one series per algorithm.

    Log-scale charts silently drop non-positive samples (a converged
    feasibility gap is exactly zero).  Returns the written paths.
    """
    if not traces:
        raise ValueError("emit_plots needs at least one trace")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for field_name, stem, ylabel, log_y in PLOT_SPECS:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for name, trace in traces:
            ns = trace.iterations()
            ys = trace.field_values(field_name)
            if log_y:
                mask = np.isfinite(ys) & (ys > 0)
            else:
                # linear axes choke on astronomically large samples
                mask = np.isfinite(ys) & (np.abs(ys) < 1e30)
            ax.plot(ns[mask], ys[mask], label=name, linewidth=1.4)
        if log_y:
            ax.set_yscale("log")
        ax.set_xlabel("iteration")
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best")
        fig.tight_layout()
        path = out / f"{stem}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    return written
