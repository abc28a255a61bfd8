"""Per-iteration measurements, traces, and decay-rate fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .problems import ConvexSet, ProjectionError, dykstra_project

__all__ = [
    "TraceRecord",
    "Trace",
    "FitReport",
    "InsufficientDataError",
    "mean_iterate",
    "feasibility_gap",
    "consensus_error",
    "grad_sum_norm",
    "rate_fit",
    "write_trace_csv",
    "TRACE_CSV_HEADER",
]

TRACE_CSV_HEADER = (
    "n,objective,feasibility_gap,consensus_error,grad_sum_norm,"
    "optimality_gap,avg_objective_gap"
)


@dataclass(frozen=True)
class TraceRecord:
    """One sampled round of a run.

    ``objective`` through ``avg_objective_gap`` follow the trace CSV schema;
    the two ``avg_*`` extras measure the same quantities on the running-mean
    iterates and stay internal to the library (they are not CSV columns).
    ``optimality_gap`` and ``avg_objective_gap`` are NaN when no reference
    solution was supplied.
    """

    n: int
    objective: float
    feasibility_gap: float
    consensus_error: float
    grad_sum_norm: float
    optimality_gap: float
    avg_objective_gap: float
    avg_consensus_error: float = math.nan
    avg_feasibility_gap: float = math.nan

    def csv_row(self) -> str:
        vals = (
            self.objective,
            self.feasibility_gap,
            self.consensus_error,
            self.grad_sum_norm,
            self.optimality_gap,
            self.avg_objective_gap,
        )
        return str(self.n) + "," + ",".join("%.17g" % v for v in vals)


@dataclass
class Trace:
    """Ordered metric records plus everything needed to replay the run."""

    records: list[TraceRecord]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ns = [r.n for r in self.records]
        if ns != sorted(ns):
            raise ValueError("trace records must be sorted by iteration")

    def field_values(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def iterations(self) -> np.ndarray:
        return np.array([r.n for r in self.records], dtype=int)


def mean_iterate(x: np.ndarray) -> np.ndarray:
    """Node mean of stacked iterates: row-average of an (M, m) matrix."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return x.mean(axis=0)


def feasibility_gap(
    x_bar: np.ndarray,
    sets: Sequence[ConvexSet],
    dykstra_iters: int = 500,
    tol: float = 1e-9,
) -> float:
    """Distance from a point to the intersection of the given sets.

    Computed through Dykstra's projection; raises if the projection budget
    runs out before reaching ``tol``.
    """
    result = dykstra_project(sets, x_bar, dykstra_iters, tol)
    if not result.converged:
        raise ProjectionError(
            f"intersection projection did not reach tol={tol:.1e} "
            f"in {dykstra_iters} cycles (residual {result.max_distance:.3e})"
        )
    return float(np.linalg.norm(np.asarray(x_bar, dtype=float) - result.point))


def consensus_error(x: np.ndarray) -> float:
    """Largest squared deviation of any node's iterate from the node mean."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    dev = x - x.mean(axis=0)
    return float(np.max(np.sum(dev * dev, axis=1)))


def grad_sum_norm(g: np.ndarray) -> float:
    """Euclidean norm of the column sums of a stacked tracker matrix."""
    g = np.atleast_2d(np.asarray(g, dtype=float))
    return float(np.linalg.norm(g.sum(axis=0)))


class InsufficientDataError(ValueError):
    """Raised when a rate fit is attempted on too few records."""


_MODEL_POWERS = {"inv_sqrt_n": 0.5, "inv_n": 1.0, "linear_log": 0.0}


@dataclass(frozen=True)
class FitReport:
    """Least-squares decay fit over the tail half of a trace."""

    model: str
    coefficient: float
    r_squared: float
    sup_statistic: float
    points_used: int


def rate_fit(trace: Trace, field_name: str, model: str) -> FitReport:
    """Fit a decay model to one trace field.

    ``inv_sqrt_n`` fits ``y = C / sqrt(n)``, ``inv_n`` fits ``y = C / n``
    (both through the origin in the transformed variable), and
    ``linear_log`` fits ``log y = slope * n + intercept``; the fit uses the
    tail half of the records with ``n >= 1``.  The report also carries the
    boundedness statistic ``sup_n y_n * n^p`` over all sampled rounds, where
    ``p`` is the model's decay power.
    """
    if model not in _MODEL_POWERS:
        raise ValueError(f"unknown model {model!r}")
    if len(trace.records) < 10:
        raise InsufficientDataError("rate_fit needs at least 10 records")
    ns = trace.iterations().astype(float)
    ys = trace.field_values(field_name)
    keep = ns >= 1
    ns, ys = ns[keep], ys[keep]
    if ns.size < 4:
        raise InsufficientDataError("rate_fit needs at least 4 records with n >= 1")

    power = _MODEL_POWERS[model]
    sup_stat = float(np.max(ys * ns**power)) if power > 0 else float(np.max(ys))

    tail = slice(ns.size // 2, None)
    tn, ty = ns[tail], ys[tail]

    if model == "linear_log":
        positive = ty > 0
        if int(np.sum(positive)) < 2:
            raise InsufficientDataError("linear_log fit needs >= 2 positive tail values")
        tn, logy = tn[positive], np.log(ty[positive])
        slope, intercept = np.polyfit(tn, logy, 1)
        pred = slope * tn + intercept
        ss_res = float(np.sum((logy - pred) ** 2))
        ss_tot = float(np.sum((logy - logy.mean()) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        return FitReport(model, float(slope), r2, sup_stat, int(tn.size))

    basis = tn ** (-power)
    denom = float(basis @ basis)
    coeff = float((ty @ basis) / denom) if denom > 0 else 0.0
    pred = coeff * basis
    ss_res = float(np.sum((ty - pred) ** 2))
    ss_tot = float(np.sum((ty - ty.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return FitReport(model, coeff, r2, sup_stat, int(tn.size))


def write_trace_csv(trace: Trace, path: str | Path) -> None:
    """Write a trace in the delimited schema (one row per record, %.17g)."""
    lines = [TRACE_CSV_HEADER]
    lines.extend(r.csv_row() for r in trace.records)
    Path(path).write_text("\n".join(lines) + "\n")
