"""Centralized reference solver: projected gradient descent plus a KKT check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .problems import Halfspace, ProblemInstance, WholeSpace, dykstra_project

__all__ = [
    "ReferenceSolution",
    "InfeasiblePointError",
    "centralized_solve",
    "kkt_residual",
]


class InfeasiblePointError(ValueError):
    """Raised when a stationarity check is requested at an infeasible point."""


@dataclass(frozen=True)
class ReferenceSolution:
    """Best available centralized solution, with its own quality certificate.

    ``kkt_residual`` is reported rather than hidden so downstream optimality
    gaps can be judged against the oracle's actual accuracy.
    """

    x_star: np.ndarray
    f_star: float
    kkt_residual: float
    iterations_used: int
    converged: bool
    step: float

    def to_dict(self) -> dict:
        return {
            "x_star": self.x_star.tolist(),
            "f_star": self.f_star,
            "kkt_residual": self.kkt_residual,
            "iterations_used": self.iterations_used,
            "converged": self.converged,
            "step": self.step,
        }


def centralized_solve(
    instance: ProblemInstance,
    step: float | None = None,
    iters: int = 200_000,
    tol: float = 1e-12,
    dykstra_iters: int = 500,
    dykstra_tol: float = 1e-11,
) -> ReferenceSolution:
    """Projected gradient descent on the summed objective.

    Each iteration takes a gradient step on ``sum_v f_v`` and projects onto
    the intersection of all constraint sets (Dykstra); with ``step`` at most
    one over the summed smoothness bound (the default) the objective is
    monotone non-increasing.  Terminates once the iterate moves less than
    ``tol``; a non-convergent run is still returned, flagged, with its
    residual.
    """
    if step is None:
        total_l = instance.total_smoothness()
        step = 1.0 / total_l if total_l > 0 else 1.0
    unconstrained = instance.unconstrained
    sets = instance.constraint_sets

    x = (
        np.zeros(instance.dimension)
        if instance.feasible_witness is None
        else np.asarray(instance.feasible_witness, dtype=float).copy()
    )
    if not unconstrained:
        x = dykstra_project(sets, x, dykstra_iters, dykstra_tol).point

    converged = False
    used = 0
    for k in range(1, iters + 1):
        y = x - step * instance.total_gradient(x)
        x_new = y if unconstrained else dykstra_project(sets, y, dykstra_iters, dykstra_tol).point
        used = k
        moved = float(np.linalg.norm(x_new - x))
        x = x_new
        if moved <= tol:
            converged = True
            break

    residual = kkt_residual(instance, x, feas_tol=max(1e-6, 10 * dykstra_tol))
    return ReferenceSolution(
        x_star=x,
        f_star=instance.total_value(x),
        kkt_residual=residual,
        iterations_used=used,
        converged=converged,
        step=step,
    )


def kkt_residual(
    instance: ProblemInstance,
    x: np.ndarray,
    activity_tol: float = 1e-7,
    feas_tol: float = 1e-6,
) -> float:
    """Stationarity residual at a feasible point of a halfspace-constrained instance.

    Solves the nonnegative least-squares problem over multipliers on the
    active halfspaces, ``min |sum_v grad f_v(x) + sum_a lam_a c_a|`` with
    ``lam >= 0``, multipliers fixed to zero on constraints further than
    ``activity_tol`` from their boundary.  Zero (up to solver accuracy) at an
    optimum; for unconstrained instances this is the plain gradient norm.
    """
    x = np.asarray(x, dtype=float)
    normals = []
    for s in instance.constraint_sets:
        if isinstance(s, WholeSpace):
            continue
        if not isinstance(s, Halfspace):
            raise NotImplementedError(
                "kkt_residual supports halfspace and whole-space constraints only"
            )
        if s.distance(x) > feas_tol:
            raise InfeasiblePointError(
                f"point violates a constraint by {s.distance(x):.3e} (> {feas_tol:.1e})"
            )
        if float(s.c @ x - s.d) >= -activity_tol * max(1.0, abs(s.d)):
            normals.append(s.c)
    grad = instance.total_gradient(x)
    if not normals:
        return float(np.linalg.norm(grad))
    a = np.column_stack(normals)
    _, resid = nnls(a, -grad)
    return float(resid)
