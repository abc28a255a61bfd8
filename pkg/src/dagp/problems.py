"""Local objectives, projectable constraint sets, and instance generators."""

from __future__ import annotations

import abc
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "SmoothConvexFunction",
    "ConvexSet",
    "LogCoshFunction",
    "QuadraticFunction",
    "LogisticLoss",
    "Halfspace",
    "BoxSet",
    "BallSet",
    "WholeSpace",
    "ProblemInstance",
    "ProjectionError",
    "DykstraResult",
    "generate_synthetic_instance",
    "generate_logistic_instance",
    "dykstra_project",
    "instance_to_json",
    "instance_from_json",
    "save_instance",
    "load_instance",
]

_LOG2 = math.log(2.0)


class SmoothConvexFunction(abc.ABC):
    """A differentiable convex function with a known gradient-Lipschitz bound."""

    dimension: int

    @property
    @abc.abstractmethod
    def smoothness_bound(self) -> float:
        """An upper bound on the gradient's Lipschitz constant."""

    @abc.abstractmethod
    def value(self, x: np.ndarray) -> float: ...

    @abc.abstractmethod
    def gradient(self, x: np.ndarray) -> np.ndarray: ...


class ConvexSet(abc.ABC):
    """A closed convex set admitting Euclidean projection."""

    dimension: int

    @abc.abstractmethod
    def project(self, x: np.ndarray) -> np.ndarray: ...

    def distance(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(np.asarray(x, dtype=float) - self.project(x)))

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return self.distance(x) <= tol


class LogCoshFunction(SmoothConvexFunction):
    """``f(x) = log(cosh(a.x - b))``: smooth, convex, not strongly convex.

    Evaluated overflow-safely as ``|t| + log1p(exp(-2|t|)) - log 2`` with
    ``t = a.x - b``; the gradient is ``tanh(t) * a``.  The curvature of
    ``log cosh`` is at most 1, so ``|a|^2`` bounds the gradient Lipschitz
    constant.
    """

    def __init__(self, a: np.ndarray, b: float):
        self.a = np.asarray(a, dtype=float)
        self.b = float(b)
        self.dimension = self.a.shape[0]

    @property
    def smoothness_bound(self) -> float:
        return float(self.a @ self.a)

    def value(self, x: np.ndarray) -> float:
        t = float(self.a @ np.asarray(x, dtype=float) - self.b)
        return abs(t) + math.log1p(math.exp(-2.0 * abs(t))) - _LOG2

    def gradient(self, x: np.ndarray) -> np.ndarray:
        t = float(self.a @ np.asarray(x, dtype=float) - self.b)
        return math.tanh(t) * self.a


class QuadraticFunction(SmoothConvexFunction):
    """``f(x) = 0.5 |x - center|^2`` with unit smoothness bound."""

    def __init__(self, center: np.ndarray):
        self.center = np.asarray(center, dtype=float)
        self.dimension = self.center.shape[0]

    @property
    def smoothness_bound(self) -> float:
        return 1.0

    def value(self, x: np.ndarray) -> float:
        d = np.asarray(x, dtype=float) - self.center
        return 0.5 * float(d @ d)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) - self.center


def _softplus(u: np.ndarray) -> np.ndarray:
    # log(1 + e^u) without overflow
    return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))


def _sigmoid(u: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


class LogisticLoss(SmoothConvexFunction):
    """Ridge-regularized logistic loss over a local batch of labeled samples.

    ``f(w) = sum_i log(1 + exp(-y_i x_i.w)) + (reg/2) |w|^2`` with labels in
    ``{-1, +1}``; strongly convex with modulus ``reg`` when ``reg > 0``.
    """

    def __init__(self, features: np.ndarray, labels: np.ndarray, reg: float):
        self.features = np.asarray(features, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise ValueError("features must be (n, m) with matching labels (n,)")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be +/-1")
        if reg < 0:
            raise ValueError("regularization weight must be >= 0")
        self.reg = float(reg)
        self.dimension = self.features.shape[1]

    @property
    def smoothness_bound(self) -> float:
        # sigmoid' <= 1/4, so L <= 0.25 * ||X||_2^2 + reg
        spectral = float(np.linalg.norm(self.features, 2)) if self.features.size else 0.0
        return 0.25 * spectral**2 + self.reg

    def value(self, w: np.ndarray) -> float:
        w = np.asarray(w, dtype=float)
        margins = -self.labels * (self.features @ w)
        return float(np.sum(_softplus(margins)) + 0.5 * self.reg * (w @ w))

    def gradient(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        margins = -self.labels * (self.features @ w)
        coeff = -self.labels * _sigmoid(margins)
        return self.features.T @ coeff + self.reg * w


class Halfspace(ConvexSet):
    """``{x : c.x <= d}`` with a closed-form orthogonal projection."""

    def __init__(self, c: np.ndarray, d: float):
        self.c = np.asarray(c, dtype=float)
        self.d = float(d)
        self._norm_sq = float(self.c @ self.c)
        if self._norm_sq == 0.0:
            raise ValueError("halfspace normal must be nonzero")
        self.dimension = self.c.shape[0]

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        slack = float(self.c @ x - self.d)
        if slack <= 0.0:
            return x.copy()
        return x - (slack / self._norm_sq) * self.c

    def distance(self, x: np.ndarray) -> float:
        slack = float(self.c @ np.asarray(x, dtype=float) - self.d)
        return max(0.0, slack) / math.sqrt(self._norm_sq)


class BoxSet(ConvexSet):
    """Axis-aligned box ``{x : lower <= x <= upper}``."""

    def __init__(self, lower: np.ndarray, upper: np.ndarray):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape or np.any(self.lower > self.upper):
            raise ValueError("box bounds must satisfy lower <= upper elementwise")
        self.dimension = self.lower.shape[0]

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)


class BallSet(ConvexSet):
    """Euclidean ball ``{x : |x - center| <= radius}``."""

    def __init__(self, center: np.ndarray, radius: float):
        if radius < 0:
            raise ValueError("radius must be >= 0")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.dimension = self.center.shape[0]

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        offset = x - self.center
        nrm = float(np.linalg.norm(offset))
        if nrm <= self.radius:
            return x.copy()
        return self.center + (self.radius / nrm) * offset


class WholeSpace(ConvexSet):
    """The trivial constraint: all of R^m."""

    def __init__(self, dimension: int):
        self.dimension = int(dimension)

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float).copy()

    def distance(self, x: np.ndarray) -> float:
        return 0.0


@dataclass
class ProblemInstance:
    """Per-node objectives and constraint sets for one experiment.

    ``feasible_witness`` is a point known (by construction) to satisfy every
    constraint; it is kept for feasibility checks and never handed to the
    algorithms.
    """

    dimension: int
    node_count: int
    functions: list[SmoothConvexFunction]
    constraint_sets: list[ConvexSet]
    feasible_witness: np.ndarray | None = None
    kind: str = "custom"
    seed: int | None = None

    def __post_init__(self):
        if len(self.functions) != self.node_count or len(self.constraint_sets) != self.node_count:
            raise ValueError("need one function and one constraint set per node")
        for f in self.functions:
            if f.dimension != self.dimension:
                raise ValueError("function dimension mismatch")
        for s in self.constraint_sets:
            if s.dimension != self.dimension:
                raise ValueError("constraint dimension mismatch")

    def total_value(self, x: np.ndarray) -> float:
        return float(sum(f.value(x) for f in self.functions))

    def total_gradient(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros(self.dimension)
        for f in self.functions:
            g += f.gradient(x)
        return g

    def total_smoothness(self) -> float:
        return float(sum(f.smoothness_bound for f in self.functions))

    @property
    def unconstrained(self) -> bool:
        return all(isinstance(s, WholeSpace) for s in self.constraint_sets)


def generate_synthetic_instance(m: int, node_count: int, seed: int) -> ProblemInstance:
    """Random log-cosh objectives with one halfspace constraint per node.

    All generator draws are i.i.d. standard normal.  The halfspace offsets
    are shifted so a drawn witness point is strictly feasible for every
    constraint, which keeps the intersection nonempty.
    """
    if m < 1 or node_count < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((node_count, m))
    b = rng.standard_normal(node_count)
    c = rng.standard_normal((node_count, m))
    witness = rng.standard_normal(m)
    slack = np.abs(rng.standard_normal(node_count))
    d = c @ witness + slack
    functions: list[SmoothConvexFunction] = [
        LogCoshFunction(a[v], b[v]) for v in range(node_count)
    ]
    sets: list[ConvexSet] = [Halfspace(c[v], d[v]) for v in range(node_count)]
    return ProblemInstance(
        dimension=m,
        node_count=node_count,
        functions=functions,
        constraint_sets=sets,
        feasible_witness=witness,
        kind="synthetic_constrained",
        seed=seed,
    )


def generate_logistic_instance(
    node_count: int, m: int, samples_per_node: int, seed: int
) -> ProblemInstance:
    """Two-class Gaussian-blob classification split evenly across nodes.

    Class labels alternate so every node's batch is class balanced.  Each
    node's loss carries ridge weight ``1 / (node_count * samples_per_node)``,
    i.e. one over the total sample count, making every local function
    strongly convex.  Constraints are all of R^m.
    """
    if node_count < 1 or m < 1 or samples_per_node < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    total = node_count * samples_per_node
    center = rng.standard_normal(m) / math.sqrt(m)
    labels = np.where(np.arange(total) % 2 == 0, 1.0, -1.0)
    features = labels[:, None] * center[None, :] + rng.standard_normal((total, m))
    reg = 1.0 / total
    functions: list[SmoothConvexFunction] = []
    for v in range(node_count):
        sl = slice(v * samples_per_node, (v + 1) * samples_per_node)
        functions.append(LogisticLoss(features[sl], labels[sl], reg))
    sets: list[ConvexSet] = [WholeSpace(m) for _ in range(node_count)]
    return ProblemInstance(
        dimension=m,
        node_count=node_count,
        functions=functions,
        constraint_sets=sets,
        feasible_witness=np.zeros(m),
        kind="logistic",
        seed=seed,
    )


class ProjectionError(RuntimeError):
    """Raised when an iterative projection exhausts its budget."""


class DykstraResult(NamedTuple):
    point: np.ndarray
    converged: bool
    cycles: int
    max_distance: float


def dykstra_project(
    sets: Sequence[ConvexSet], x: np.ndarray, iters: int = 500, tol: float = 1e-9
) -> DykstraResult:
    """Project onto an intersection of convex sets by Dykstra's iteration.

    Cyclically projects with correction increments.  Converged means the
    point is within ``tol`` of every set AND the correction increments moved
    less than ``tol`` over the last full cycle; feasibility alone is not
    enough, since the iterate can pass through the intersection well before
    the increments settle on the true projection.  With a single set this
    returns that set's exact projection after one cycle.
    """
    if not sets:
        raise ValueError("need at least one set")
    point = np.asarray(x, dtype=float).copy()
    increments = [np.zeros_like(point) for _ in sets]
    max_dist = np.inf
    for cycle in range(1, iters + 1):
        increment_shift_sq = 0.0
        for i, s in enumerate(sets):
            shifted = point + increments[i]
            projected = s.project(shifted)
            new_increment = shifted - projected
            delta = new_increment - increments[i]
            increment_shift_sq += float(delta @ delta)
            increments[i] = new_increment
            point = projected
        max_dist = max(s.distance(point) for s in sets)
        if max_dist <= tol and math.sqrt(increment_shift_sq) <= tol:
            return DykstraResult(point, True, cycle, max_dist)
    return DykstraResult(point, False, iters, max_dist)


def _function_to_dict(f: SmoothConvexFunction) -> dict:
    if isinstance(f, LogCoshFunction):
        return {"type": "log_cosh", "a": f.a.tolist(), "b": f.b}
    if isinstance(f, QuadraticFunction):
        return {"type": "quadratic", "center": f.center.tolist()}
    if isinstance(f, LogisticLoss):
        return {
            "type": "logistic",
            "features": f.features.tolist(),
            "labels": f.labels.tolist(),
            "reg": f.reg,
        }
    raise TypeError(f"cannot serialize function of type {type(f).__name__}")


def _function_from_dict(data: dict) -> SmoothConvexFunction:
    kind = data["type"]
    if kind == "log_cosh":
        return LogCoshFunction(np.array(data["a"]), data["b"])
    if kind == "quadratic":
        return QuadraticFunction(np.array(data["center"]))
    if kind == "logistic":
        return LogisticLoss(np.array(data["features"]), np.array(data["labels"]), data["reg"])
    raise ValueError(f"unknown function type {kind!r}")


def _set_to_dict(s: ConvexSet) -> dict:
    if isinstance(s, Halfspace):
        return {"type": "halfspace", "c": s.c.tolist(), "d": s.d}
    if isinstance(s, BoxSet):
        return {"type": "box", "lower": s.lower.tolist(), "upper": s.upper.tolist()}
    if isinstance(s, BallSet):
        return {"type": "ball", "center": s.center.tolist(), "radius": s.radius}
    if isinstance(s, WholeSpace):
        return {"type": "whole_space", "dimension": s.dimension}
    raise TypeError(f"cannot serialize set of type {type(s).__name__}")


def _set_from_dict(data: dict) -> ConvexSet:
    kind = data["type"]
    if kind == "halfspace":
        return Halfspace(np.array(data["c"]), data["d"])
    if kind == "box":
        return BoxSet(np.array(data["lower"]), np.array(data["upper"]))
    if kind == "ball":
        return BallSet(np.array(data["center"]), data["radius"])
    if kind == "whole_space":
        return WholeSpace(data["dimension"])
    raise ValueError(f"unknown set type {kind!r}")


def instance_to_json(instance: ProblemInstance) -> str:
    """Serialize an instance to JSON text (floats at full round-trip precision)."""
    payload = {
        "kind": instance.kind,
        "seed": instance.seed,
        "dimension": instance.dimension,
        "node_count": instance.node_count,
        "functions": [_function_to_dict(f) for f in instance.functions],
        "constraint_sets": [_set_to_dict(s) for s in instance.constraint_sets],
        "feasible_witness": (
            None if instance.feasible_witness is None else instance.feasible_witness.tolist()
        ),
    }
    return json.dumps(payload, indent=1)


def instance_from_json(text: str) -> ProblemInstance:
    data = json.loads(text)
    witness = data.get("feasible_witness")
    return ProblemInstance(
        dimension=data["dimension"],
        node_count=data["node_count"],
        functions=[_function_from_dict(f) for f in data["functions"]],
        constraint_sets=[_set_from_dict(s) for s in data["constraint_sets"]],
        feasible_witness=None if witness is None else np.array(witness),
        kind=data.get("kind", "custom"),
        seed=data.get("seed"),
    )


def save_instance(instance: ProblemInstance, path: str | Path) -> None:
    Path(path).write_text(instance_to_json(instance))


def load_instance(path: str | Path) -> ProblemInstance:
    return instance_from_json(Path(path).read_text())
