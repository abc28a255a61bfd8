"""Synchronous-round decentralized optimizers: DAGP and baseline methods.

All steppers share one contract: a state object holding every node's round-n
variables, and a ``step`` that produces the round-(n+1) state reading only
round-n values.  Per-node local work (gradients, projections) funnels through
:class:`NodeMap`, which may fan out over worker threads; results are always
assembled in node-index order, so traces are bitwise identical regardless of
the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .metrics import (
    Trace,
    TraceRecord,
    consensus_error,
    feasibility_gap,
    grad_sum_norm,
    mean_iterate,
)
from .mixing import GossipPair, column_stochastic, row_stochastic
from .problems import ProblemInstance
from .reference import ReferenceSolution

__all__ = [
    "DagpHyperParams",
    "DagpState",
    "NonFiniteError",
    "NodeMap",
    "OptimalityReport",
    "Stepper",
    "DagpStepper",
    "DdpsStepper",
    "AddOptStepper",
    "PushPullStepper",
    "ProjectedDgdStepper",
    "STEPPER_REGISTRY",
    "make_stepper",
    "initial_iterates",
    "dagp_init",
    "dagp_step",
    "dagp_step_message_passing",
    "broadcast_message",
    "check_stopping_point",
    "run",
]


class NonFiniteError(RuntimeError):
    """A run produced NaN or Inf; carries the offending round for diagnosis."""

    def __init__(self, algorithm: str, round_index: int):
        super().__init__(f"{algorithm}: non-finite state at round {round_index}")
        self.algorithm = algorithm
        self.round_index = round_index


class NodeMap:
    """Deterministic per-node evaluator with optional thread fan-out.

    ``map_rows`` evaluates ``fn(v)`` for every node and stacks the results in
    node order.  Each row is produced by the same single-node code whether or
    not threads are used, so the assembled matrix is bitwise reproducible.
    """

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self._pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def map_rows(self, fn: Callable[[int], np.ndarray], count: int) -> np.ndarray:
        if self._pool is None:
            rows = [fn(v) for v in range(count)]
        else:
            rows = list(self._pool.map(fn, range(count)))
        return np.stack(rows, axis=0)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self) -> "NodeMap":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


_SERIAL_MAP = NodeMap(1)


def _local_gradients(instance: ProblemInstance, x: np.ndarray, node_map: NodeMap) -> np.ndarray:
    return node_map.map_rows(lambda v: instance.functions[v].gradient(x[v]), instance.node_count)


def _local_projections(instance: ProblemInstance, z: np.ndarray, node_map: NodeMap) -> np.ndarray:
    return node_map.map_rows(
        lambda v: instance.constraint_sets[v].project(z[v]), instance.node_count
    )


def _require_finite(name: str, round_index: int, *arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(name, round_index)


def initial_iterates(node_count: int, dimension: int, seed: int) -> np.ndarray:
    """Shared initial iterates: rows drawn i.i.d. from the standard normal."""
    return np.random.default_rng(seed).standard_normal((node_count, dimension))


# ---------------------------------------------------------------------------
# DAGP
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DagpHyperParams:
    """Step size ``mu``, tracking gain ``rho``, and mixing gain ``alpha``."""

    mu: float = 0.1
    rho: float = 0.1
    alpha: float = 0.1

    def __post_init__(self):
        for fname in ("mu", "rho", "alpha"):
            v = getattr(self, fname)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{fname} must be finite and > 0, got {v}")


@dataclass(frozen=True)
class DagpState:
    """Round-n variables, one row per node.

    ``X`` holds the local iterates, ``G`` the gradient/feasible-direction
    trackers, ``H`` the flow variables whose node sum is conserved, and ``Z``
    the pre-projection points from the step that produced ``X``.
    """

    X: np.ndarray
    G: np.ndarray
    H: np.ndarray
    Z: np.ndarray
    n: int


def dagp_init(
    instance: ProblemInstance,
    gossip: GossipPair,
    params: DagpHyperParams,
    x_init_seed: int,
) -> DagpState:
    """Fresh state: random normal iterates, zero trackers and flow variables.

    Zero-initializing ``H`` makes its node sum exactly zero, which the
    column-sum structure of ``Q`` then preserves for the whole run.
    """
    if gossip.W.shape[0] != instance.node_count:
        raise ValueError(
            f"gossip pair is {gossip.W.shape[0]}x{gossip.W.shape[0]} but "
            f"instance has {instance.node_count} nodes"
        )
    x = initial_iterates(instance.node_count, instance.dimension, x_init_seed)
    zeros = np.zeros_like(x)
    return DagpState(X=x, G=zeros.copy(), H=zeros.copy(), Z=zeros.copy(), n=0)


def dagp_step(
    state: DagpState,
    instance: ProblemInstance,
    gossip: GossipPair,
    params: DagpHyperParams,
    node_map: NodeMap = _SERIAL_MAP,
) -> DagpState:
    """One synchronous round of DAGP, all nodes updated simultaneously.

    With ``F'`` the stacked local gradients at the current iterates::

        Z      = X - W X - mu (F' - G)
        X_next = project_rows(Z)            # each row onto its own set
        G_next = G + rho [F' - G + (Z - X_next)/mu] + alpha (H - G)
        H_next = H - Q (H - G)

    The diagonal of ``W`` rides along inside ``W X`` (zero row sums make the
    row's own weight implicit), and likewise for ``Q``.  Zero column sums of
    ``Q`` conserve the node sum of ``H`` to rounding error.
    """
    mu, rho, alpha = params.mu, params.rho, params.alpha
    grads = _local_gradients(instance, state.X, node_map)
    z = state.X - gossip.W @ state.X - mu * (grads - state.G)
    x_next = _local_projections(instance, z, node_map)
    g_next = state.G + rho * (grads - state.G + (z - x_next) / mu) + alpha * (state.H - state.G)
    h_next = state.H - gossip.Q @ (state.H - state.G)
    _require_finite("dagp", state.n + 1, x_next, g_next, h_next)
    return DagpState(X=x_next, G=g_next, H=h_next, Z=z, n=state.n + 1)


def broadcast_message(state: DagpState, v: int) -> tuple[np.ndarray, np.ndarray]:
    """The pair node ``v`` sends its out-neighbors: ``(x_v, h_v - g_v)``."""
    return state.X[v].copy(), state.H[v] - state.G[v]


def dagp_step_message_passing(
    state: DagpState,
    instance: ProblemInstance,
    gossip: GossipPair,
    params: DagpHyperParams,
) -> DagpState:
    """Shadow implementation of :func:`dagp_step` via explicit messages.

    Every node reads only its own variables, its own row of ``W`` and ``Q``,
    and the broadcast pairs of its in-neighbors.  Exists to certify that the
    matrix form is genuinely decentralized; the two must agree to float
    precision.
    """
    from .graphs import in_neighbors

    mu, rho, alpha = params.mu, params.rho, params.alpha
    m_nodes = instance.node_count
    inbox: dict[int, tuple[np.ndarray, np.ndarray]] = {
        u: broadcast_message(state, u) for u in range(m_nodes)
    }
    x_next = np.empty_like(state.X)
    g_next = np.empty_like(state.G)
    h_next = np.empty_like(state.H)
    z_all = np.empty_like(state.Z)
    for v in range(m_nodes):
        x_v = state.X[v]
        g_v = state.G[v]
        h_v = state.H[v]
        neighbors = sorted(in_neighbors(gossip.graph, v))
        mix_x = gossip.W[v, v] * x_v
        mix_delta = gossip.Q[v, v] * (h_v - g_v)
        for u in neighbors:
            x_u, delta_u = inbox[u]
            mix_x = mix_x + gossip.W[v, u] * x_u
            mix_delta = mix_delta + gossip.Q[v, u] * delta_u
        grad_v = instance.functions[v].gradient(x_v)
        z_v = x_v - mix_x - mu * (grad_v - g_v)
        x_new = instance.constraint_sets[v].project(z_v)
        x_next[v] = x_new
        g_next[v] = g_v + rho * (grad_v - g_v + (z_v - x_new) / mu) + alpha * (h_v - g_v)
        h_next[v] = h_v - mix_delta
        z_all[v] = z_v
    _require_finite("dagp", state.n + 1, x_next, g_next, h_next)
    return DagpState(X=x_next, G=g_next, H=h_next, Z=z_all, n=state.n + 1)


@dataclass(frozen=True)
class OptimalityReport:
    """Residuals of the stationarity system at a candidate stopping point.

    ``z/x/g/h_residual`` measure how far the four update equations are from
    their fixed-point form; the remaining entries measure consensus, the
    tracker sum, and the mean iterate's distance to the full feasible set.
    Diagnostic only: the check never aborts.
    """

    z_residual: float
    x_residual: float
    g_residual: float
    h_residual: float
    consensus_spread: float
    gradient_sum_norm: float
    mean_feasibility_gap: float
    tol: float

    @property
    def passed(self) -> bool:
        vals = (
            self.z_residual,
            self.x_residual,
            self.g_residual,
            self.h_residual,
            self.consensus_spread,
            self.gradient_sum_norm,
            self.mean_feasibility_gap,
        )
        return all(v <= self.tol for v in vals)

    def to_dict(self) -> dict:
        return {
            "z_residual": self.z_residual,
            "x_residual": self.x_residual,
            "g_residual": self.g_residual,
            "h_residual": self.h_residual,
            "consensus_spread": self.consensus_spread,
            "gradient_sum_norm": self.gradient_sum_norm,
            "mean_feasibility_gap": self.mean_feasibility_gap,
            "tol": self.tol,
            "passed": self.passed,
        }


def check_stopping_point(
    state: DagpState,
    instance: ProblemInstance,
    gossip: GossipPair,
    params: DagpHyperParams,
    tol: float = 1e-5,
    dykstra_iters: int = 2000,
    dykstra_tol: float = 1e-12,
) -> OptimalityReport:
    """Evaluate the fixed-point residuals of the update system at a state.

    At a true stopping point every residual vanishes and the state is a
    consensus, feasible, optimal solution; the report quantifies how close
    the given state comes, all in Frobenius/Euclidean norms.
    """
    mu, rho, alpha = params.mu, params.rho, params.alpha
    grads = _local_gradients(instance, state.X, _SERIAL_MAP)
    z_model = state.X - gossip.W @ state.X - mu * (grads - state.G)
    proj_z = _local_projections(instance, state.Z, _SERIAL_MAP)
    r_z = float(np.linalg.norm(state.Z - z_model))
    r_x = float(np.linalg.norm(state.X - proj_z))
    r_g = float(
        np.linalg.norm(
            rho * (grads - state.G + (state.Z - state.X) / mu)
            + alpha * (state.H - state.G)
        )
    )
    r_h = float(np.linalg.norm(gossip.Q @ (state.H - state.G)))
    x_bar = mean_iterate(state.X)
    spread = float(np.max(np.linalg.norm(state.X - x_bar, axis=1)))
    gsum = grad_sum_norm(state.G)
    feas = feasibility_gap(x_bar, instance.constraint_sets, dykstra_iters, dykstra_tol)
    return OptimalityReport(
        z_residual=r_z,
        x_residual=r_x,
        g_residual=r_g,
        h_residual=r_h,
        consensus_spread=spread,
        gradient_sum_norm=gsum,
        mean_feasibility_gap=feas,
        tol=tol,
    )


# ---------------------------------------------------------------------------
# Stepper interface and baseline methods
# ---------------------------------------------------------------------------


class Stepper:
    """Uniform synchronous-round interface over all implemented methods.

    ``init_state`` builds the round-0 state from a shared iterate seed so
    different methods start from identical points; ``step`` advances one
    round reading only round-n values; ``iterates``/``tracker`` expose the
    per-node matrices the metrics consume.
    """

    name: str = "abstract"

    def init_state(self, instance: ProblemInstance, gossip: GossipPair, x_init_seed: int):
        raise NotImplementedError

    def step(self, state, instance: ProblemInstance, gossip: GossipPair, node_map: NodeMap):
        raise NotImplementedError

    def iterates(self, state) -> np.ndarray:
        return state.X

    def tracker(self, state, instance: ProblemInstance) -> np.ndarray:
        raise NotImplementedError

    def params_dict(self) -> dict:
        raise NotImplementedError


class DagpStepper(Stepper):
    """Fixed-step double-averaging gradient projection."""

    name = "dagp"

    def __init__(self, params: DagpHyperParams | None = None):
        self.params = params or DagpHyperParams()

    def init_state(self, instance, gossip, x_init_seed):
        return dagp_init(instance, gossip, self.params, x_init_seed)

    def step(self, state, instance, gossip, node_map=_SERIAL_MAP):
        return dagp_step(state, instance, gossip, self.params, node_map)

    def tracker(self, state, instance):
        return state.G

    def params_dict(self):
        return {"mu": self.params.mu, "rho": self.params.rho, "alpha": self.params.alpha}


@dataclass(frozen=True)
class PushSumState:
    """Iterates plus push-sum weights for ratio-debiased methods."""

    X: np.ndarray
    y: np.ndarray
    n: int


class DdpsStepper(Stepper):
    """Diminishing-step projected subgradient over a column-stochastic mix.

    Push-sum weights debias the averaging; each node projects its debiased
    estimate onto its own constraint set.  The step decays as
    ``c / sqrt(n + 1)``, so the method only approaches the feasible
    intersection without settling in it.
    """

    name = "ddps"

    def __init__(self, step_scale: float = 1.0):
        if not (math.isfinite(step_scale) and step_scale > 0):
            raise ValueError("step_scale must be finite and > 0")
        self.step_scale = step_scale

    def init_state(self, instance, gossip, x_init_seed):
        x = initial_iterates(instance.node_count, instance.dimension, x_init_seed)
        return PushSumState(X=x, y=np.ones(instance.node_count), n=0)

    def step(self, state, instance, gossip, node_map=_SERIAL_MAP):
        a = column_stochastic(gossip.Q)
        step = self.step_scale / math.sqrt(state.n + 1)
        grads = _local_gradients(instance, state.X, node_map)
        numer = a @ (state.y[:, None] * state.X - step * grads)
        y_next = a @ state.y
        debiased = numer / y_next[:, None]
        x_next = _local_projections(instance, debiased, node_map)
        _require_finite(self.name, state.n + 1, x_next, y_next)
        return PushSumState(X=x_next, y=y_next, n=state.n + 1)

    def tracker(self, state, instance):
        return _local_gradients(instance, state.X, _SERIAL_MAP)

    def params_dict(self):
        return {"c": self.step_scale}


@dataclass(frozen=True)
class AddOptState:
    """Column-stochastic gradient-tracking state with push-sum debiasing."""

    X: np.ndarray
    y: np.ndarray
    Zhat: np.ndarray
    tracker: np.ndarray
    grads: np.ndarray
    n: int


class AddOptStepper(Stepper):
    """Fixed-step gradient tracking using only the column-stochastic matrix.

    Maintains debiased estimates ``Zhat = X / y`` and a tracker that
    accumulates gradient differences, mixed with ``I - Q`` each round.
    """

    name = "addopt"

    def __init__(self, step: float = 0.01):
        if not (math.isfinite(step) and step > 0):
            raise ValueError("step must be finite and > 0")
        self.step_size = step

    def init_state(self, instance, gossip, x_init_seed):
        x = initial_iterates(instance.node_count, instance.dimension, x_init_seed)
        grads = _local_gradients(instance, x, _SERIAL_MAP)
        return AddOptState(
            X=x,
            y=np.ones(instance.node_count),
            Zhat=x.copy(),
            tracker=grads.copy(),
            grads=grads,
            n=0,
        )

    def step(self, state, instance, gossip, node_map=_SERIAL_MAP):
        a = column_stochastic(gossip.Q)
        x_next = a @ state.X - self.step_size * state.tracker
        y_next = a @ state.y
        zhat_next = x_next / y_next[:, None]
        grads_next = _local_gradients(instance, zhat_next, node_map)
        tracker_next = a @ state.tracker + grads_next - state.grads
        _require_finite(self.name, state.n + 1, x_next, y_next, tracker_next)
        return AddOptState(
            X=x_next,
            y=y_next,
            Zhat=zhat_next,
            tracker=tracker_next,
            grads=grads_next,
            n=state.n + 1,
        )

    def iterates(self, state):
        return state.Zhat

    def tracker(self, state, instance):
        return state.tracker

    def params_dict(self):
        return {"step": self.step_size}


@dataclass(frozen=True)
class PushPullState:
    """Row-stochastic iterate mixing plus column-stochastic gradient tracking."""

    X: np.ndarray
    tracker: np.ndarray
    grads: np.ndarray
    n: int


class PushPullStepper(Stepper):
    """Fixed-step method pulling iterates with ``I - W`` and pushing trackers with ``I - Q``."""

    name = "pushpull"

    def __init__(self, step: float = 0.01):
        if not (math.isfinite(step) and step > 0):
            raise ValueError("step must be finite and > 0")
        self.step_size = step

    def init_state(self, instance, gossip, x_init_seed):
        x = initial_iterates(instance.node_count, instance.dimension, x_init_seed)
        grads = _local_gradients(instance, x, _SERIAL_MAP)
        return PushPullState(X=x, tracker=grads.copy(), grads=grads, n=0)

    def step(self, state, instance, gossip, node_map=_SERIAL_MAP):
        r = row_stochastic(gossip.W)
        c = column_stochastic(gossip.Q)
        x_next = r @ (state.X - self.step_size * state.tracker)
        grads_next = _local_gradients(instance, x_next, node_map)
        tracker_next = c @ state.tracker + grads_next - state.grads
        _require_finite(self.name, state.n + 1, x_next, tracker_next)
        return PushPullState(X=x_next, tracker=tracker_next, grads=grads_next, n=state.n + 1)

    def tracker(self, state, instance):
        return state.tracker

    def params_dict(self):
        return {"step": self.step_size}


@dataclass(frozen=True)
class ProjDgdState:
    X: np.ndarray
    n: int


class ProjectedDgdStepper(Stepper):
    """Diminishing-step projected gradient descent over the row-stochastic mix."""

    name = "proj_dgd"

    def __init__(self, step_scale: float = 1.0):
        if not (math.isfinite(step_scale) and step_scale > 0):
            raise ValueError("step_scale must be finite and > 0")
        self.step_scale = step_scale

    def init_state(self, instance, gossip, x_init_seed):
        return ProjDgdState(
            X=initial_iterates(instance.node_count, instance.dimension, x_init_seed), n=0
        )

    def step(self, state, instance, gossip, node_map=_SERIAL_MAP):
        r = row_stochastic(gossip.W)
        step = self.step_scale / math.sqrt(state.n + 1)
        grads = _local_gradients(instance, state.X, node_map)
        pre = r @ state.X - step * grads
        x_next = _local_projections(instance, pre, node_map)
        _require_finite(self.name, state.n + 1, x_next)
        return ProjDgdState(X=x_next, n=state.n + 1)

    def tracker(self, state, instance):
        return _local_gradients(instance, state.X, _SERIAL_MAP)

    def params_dict(self):
        return {"c": self.step_scale}


STEPPER_REGISTRY: dict[str, Callable[[Mapping[str, float]], Stepper]] = {
    "dagp": lambda p: DagpStepper(
        DagpHyperParams(
            mu=float(p.get("mu", 0.1)),
            rho=float(p.get("rho", 0.1)),
            alpha=float(p.get("alpha", 0.1)),
        )
    ),
    "ddps": lambda p: DdpsStepper(step_scale=float(p.get("c", 1.0))),
    "addopt": lambda p: AddOptStepper(step=float(p.get("step", 0.01))),
    "pushpull": lambda p: PushPullStepper(step=float(p.get("step", 0.01))),
    "proj_dgd": lambda p: ProjectedDgdStepper(step_scale=float(p.get("c", 1.0))),
}

_KNOWN_PARAMS = {
    "dagp": {"mu", "rho", "alpha"},
    "ddps": {"c"},
    "addopt": {"step"},
    "pushpull": {"step"},
    "proj_dgd": {"c"},
}


def known_params(name: str) -> set[str]:
    return set(_KNOWN_PARAMS[name])


def make_stepper(name: str, params: Mapping[str, float] | None = None) -> Stepper:
    """Instantiate a registered method by name with its hyperparameters."""
    if name not in STEPPER_REGISTRY:
        raise ValueError(f"unknown algorithm {name!r}; known: {sorted(STEPPER_REGISTRY)}")
    params = dict(params or {})
    unknown = set(params) - _KNOWN_PARAMS[name]
    if unknown:
        raise ValueError(f"unknown hyperparameters for {name}: {sorted(unknown)}")
    return STEPPER_REGISTRY[name](params)


# ---------------------------------------------------------------------------
# Run loop
# ---------------------------------------------------------------------------


def _make_record(
    n: int,
    x: np.ndarray,
    tracker: np.ndarray,
    avg_x: np.ndarray,
    instance: ProblemInstance,
    reference: ReferenceSolution | None,
    dykstra_iters: int,
    dykstra_tol: float,
) -> TraceRecord:
    x_bar = mean_iterate(x)
    avg_bar = mean_iterate(avg_x)
    objective = instance.total_value(x_bar)
    if instance.unconstrained:
        feas = 0.0
        avg_feas = 0.0
    else:
        feas = feasibility_gap(x_bar, instance.constraint_sets, dykstra_iters, dykstra_tol)
        avg_feas = feasibility_gap(avg_bar, instance.constraint_sets, dykstra_iters, dykstra_tol)
    cons = consensus_error(x)
    gsum = grad_sum_norm(tracker)
    if reference is None:
        opt_gap = math.nan
        avg_obj_gap = math.nan
    else:
        opt_gap = objective - reference.f_star
        avg_obj_gap = abs(
            float(sum(instance.functions[v].value(avg_x[v]) for v in range(instance.node_count)))
            - reference.f_star
        )
    avg_cons = consensus_error(avg_x)
    return TraceRecord(
        n=n,
        objective=objective,
        feasibility_gap=feas,
        consensus_error=cons,
        grad_sum_norm=gsum,
        optimality_gap=opt_gap,
        avg_objective_gap=avg_obj_gap,
        avg_consensus_error=avg_cons,
        avg_feasibility_gap=avg_feas,
    )


def run(
    stepper: Stepper,
    state,
    instance: ProblemInstance,
    gossip: GossipPair,
    iters: int,
    trace_every: int = 1,
    *,
    reference: ReferenceSolution | None = None,
    workers: int = 1,
    dykstra_iters: int = 500,
    dykstra_tol: float = 1e-9,
    metadata: dict | None = None,
) -> Trace:
    """Advance a stepper for ``iters`` rounds, sampling metrics along the way.

    Records land at round 0 and every ``trace_every`` rounds thereafter
    (``floor(iters / trace_every) + 1`` records total).  A running sum of the
    iterates feeds the running-average diagnostics: the record at round ``n``
    evaluates the mean of iterates from rounds ``0 .. n-1``.  Deterministic:
    identical inputs give identical traces whatever ``workers`` is.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if trace_every < 1:
        raise ValueError("trace_every must be >= 1")
    records: list[TraceRecord] = []
    sum_x = np.zeros_like(stepper.iterates(state))
    with NodeMap(workers) as node_map:
        records.append(
            _make_record(
                0,
                stepper.iterates(state),
                stepper.tracker(state, instance),
                stepper.iterates(state),
                instance,
                reference,
                dykstra_iters,
                dykstra_tol,
            )
        )
        for k in range(iters):
            sum_x += stepper.iterates(state)
            state = stepper.step(state, instance, gossip, node_map)
            n = k + 1
            if n % trace_every == 0:
                records.append(
                    _make_record(
                        n,
                        stepper.iterates(state),
                        stepper.tracker(state, instance),
                        sum_x / n,
                        instance,
                        reference,
                        dykstra_iters,
                        dykstra_tol,
                    )
                )
    meta = {
        "algorithm": stepper.name,
        "hyperparameters": stepper.params_dict(),
        "iterations": iters,
        "trace_every": trace_every,
        "workers": workers,
    }
    if metadata:
        meta.update(metadata)
    return Trace(records=records, metadata=meta)
