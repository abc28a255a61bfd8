"""Gossip matrices: the zero row-sum W and zero column-sum Q pair, plus checks."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import subspace_angles

from .graphs import DirectedGraph, laplacians

__all__ = [
    "GossipPair",
    "KernelReport",
    "DegenerateGraphError",
    "build_gossip_pair",
    "row_stochastic",
    "column_stochastic",
    "verify_kernel_conditions",
    "export_matrix_csv",
]

# Relative singular-value cutoff used to count numerically-zero directions.
_NULL_CUTOFF = 1e-10


class DegenerateGraphError(ValueError):
    """Raised when a multi-node graph has no edges to average over."""


@dataclass(frozen=True)
class GossipPair:
    """Scaled Laplacian pair for a directed graph.

    ``W`` has zero row sums (consensus-preserving averaging) and ``Q`` has
    zero column sums (sum-preserving tracking).  Off-diagonal nonzeros match
    the graph's adjacency pattern and all entries are bounded by 1 in
    magnitude thanks to the ``1 / (2 * d_max)`` scaling.
    """

    W: np.ndarray
    Q: np.ndarray
    graph: DirectedGraph


def build_gossip_pair(graph: DirectedGraph) -> GossipPair:
    """Build ``W = L_in / (2 d_max_in)`` and ``Q = L_out / (2 d_max_out)``.

    ``d_max_in`` / ``d_max_out`` are the largest diagonal entries of the
    respective Laplacians.  A single-node graph yields ``W = Q = [[0]]``.
    """
    l_in, l_out = laplacians(graph)
    if graph.node_count == 1:
        zero = np.zeros((1, 1))
        return GossipPair(zero, zero.copy(), graph)
    d_in = float(np.max(np.diag(l_in)))
    d_out = float(np.max(np.diag(l_out)))
    if d_in == 0.0 or d_out == 0.0:
        raise DegenerateGraphError(
            f"graph with M={graph.node_count} has max degree 0; cannot scale"
        )
    return GossipPair(l_in / (2.0 * d_in), l_out / (2.0 * d_out), graph)


def row_stochastic(w: np.ndarray) -> np.ndarray:
    """``I - W``: nonnegative with unit row sums for W from :func:`build_gossip_pair`."""
    return np.eye(w.shape[0]) - w


def column_stochastic(q: np.ndarray) -> np.ndarray:
    """``I - Q``: nonnegative with unit column sums for Q from :func:`build_gossip_pair`."""
    return np.eye(q.shape[0]) - q


@dataclass(frozen=True)
class KernelReport:
    """Outcome of the null-space compatibility checks for a gossip pair.

    Diagnostic only: carries pass/fail flags and never aborts.  The tracking
    analysis needs ``ker(Q) = ker(W^T)`` and ``ker(W) = span{1}``; the
    Laplacian recipe guarantees the latter on strongly connected graphs but
    not the former on unbalanced ones, so both are measured per graph.
    """

    dim_ker_w: int
    ker_w_is_consensus: bool
    dim_ker_q: int
    dim_ker_wt: int
    kernels_match: bool
    max_principal_angle: float
    qw_min_ratio: float
    spot_checks: int
    tolerance: float

    @property
    def all_passed(self) -> bool:
        return self.ker_w_is_consensus and self.kernels_match

    def to_dict(self) -> dict:
        return {
            "dim_ker_w": self.dim_ker_w,
            "ker_w_is_consensus": self.ker_w_is_consensus,
            "dim_ker_q": self.dim_ker_q,
            "dim_ker_wt": self.dim_ker_wt,
            "kernels_match": self.kernels_match,
            "max_principal_angle": self.max_principal_angle,
            "qw_min_ratio": self.qw_min_ratio,
            "spot_checks": self.spot_checks,
            "tolerance": self.tolerance,
            "all_passed": self.all_passed,
        }


def _null_space(a: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical null space of ``a``."""
    _, s, vh = np.linalg.svd(a)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(a.shape[1])
    rank = int(np.sum(s > _NULL_CUTOFF * s[0]))
    return vh[rank:].T.conj()


def verify_kernel_conditions(
    pair: GossipPair, tol: float = 1e-8, spot_checks: int = 8, seed: int = 0
) -> KernelReport:
    """Measure the null-space conditions the tracking analysis relies on.

    Checks (a) whether ``ker(W) = span{1}``, (b) whether ``ker(Q)`` equals
    ``ker(W^T)`` by comparing orthonormal null-space bases through principal
    angles (match iff dimensions agree and the largest angle is below
    ``tol``), and (c) that ``Q W x`` stays away from zero for random
    ``x`` orthogonal to the all-ones vector, which the kernel-match
    condition predicts.
    """
    w, q = pair.W, pair.Q
    m = w.shape[0]

    ker_w = _null_space(w)
    dim_ker_w = ker_w.shape[1]
    ones = np.ones(m)
    ker_w_is_consensus = dim_ker_w == 1 and float(
        np.max(np.abs(w @ ones))
    ) <= 1e-12 * max(1.0, float(np.max(np.abs(w))))

    ker_q = _null_space(q)
    ker_wt = _null_space(w.T)
    if ker_q.shape[1] != ker_wt.shape[1] or ker_q.shape[1] == 0:
        kernels_match = ker_q.shape[1] == ker_wt.shape[1]
        max_angle = 0.0 if kernels_match else float(np.pi / 2)
    else:
        angles = subspace_angles(ker_q, ker_wt)
        max_angle = float(np.max(angles)) if angles.size else 0.0
        kernels_match = max_angle < tol

    rng = np.random.default_rng(seed)
    min_ratio = np.inf
    for _ in range(spot_checks):
        x = rng.standard_normal(m)
        x -= x.mean()
        nrm = np.linalg.norm(x)
        if nrm < 1e-12:
            continue
        min_ratio = min(min_ratio, float(np.linalg.norm(q @ (w @ x)) / nrm))
    if not np.isfinite(min_ratio):
        min_ratio = 0.0

    return KernelReport(
        dim_ker_w=dim_ker_w,
        ker_w_is_consensus=bool(ker_w_is_consensus),
        dim_ker_q=ker_q.shape[1],
        dim_ker_wt=ker_wt.shape[1],
        kernels_match=bool(kernels_match),
        max_principal_angle=max_angle,
        qw_min_ratio=min_ratio,
        spot_checks=spot_checks,
        tolerance=tol,
    )


def export_matrix_csv(matrix: np.ndarray, path: str | Path) -> None:
    """Write a matrix as row-major CSV at full double precision."""
    lines = [",".join("%.17g" % v for v in row) for row in np.atleast_2d(matrix)]
    Path(path).write_text("\n".join(lines) + "\n")
