"""Shared independent oracles for the test suite.

These deliberately avoid the library's own code paths: finite differences
for gradients, breadth-first search for reachability, and a dual quadratic
program for polyhedron projections.
"""

from __future__ import annotations

import numpy as np
from scipy import optimize


def finite_difference_gradient(f, x, h=1e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        grad[i] = (f(x + step) - f(x - step)) / (2.0 * h)
    return grad


def bfs_reaches_all(succ: list[list[int]], start: int, count: int) -> bool:
    seen = [False] * count
    seen[start] = True
    frontier = [start]
    while frontier:
        nxt = []
        for v in frontier:
            for u in succ[v]:
                if not seen[u]:
                    seen[u] = True
                    nxt.append(u)
        frontier = nxt
    return all(seen)


def brute_force_strongly_connected(graph) -> bool:
    """All-pairs reachability via BFS from every node."""
    succ = [[] for _ in range(graph.node_count)]
    for i, j in graph.edges:
        succ[i].append(j)
    return all(bfs_reaches_all(succ, s, graph.node_count) for s in range(graph.node_count))


def project_polyhedron_qp(c_matrix: np.ndarray, d: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Exact projection onto {y : C y <= d} via the bound-constrained dual.

    Minimizes 0.5 |C^T lam|^2 - lam . (C x - d) over lam >= 0 with an exact
    gradient, then recovers y = x - C^T lam.
    """
    c_matrix = np.asarray(c_matrix, dtype=float)
    d = np.asarray(d, dtype=float)
    x = np.asarray(x, dtype=float)
    slack = c_matrix @ x - d

    def dual(lam):
        r = c_matrix.T @ lam
        return 0.5 * float(r @ r) - float(lam @ slack), c_matrix @ r - slack

    res = optimize.minimize(
        dual,
        np.zeros(d.size),
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, None)] * d.size,
        options={"ftol": 1e-18, "gtol": 1e-14, "maxiter": 20_000},
    )
    return x - c_matrix.T @ res.x
