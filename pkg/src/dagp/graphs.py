"""Directed communication graphs: generators, neighborhoods, Laplacians."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "DirectedGraph",
    "random_strongly_connected",
    "strongly_connected_components",
    "is_strongly_connected",
    "in_neighbors",
    "out_neighbors",
    "laplacians",
    "save_edge_list",
    "load_edge_list",
]


@dataclass(frozen=True)
class DirectedGraph:
    """Simple directed graph on nodes ``0 .. node_count - 1``.

    An edge ``(i, j)`` means node ``i`` receives from node ``j``, so row
    ``i`` of the adjacency matrix lists the senders node ``i`` can hear.
    Self-loops are rejected and the edge set is deduplicated and immutable.
    """

    node_count: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError(f"node_count must be >= 1, got {self.node_count}")
        object.__setattr__(self, "edges", frozenset(map(tuple, self.edges)))
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop ({i},{i}) not allowed")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise ValueError(f"edge ({i},{j}) out of range for M={self.node_count}")

    def adjacency(self) -> np.ndarray:
        """0/1 adjacency matrix A with ``A[i, j] = 1`` iff ``(i, j)`` is an edge."""
        a = np.zeros((self.node_count, self.node_count))
        for i, j in self.edges:
            a[i, j] = 1.0
        return a

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def random_strongly_connected(node_count: int, edge_prob: float, seed: int) -> DirectedGraph:
    """Random strongly connected digraph.

    Seeds a random directed Hamiltonian cycle (which alone guarantees strong
    connectivity), then adds every remaining ordered pair independently with
    probability ``edge_prob``.  Deterministic for a fixed ``seed``.
    """
    if node_count < 1:
        raise ValueError("node_count must be >= 1")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    order = rng.permutation(node_count)
    edges: set[tuple[int, int]] = set()
    if node_count > 1:
        for k in range(node_count):
            sender = int(order[k])
            receiver = int(order[(k + 1) % node_count])
            edges.add((receiver, sender))
    # One uniform draw per ordered pair, in fixed row-major order.
    draws = rng.random((node_count, node_count))
    for i in range(node_count):
        for j in range(node_count):
            if i != j and draws[i, j] < edge_prob:
                edges.add((i, j))
    return DirectedGraph(node_count, frozenset(edges))


def _successors(g: DirectedGraph) -> list[list[int]]:
    succ: list[list[int]] = [[] for _ in range(g.node_count)]
    for i, j in g.edges:
        succ[i].append(j)
    for lst in succ:
        lst.sort()
    return succ


def strongly_connected_components(g: DirectedGraph) -> list[list[int]]:
    """Strongly connected components via iterative Tarjan.

    Returns the components as sorted node lists, in the order Tarjan emits
    them (reverse topological order of the condensation).
    """
    succ = _successors(g)
    m = g.node_count
    index = [-1] * m
    lowlink = [0] * m
    on_stack = [False] * m
    stack: list[int] = []
    components: list[list[int]] = []
    counter = 0

    for root in range(m):
        if index[root] != -1:
            continue
        work: list[tuple[int, int]] = [(root, 0)]
        while work:
            v, child_pos = work[-1]
            if child_pos == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            descended = False
            children = succ[v]
            for pos in range(child_pos, len(children)):
                u = children[pos]
                if index[u] == -1:
                    work[-1] = (v, pos + 1)
                    work.append((u, 0))
                    descended = True
                    break
                if on_stack[u]:
                    lowlink[v] = min(lowlink[v], index[u])
            if descended:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                components.append(sorted(comp))
    return components


def is_strongly_connected(g: DirectedGraph) -> bool:
    """True iff every ordered pair of nodes is joined by a directed path."""
    return len(strongly_connected_components(g)) == 1


def in_neighbors(g: DirectedGraph, v: int) -> set[int]:
    """Nodes ``u`` with an edge ``(v, u)``, i.e. the senders node v hears."""
    _check_node(g, v)
    return {u for (i, u) in g.edges if i == v}


def out_neighbors(g: DirectedGraph, v: int) -> set[int]:
    """Nodes ``u`` with an edge ``(u, v)``, i.e. the receivers node v feeds."""
    _check_node(g, v)
    return {u for (u, j) in g.edges if j == v}


def _check_node(g: DirectedGraph, v: int) -> None:
    if not 0 <= v < g.node_count:
        raise ValueError(f"node {v} out of range for M={g.node_count}")


def laplacians(g: DirectedGraph) -> tuple[np.ndarray, np.ndarray]:
    """In- and out-Laplacians ``(L_in, L_out)``.

    ``L_in = D_in - A`` has zero row sums; ``L_out = D_out - A`` has zero
    column sums.  Entries are exact small integers stored as floats.
    """
    a = g.adjacency()
    l_in = np.diag(a.sum(axis=1)) - a
    l_out = np.diag(a.sum(axis=0)) - a
    return l_in, l_out


def save_edge_list(g: DirectedGraph, path: str | Path) -> None:
    """Write the graph as text: first line ``M``, then one ``i j`` pair per line."""
    lines = [str(g.node_count)]
    lines.extend(f"{i} {j}" for i, j in sorted(g.edges))
    Path(path).write_text("\n".join(lines) + "\n")


def load_edge_list(path: str | Path) -> DirectedGraph:
    """Read a graph written by :func:`save_edge_list`."""
    raw = [ln.strip() for ln in Path(path).read_text().splitlines()]
    rows = [ln for ln in raw if ln]
    if not rows:
        raise ValueError(f"{path}: empty edge-list file")
    try:
        m = int(rows[0])
    except ValueError as exc:
        raise ValueError(f"{path}: first line must be the node count") from exc
    edges = set()
    for ln in rows[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"{path}: malformed edge line {ln!r}")
        edges.add((int(parts[0]), int(parts[1])))
    return DirectedGraph(m, frozenset(edges))
