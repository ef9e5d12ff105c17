"""Undirected oriented network graphs and their incidence matrices."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import AssumptionViolation, ScenarioError

__all__ = ["NetworkGraph", "EdgePartition", "build_graph", "is_connected",
           "partition_edges"]


@dataclass(frozen=True)
class NetworkGraph:
    """Oriented graph with ``n`` nodes and edges stored 0-based.

    ``edges[k] = (head, tail)`` means node ``head`` is the positive end of
    edge ``k`` and ``tail`` the negative end.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def B(self) -> np.ndarray:
        B = np.zeros((self.n, self.m))
        for k, (head, tail) in enumerate(self.edges):
            B[head, k] = 1.0
            B[tail, k] = -1.0
        B.flags.writeable = False
        return B

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs = [[] for _ in range(self.n)]
        for head, tail in self.edges:
            nbrs[head].append(tail)
            nbrs[tail].append(head)
        return tuple(tuple(a) for a in nbrs)

    @cached_property
    def partition(self) -> "EdgePartition":
        return partition_edges(self)

    def to_dict(self) -> dict:
        return {"nodes": self.n,
                "edges": [[h + 1, t + 1] for h, t in self.edges]}


@dataclass(frozen=True)
class EdgePartition:
    """Split of the edge set into a spanning tree and the redundant edges.

    ``a_indices`` index the columns of ``B_a`` (full column rank ``n - 1``),
    ``b_indices`` the remaining ``m - n + 1`` columns. ``perm`` is the
    concatenation of the two, i.e. the column relabeling ``B[:, perm] =
    [B_a | B_b]``.
    """

    a_indices: tuple[int, ...]
    b_indices: tuple[int, ...]

    @property
    def perm(self) -> tuple[int, ...]:
        return self.a_indices + self.b_indices


def build_graph(n: int, edges) -> NetworkGraph:
    """Build a graph from 1-based ``(head, tail)`` pairs.

    Parameters
    ----------
    n : int
        Number of nodes, at least 1.
    edges : iterable of pairs
        ``(head, tail)`` with ``1 <= head, tail <= n`` and ``head != tail``.
        ``head`` is the positive end of the edge.

    Examples
    --------
    >>> build_graph(2, [(2, 1)]).B
    array([[-1.],
           [ 1.]])
    """
    if int(n) != n or n < 1:
        raise ScenarioError(f"node count must be a positive integer, got {n!r}")
    n = int(n)
    out = []
    for k, pair in enumerate(edges):
        try:
            head, tail = (int(v) for v in pair)
        except (TypeError, ValueError):
            raise ScenarioError(f"edge {k + 1}: expected a pair of node indices, got {pair!r}")
        if not (1 <= head <= n and 1 <= tail <= n):
            raise ScenarioError(f"edge {k + 1}: node index out of range 1..{n}: {pair!r}")
        if head == tail:
            raise ScenarioError(f"edge {k + 1}: self-loop at node {head}")
        out.append((head - 1, tail - 1))
    return NetworkGraph(n, tuple(out))


def is_connected(g: NetworkGraph) -> bool:
    """Breadth-first search from node 0."""
    seen = np.zeros(g.n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in g.adjacency[i]:
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


def partition_edges(g: NetworkGraph) -> EdgePartition:
    """Pick a spanning tree greedily, scanning the edges in input order.

    An edge joins the tree unless it closes a cycle with the edges already
    taken (union-find). When the first ``n - 1`` edges of the input form a
    spanning tree they are exactly the tree that is returned.
    """
    if not is_connected(g):
        raise AssumptionViolation(
            "graph is not connected; the edge regulators need a connected network")
    parent = list(range(g.n))

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    a, b = [], []
    for k, (head, tail) in enumerate(g.edges):
        rh, rt = root(head), root(tail)
        if rh == rt:
            b.append(k)
        else:
            parent[rh] = rt
            a.append(k)
    return EdgePartition(tuple(a), tuple(b))
