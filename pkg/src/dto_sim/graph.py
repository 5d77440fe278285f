"""Undirected communication topology: Laplacian, incidence and connectivity."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import GraphError


@dataclass(frozen=True)
class Graph:
    """Fixed undirected graph on nodes ``1..node_count``.

    Edges are stored once, oriented from the lower to the higher node index,
    and sorted. Use :func:`build_graph` rather than the constructor.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    _neighbors: tuple[tuple[int, ...], ...] = field(repr=False, compare=False, default=())

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> tuple[int, ...]:
        """Neighbors of node ``i`` (0-based), in ascending order."""
        return self._neighbors[i]

    @property
    def laplacian(self) -> np.ndarray:
        return laplacian(self)

    @property
    def incidence(self) -> np.ndarray:
        return incidence(self)

    @property
    def is_connected(self) -> bool:
        return is_connected(self)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.node_count, self.node_count))
        for i, j in self.edges:
            a[i - 1, j - 1] = a[j - 1, i - 1] = 1.0
        return a


def build_graph(node_count: int, edges: Iterable[Iterable[int]]) -> Graph:
    """Validate and canonicalize an undirected edge list (1-based node labels)."""
    if isinstance(node_count, bool) or int(node_count) != node_count or node_count < 1:
        raise GraphError(f"node_count must be a positive integer, got {node_count!r}")
    node_count = int(node_count)
    seen: set[tuple[int, int]] = set()
    for edge in edges:
        pair = tuple(edge)
        if len(pair) != 2:
            raise GraphError(f"edge must be a node pair, got {pair!r}")
        i, j = (int(v) for v in pair)
        if not (1 <= i <= node_count and 1 <= j <= node_count):
            raise GraphError(f"edge {pair!r} has a node outside 1..{node_count}")
        if i == j:
            raise GraphError(f"self-loop at node {i}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphError(f"duplicate edge {key!r}")
        seen.add(key)
    ordered = tuple(sorted(seen))
    nbrs: list[list[int]] = [[] for _ in range(node_count)]
    for i, j in ordered:
        nbrs[i - 1].append(j - 1)
        nbrs[j - 1].append(i - 1)
    return Graph(node_count, ordered, tuple(tuple(sorted(n)) for n in nbrs))


def ring(node_count: int) -> Graph:
    edges = [(i, i + 1) for i in range(1, node_count)]
    if node_count > 2:
        edges.append((node_count, 1))
    return build_graph(node_count, edges)


def path(node_count: int) -> Graph:
    return build_graph(node_count, [(i, i + 1) for i in range(1, node_count)])


def laplacian(g: Graph) -> np.ndarray:
    lap = -g.adjacency()
    lap[np.diag_indices_from(lap)] = [len(g.neighbors(i)) for i in range(g.node_count)]
    return lap


def incidence(g: Graph) -> np.ndarray:
    """Node-by-edge incidence matrix: -1 at the tail (lower index), +1 at the head."""
    d = np.zeros((g.node_count, g.edge_count))
    for k, (i, j) in enumerate(g.edges):
        d[i - 1, k] = -1.0
        d[j - 1, k] = 1.0
    return d


def is_connected(g: Graph) -> bool:
    seen = {0}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in g.neighbors(i):
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == g.node_count
