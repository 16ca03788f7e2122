"""Undirected communication graphs: ring, 2-D grid and edge-list input."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import InvalidTopologyError


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0 .. n-1``.

    Edges are stored as sorted ``(i, j)`` tuples with ``i < j``.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidTopologyError(f"node count must be positive, got {self.n}")
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise InvalidTopologyError(f"self-loop on node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InvalidTopologyError(f"edge ({i}, {j}) references a node outside 0..{self.n - 1}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise InvalidTopologyError(f"duplicate edge {key}")
            seen.add(key)
        object.__setattr__(self, "edges", tuple(sorted(seen)))

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self, i: int) -> list[int]:
        out = [j for a, j in self.edges if a == i]
        out += [a for a, j in self.edges if j == i]
        return sorted(out)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for i, j in self.edges:
            A[i, j] = A[j, i] = 1.0
        return A


@dataclass(frozen=True)
class ConnectivityReport:
    connected: bool
    unreachable: frozenset[int]

    def __bool__(self):
        return self.connected


def ring(n: int) -> Graph:
    """Cycle graph with edges ``{i, (i+1) mod n}``."""
    if n < 3:
        raise InvalidTopologyError(f"a ring needs at least 3 nodes, got {n}")
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)), name=f"ring{n}")


def grid(side: int) -> Graph:
    """``side x side`` lattice without wraparound; node ``(r, c)`` is ``r*side + c``."""
    if side < 2:
        raise InvalidTopologyError(f"a grid needs side >= 2, got {side}")
    edges = []
    for r in range(side):
        for c in range(side):
            i = r * side + c
            if c + 1 < side:
                edges.append((i, i + 1))
            if r + 1 < side:
                edges.append((i, i + side))
    return Graph(side * side, tuple(edges), name=f"grid{side * side}")


def from_edges(edges, n: int | None = None) -> Graph:
    edges = [(int(i), int(j)) for i, j in edges]
    if n is None:
        n = 1 + max((max(e) for e in edges), default=-1)
    return Graph(n, tuple(edges))


def read_edge_list(path) -> Graph:
    """Parse a whitespace-separated ``i j`` edge list (0-indexed, ``#`` comments)."""
    edges = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidTopologyError(f"{path}:{lineno}: expected 'i j', got {line!r}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise InvalidTopologyError(f"{path}:{lineno}: non-integer node id in {line!r}") from exc
    return from_edges(edges)


def write_edge_list(graph: Graph, path) -> None:
    Path(path).write_text("".join(f"{i} {j}\n" for i, j in graph.edges))


def validate(graph: Graph) -> ConnectivityReport:
    """Breadth-first search from node 0."""
    adj = [[] for _ in range(graph.n)]
    for i, j in graph.edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    unreachable = frozenset(set(range(graph.n)) - seen)
    return ConnectivityReport(not unreachable, unreachable)


def require_connected(graph: Graph) -> None:
    report = validate(graph)
    if not report.connected:
        raise InvalidTopologyError(
            f"graph is disconnected; unreachable from node 0: {sorted(report.unreachable)}"
        )
