"""Range-limited communication graphs and set-union gossip."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class CommGraph:
    """Undirected disk graph: ``i ~ j`` iff ``|p_i - p_j| <= r_c``."""

    n: int
    edges: frozenset
    r_c: float
    adjacency: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def from_edges(cls, n: int, edges, r_c: float = float("inf")) -> "CommGraph":
        adj = np.zeros((n, n), dtype=bool)
        norm = set()
        for i, j in edges:
            if i == j:
                raise NetworkError("self-loops are not allowed")
            if not (0 <= i < n and 0 <= j < n):
                raise NetworkError(f"edge ({i}, {j}) out of range for n={n}")
            a, b = min(i, j), max(i, j)
            norm.add((a, b))
            adj[a, b] = adj[b, a] = True
        adj.setflags(write=False)
        return cls(n, frozenset(norm), r_c, adj)

    @property
    def degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)


def build_graph(positions, r_c: float) -> CommGraph:
    if not r_c > 0:
        raise NetworkError(f"communication range must be positive, got {r_c}")
    pts = np.asarray(positions, dtype=float).reshape(-1, 3)
    n = len(pts)
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    adj = d2 <= r_c * r_c
    np.fill_diagonal(adj, False)
    adj.setflags(write=False)
    ii, jj = np.nonzero(np.triu(adj))
    return CommGraph(n, frozenset(zip(ii.tolist(), jj.tolist())), float(r_c), adj)


def neighbor_set(g: CommGraph, i: int) -> set[int]:
    if not 0 <= i < g.n:
        raise NetworkError(f"agent index {i} out of range for n={g.n}")
    return set(np.flatnonzero(g.adjacency[i]).tolist())


def _components(adj: np.ndarray) -> int:
    n = len(adj)
    seen = np.zeros(n, dtype=bool)
    count = 0
    for start in range(n):
        if seen[start]:
            continue
        count += 1
        stack = [start]
        seen[start] = True
        while stack:
            u = stack.pop()
            for w in np.flatnonzero(adj[u] & ~seen):
                seen[w] = True
                stack.append(int(w))
    return count


def is_connected(g: CommGraph) -> bool:
    if g.n < 1:
        raise NetworkError("graph has no agents")
    return _components(np.asarray(g.adjacency)) == 1


def union_graph(graphs: Sequence[CommGraph]) -> CommGraph:
    if not graphs:
        raise NetworkError("empty window")
    n = graphs[0].n
    if any(g.n != n for g in graphs):
        raise NetworkError("graphs in a window must have the same number of agents")
    edges = frozenset().union(*(g.edges for g in graphs))
    return CommGraph.from_edges(n, edges, max(g.r_c for g in graphs))


def union_connected_over_window(graphs: Sequence[CommGraph]) -> bool:
    return is_connected(union_graph(graphs))


@dataclass(frozen=True)
class GossipRecord:
    visited_vertices: frozenset = frozenset()
    detected_targets: frozenset = frozenset()
    sender: int = 0
    tick: int = 0

    def merge(self, other: "GossipRecord") -> "GossipRecord":
        return GossipRecord(
            self.visited_vertices | other.visited_vertices,
            self.detected_targets | other.detected_targets,
            self.sender,
            max(self.tick, other.tick),
        )


def gossip_exchange(records: Sequence[GossipRecord], g: CommGraph) -> list[GossipRecord]:
    """One synchronous round: everyone unions in its neighbours' tick-K records."""
    if len(records) != g.n:
        raise NetworkError(f"expected {g.n} records, got {len(records)}")
    out = []
    for i, rec in enumerate(records):
        merged = rec
        for j in np.flatnonzero(g.adjacency[i]):
            merged = merged.merge(records[j])
        out.append(merged)
    return out
