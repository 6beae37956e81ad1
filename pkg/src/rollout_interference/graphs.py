"""Interference graphs: undirected simple graphs over experiment units.

A graph defines, for every unit, the neighborhood whose treatments can spill
over onto that unit's outcome.  Units are dense integers ``0..n-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse


@dataclass(frozen=True)
class InterferenceGraph:
    """Immutable undirected simple graph.

    Attributes:
        n: number of units.
        edge_array: (m, 2) int array of unordered edges with ``i < j`` per row,
            sorted lexicographically.
    """

    n: int
    edge_array: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"graph needs at least one unit, got n={self.n}")
        edges = np.asarray(self.edge_array, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loops are not allowed")
            edges = np.sort(edges, axis=1)
            order = np.lexsort((edges[:, 1], edges[:, 0]))
            edges = edges[order]
            dup = np.all(edges[1:] == edges[:-1], axis=1)
            if np.any(dup):
                raise ValueError("duplicate edges are not allowed")
        object.__setattr__(self, "edge_array", edges)

    @property
    def n_edges(self) -> int:
        return self.edge_array.shape[0]

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric 0/1 adjacency in CSR form (column indices sorted)."""
        e = self.edge_array
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(rows.size, dtype=np.float64)
        mat = sparse.coo_matrix((data, (rows, cols)), shape=(self.n, self.n))
        out = mat.tocsr()
        out.sort_indices()
        return out

    @cached_property
    def degrees(self) -> np.ndarray:
        degs = np.zeros(self.n, dtype=np.int64)
        if self.n_edges:
            np.add.at(degs, self.edge_array[:, 0], 1)
            np.add.at(degs, self.edge_array[:, 1], 1)
        return degs

    @cached_property
    def two_hop_adjacency(self) -> sparse.csr_matrix:
        """0/1 matrix of pairs at shortest-path distance exactly two.

        Excludes direct neighbors and the unit itself, so first- and
        second-order exposure columns are never mechanically collinear.
        """
        a = self.adjacency.astype(bool)
        reach2 = (a @ a).astype(bool).tolil()
        reach2.setdiag(False)
        reach2 = reach2.tocsr()
        out = (reach2.astype(np.int8) - reach2.multiply(a).astype(np.int8))
        out = out.astype(np.float64).tocsr()
        out.eliminate_zeros()
        out.sort_indices()
        return out

    def neighbors(self, i: int) -> np.ndarray:
        """Sorted direct neighbors of unit ``i``."""
        if not 0 <= i < self.n:
            raise ValueError(f"unit id {i} out of range for n={self.n}")
        a = self.adjacency
        return a.indices[a.indptr[i]:a.indptr[i + 1]].copy()

    def edge_set(self) -> set[tuple[int, int]]:
        """Edges as a set of (i, j) tuples with i < j. Intended for small graphs."""
        return {(int(i), int(j)) for i, j in self.edge_array}


def generate_erdos_renyi(n: int, p: float, seed: int) -> InterferenceGraph:
    """Sample a G(n, p) graph: each unordered pair is an edge with probability p.

    Deterministic given ``seed``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    mask = rng.random(iu.size) < p
    edges = np.column_stack((iu[mask], ju[mask]))
    return InterferenceGraph(n=n, edge_array=edges)


def generate_complete(n: int) -> InterferenceGraph:
    """All-pairs graph; every unit has degree n - 1."""
    if n < 2:
        raise ValueError(f"complete graph needs n >= 2, got {n}")
    iu, ju = np.triu_indices(n, k=1)
    return InterferenceGraph(n=n, edge_array=np.column_stack((iu, ju)))


def generate_edge_subgraph(graph: InterferenceGraph, keep_fraction: float,
                           seed: int) -> InterferenceGraph:
    """Keep each edge of ``graph`` independently with probability ``keep_fraction``.

    Used to build a competing interference network that shares most of the
    structure of the original (e.g. an alternative folding of the same
    market graph that drops low-activity links).
    """
    if not 0.0 <= keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction must be in [0, 1], got {keep_fraction}")
    rng = np.random.default_rng(seed)
    mask = rng.random(graph.n_edges) < keep_fraction
    return InterferenceGraph(n=graph.n, edge_array=graph.edge_array[mask])


def khop_neighbors(graph: InterferenceGraph, i: int, k: int) -> set[int]:
    """Units at shortest-path distance exactly ``k`` from unit ``i``.

    ``k=1`` is the adjacency list; ``k=2`` is the neighbors-of-neighbors set
    with ``i`` and its direct neighbors removed.
    """
    if k < 1:
        raise ValueError(f"hop count must be >= 1, got {k}")
    if not 0 <= i < graph.n:
        raise ValueError(f"unit id {i} out of range for n={graph.n}")
    seen = {i}
    frontier = {i}
    for _ in range(k):
        if not frontier:
            return set()
        nxt: set[int] = set()
        for u in frontier:
            nxt.update(int(v) for v in graph.neighbors(u))
        frontier = nxt - seen
        seen |= frontier
    return frontier


def read_edge_list(path: str | Path, n: int | None = None) -> InterferenceGraph:
    """Load a graph from a text file of ``i j`` lines (0-based unit ids).

    Blank lines and ``#`` comments are skipped.  Self-loops and duplicate
    edges (in either orientation) are rejected.
    """
    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    max_id = -1
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'i j', got {raw!r}")
        i, j = int(parts[0]), int(parts[1])
        if i == j:
            raise ValueError(f"{path}:{lineno}: self-loop {i}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValueError(f"{path}:{lineno}: duplicate edge {key}")
        seen.add(key)
        edges.append(key)
        max_id = max(max_id, key[1])
    n_units = n if n is not None else max_id + 1
    if n_units < 1:
        raise ValueError("edge list defines no units")
    return InterferenceGraph(n=n_units,
                             edge_array=np.asarray(edges, dtype=np.int64).reshape(-1, 2))
