"""Undirected graphs: loading, statistics, generators and the link-prediction split."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class GraphError(ValueError):
    """Raised for malformed input or impossible graph operations."""


@dataclass(frozen=True)
class Graph:
    """Immutable undirected simple graph in CSR form.

    ``indices[indptr[u]:indptr[u + 1]]`` are the sorted neighbours of ``u``.
    Use :meth:`from_edges` to build one; it validates and deduplicates.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    m: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "m", int(len(self.indices) // 2))
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if n <= 0:
            raise GraphError("graph must have at least one node")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise GraphError("edge endpoint outside [0, n)")
        edges = edges[edges[:, 0] != edges[:, 1]]
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        keys = np.unique(src * n + dst)
        src, dst = keys // n, keys % n
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(n, indptr, dst.astype(np.int64))

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < len(nb) and nb[i] == v)

    def edges(self) -> np.ndarray:
        """Each undirected edge once as a ``(m, 2)`` array with ``u < v``."""
        src = np.repeat(np.arange(self.n), self.degrees)
        mask = src < self.indices
        return np.stack([src[mask], self.indices[mask]], axis=1)

    def edge_keys(self) -> np.ndarray:
        """Sorted ``u * n + v`` for every directed adjacency entry."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        return src * self.n + self.indices

    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(len(self.indices), dtype=np.int64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def is_connected(self) -> bool:
        if self.n == 1:
            return True
        ncomp, _ = sp.csgraph.connected_components(self.adjacency(), directed=False)
        return ncomp == 1

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def __hash__(self):
        return hash((self.n, self.indices.tobytes()))

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class NodeDistribution:
    """Probability distribution over node ids with prefix sums for sampling."""

    weights: np.ndarray
    cumulative: np.ndarray

    @classmethod
    def from_weights(cls, weights) -> "NodeDistribution":
        w = np.asarray(weights, dtype=np.float64)
        total = w.sum()
        if not np.isfinite(total) or total <= 0:
            raise GraphError("node weights are all zero")
        w = w / total
        cum = np.cumsum(w)
        cum[-1] = 1.0
        return cls(w, cum)

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        """i.i.d. draws by binary search on the cumulative weights."""
        r = rng.random(size)
        return np.searchsorted(self.cumulative, r, side="right").clip(max=len(self.weights) - 1)


class LoadedGraph(NamedTuple):
    graph: Graph
    ids: np.ndarray  # ids[internal] = external id
    self_loops: int
    duplicates: int


def load_edge_list(path) -> LoadedGraph:
    """Read a whitespace-separated edge list and remap ids to ``0..n-1``.

    Lines starting with ``#`` and blank lines are ignored. Self-loops and
    repeated edges (in either orientation) are dropped and counted. Internal
    ids follow the sorted order of external ids.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise GraphError(f"cannot read {path}: {exc}") from exc

    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) < 2:
            raise GraphError(f"{path}:{lineno}: expected two node ids, got {s!r}")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise GraphError(f"{path}:{lineno}: node ids must be integers, got {s!r}") from None

    raw = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    loops = raw[:, 0] == raw[:, 1]
    n_loops = int(loops.sum())
    raw = raw[~loops]
    if len(raw) == 0:
        raise GraphError(f"{path}: no edges")
    canon = np.sort(raw, axis=1)
    uniq = np.unique(canon, axis=0)
    n_dup = len(canon) - len(uniq)
    ids, inverse = np.unique(uniq, return_inverse=True)
    graph = Graph.from_edges(len(ids), inverse.reshape(-1, 2))
    if n_loops or n_dup:
        logger.info("%s: dropped %d self-loops and %d duplicate edges", path, n_loops, n_dup)
    return LoadedGraph(graph, ids, n_loops, n_dup)


def save_edge_list(g: Graph, path, ids=None) -> None:
    """Write one ``u v`` line per undirected edge, optionally in external ids."""
    e = g.edges()
    if ids is not None:
        e = np.asarray(ids)[e]
    np.savetxt(path, e, fmt="%d")


def save_id_map(ids, path) -> None:
    ids = np.asarray(ids)
    np.savetxt(path, np.stack([ids, np.arange(len(ids))], axis=1), fmt="%d")


def load_id_map(path) -> np.ndarray:
    tbl = np.loadtxt(path, dtype=np.int64, ndmin=2)
    ids = np.empty(len(tbl), dtype=np.int64)
    ids[tbl[:, 1]] = tbl[:, 0]
    return ids


def local_clustering(g: Graph) -> np.ndarray:
    a = g.adjacency()
    tri2 = np.asarray((a @ a).multiply(a).sum(axis=1)).ravel()
    d = g.degrees.astype(np.float64)
    denom = d * (d - 1)
    out = np.zeros(g.n)
    ok = denom > 0
    out[ok] = tri2[ok] / denom[ok]
    return out


def clustering_coefficient(g: Graph) -> float:
    """Average local clustering coefficient (0 for nodes of degree < 2)."""
    return float(local_clustering(g).mean())


def neg_sampling_distribution(g: Graph, alpha: float) -> NodeDistribution:
    """Degree distribution smoothed by ``alpha``: ``d(v)^alpha / sum_u d(u)^alpha``."""
    if g.n == 0:
        raise GraphError("empty graph")
    d = g.degrees.astype(np.float64)
    w = np.where(d > 0, d ** alpha, 0.0) if alpha > 0 else np.ones(g.n)
    return NodeDistribution.from_weights(w)


def split_link_prediction(g: Graph, fraction: float, seed: int) -> tuple[Graph, np.ndarray]:
    """Remove ``floor(fraction * m)`` random edges while keeping ``g`` connected.

    Candidates are visited in a seeded random order; an edge is skipped if,
    once removed, its endpoints can no longer reach each other. Removing edges
    never turns a bridge back into a non-bridge, so one sweep is enough.
    """
    if not 0 < fraction < 1:
        raise GraphError("fraction must lie in (0, 1)")
    if not g.is_connected():
        raise GraphError("input graph must be connected")
    target = int(math.floor(fraction * g.m))
    edges = g.edges()
    order = np.random.default_rng(seed).permutation(len(edges))
    adj = [set(g.neighbors(u).tolist()) for u in range(g.n)]

    removed = []
    for idx in order:
        if len(removed) == target:
            break
        u, v = int(edges[idx, 0]), int(edges[idx, 1])
        adj[u].discard(v)
        adj[v].discard(u)
        if _reachable(adj, u, v):
            removed.append((u, v))
        else:
            adj[u].add(v)
            adj[v].add(u)
    if len(removed) < target:
        raise GraphError(
            f"could only remove {len(removed)} of {target} edges without disconnecting the graph")

    removed = np.array(removed, dtype=np.int64).reshape(-1, 2)
    keep = np.array([(u, v) for u in range(g.n) for v in adj[u] if u < v], dtype=np.int64)
    return Graph.from_edges(g.n, keep.reshape(-1, 2)), removed


def _reachable(adj: list[set], src: int, dst: int) -> bool:
    # bidirectional BFS; usually terminates after a few hops
    if src == dst:
        return True
    seen = [{src}, {dst}]
    frontier = [deque([src]), deque([dst])]
    while frontier[0] and frontier[1]:
        side = 0 if len(frontier[0]) <= len(frontier[1]) else 1
        for _ in range(len(frontier[side])):
            x = frontier[side].popleft()
            for y in adj[x]:
                if y in seen[1 - side]:
                    return True
                if y not in seen[side]:
                    seen[side].add(y)
                    frontier[side].append(y)
    return False


def synth_scale_free(n: int, m_attach: int, seed: int) -> Graph:
    """Preferential-attachment graph.

    The process starts from ``m_attach`` isolated nodes; node ``m_attach``
    links to all of them and every later node picks ``m_attach`` distinct
    targets with probability proportional to degree. Edge count is
    ``(n - m_attach) * m_attach``.
    """
    if not (n > m_attach >= 1):
        raise GraphError("need n > m_attach >= 1")
    rng = np.random.default_rng(seed)
    edges = []
    endpoints: list[int] = []  # each node repeated deg times
    targets = list(range(m_attach))
    for new in range(m_attach, n):
        for t in targets:
            edges.append((new, t))
        endpoints.extend(targets)
        endpoints.extend([new] * m_attach)
        chosen: set[int] = set()
        while len(chosen) < m_attach:
            chosen.add(endpoints[int(rng.integers(len(endpoints)))])
        targets = sorted(chosen)
    return Graph.from_edges(n, edges)


def densify_neighborhoods(g: Graph, hub_fraction: float, extra_edges: int, seed: int,
                          max_attempts: int | None = None) -> Graph:
    """Add random edges between neighbours of the highest-degree nodes.

    Raises the clustering coefficient while keeping the degree skew.
    """
    if not 0 < hub_fraction <= 1:
        raise GraphError("hub_fraction must lie in (0, 1]")
    if extra_edges < 0:
        raise GraphError("extra_edges must be non-negative")
    if extra_edges == 0:
        return g
    if not g.is_connected():
        raise GraphError("input graph must be connected")

    n_hubs = math.ceil(hub_fraction * g.n)
    # stable sort: ties broken by node id
    hubs = np.argsort(-g.degrees, kind="stable")[:n_hubs]
    hubs = hubs[g.degrees[hubs] >= 2]
    if len(hubs) == 0:
        raise GraphError("no hub has two neighbours")
    rng = np.random.default_rng(seed)
    existing = set(g.edge_keys().tolist())
    added = []
    attempts = 0
    limit = max_attempts if max_attempts is not None else 100 * extra_edges + 1000
    while len(added) < extra_edges:
        attempts += 1
        if attempts > limit:
            raise GraphError(f"placed only {len(added)} of {extra_edges} edges in {limit} attempts")
        nb = g.neighbors(int(hubs[rng.integers(len(hubs))]))
        i, j = rng.choice(len(nb), size=2, replace=False)
        u, v = int(nb[i]), int(nb[j])
        key = u * g.n + v
        if key in existing:
            continue
        existing.add(key)
        existing.add(v * g.n + u)
        added.append((u, v))

    out = Graph.from_edges(g.n, np.concatenate([g.edges(), np.array(added)]))
    cc_in, cc_out = clustering_coefficient(g), clustering_coefficient(out)
    assert cc_out > cc_in, (cc_in, cc_out)
    return out


def bfs_reaches_all(g: Graph, source: int = 0) -> bool:
    seen = np.zeros(g.n, dtype=bool)
    seen[source] = True
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in g.neighbors(u):
            if not seen[v]:
                seen[v] = True
                queue.append(int(v))
    return bool(seen.all())


def edge_set(edges: Iterable) -> set[tuple[int, int]]:
    return {(min(int(u), int(v)), max(int(u), int(v))) for u, v in edges}
