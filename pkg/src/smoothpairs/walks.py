"""Seeded random walks and the skip-gram pair stream built on top of them.

Walks are never stored: every pass over the corpus regenerates them from the
seed. Randomness is counter-based per walk, so the corpus does not depend on
chunking or thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Union

import numpy as np

from . import _rng
from .graph import Graph, GraphError

INT64_MAX = (1 << 63) - 1


@dataclass(frozen=True)
class Uniform:
    pass


@dataclass(frozen=True)
class Node2Vec:
    """Second-order bias: weight ``1/p`` back to the previous node, ``1`` to
    its neighbours, ``1/q`` to everything else."""

    p: float
    q: float

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise ValueError("node2vec p and q must be positive")


Bias = Union[Uniform, Node2Vec]


@dataclass(frozen=True)
class WalkConfig:
    walks_per_node: int = 10
    walk_length: int = 80
    window: int = 10
    seed: int = 0
    bias: Bias = field(default_factory=Uniform)

    def __post_init__(self):
        if self.walk_length < 2:
            raise ValueError("walk_length must be >= 2")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be >= 1")


def pairs_per_sequence(walk_length: int, window: int) -> int:
    """Ordered skip-gram pairs produced by one walk."""
    if walk_length < 2 or window < 1:
        raise ValueError("need walk_length >= 2 and window >= 1")
    ell, t = walk_length, window
    if ell <= t + 1:
        return ell * (ell - 1)
    return 2 * t * ell - t * (t + 1)


def total_pairs(n: int, cfg: WalkConfig) -> int:
    m = n * cfg.walks_per_node * pairs_per_sequence(cfg.walk_length, cfg.window)
    if m > INT64_MAX:
        raise OverflowError(f"corpus size {m} does not fit in 64 bits")
    return m


@lru_cache(maxsize=32)
def window_positions(walk_length: int, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Center and context positions in emission order (center asc, context asc)."""
    ci, cj = [], []
    for i in range(walk_length):
        for j in range(max(0, i - window), min(walk_length - 1, i + window) + 1):
            if j != i:
                ci.append(i)
                cj.append(j)
    out = np.array(ci, dtype=np.intp), np.array(cj, dtype=np.intp)
    for a in out:
        a.setflags(write=False)
    return out


def skipgram_pairs(walk, window: int) -> list[tuple]:
    """All ordered (center, context) pairs of one walk within ``window``."""
    walk = list(walk)
    ci, cj = window_positions(len(walk), window)
    return [(walk[i], walk[j]) for i, j in zip(ci, cj)]


def _walk_batch(g: Graph, cfg: WalkConfig, starts: np.ndarray, widx: np.ndarray,
                edge_keys: np.ndarray | None) -> np.ndarray:
    ell = cfg.walk_length
    keys = _rng.walk_keys(cfg.seed, starts, widx)
    deg = g.degrees
    walks = np.empty((len(starts), ell), dtype=np.int64)
    walks[:, 0] = starts
    cur = starts.astype(np.int64)
    prev = None
    n2v = isinstance(cfg.bias, Node2Vec) and not (cfg.bias.p == 1 and cfg.bias.q == 1)
    if n2v:
        w_ret, w_in, w_out = 1.0 / cfg.bias.p, 1.0, 1.0 / cfg.bias.q
        w_max = max(w_ret, w_in, w_out)
    for step in range(1, ell):
        r = _rng.uniforms(keys, step, 0, 0)
        dcur = deg[cur]
        nxt = g.indices[g.indptr[cur] + (r * dcur).astype(np.int64)]
        if n2v and prev is not None:
            # rejection sampling against the unnormalised second-order weights
            pending = np.arange(len(cur))
            attempt = 0
            while True:
                acc = _rng.uniforms(keys[pending], step, attempt, 1) * w_max
                x, pv = nxt[pending], prev[pending]
                w = np.full(len(pending), w_out)
                key = pv * g.n + x
                pos = np.searchsorted(edge_keys, key).clip(max=len(edge_keys) - 1)
                w[edge_keys[pos] == key] = w_in
                w[x == pv] = w_ret
                pending = pending[acc >= w]
                if len(pending) == 0:
                    break
                attempt += 1
                r = _rng.uniforms(keys[pending], step, attempt, 0)
                c = cur[pending]
                nxt[pending] = g.indices[g.indptr[c] + (r * deg[c]).astype(np.int64)]
        walks[:, step] = nxt
        prev, cur = cur, nxt
    return walks


class WalkCorpus:
    """Regenerable walk corpus over ``graph`` for one :class:`WalkConfig`.

    Walk order is node-major: all ``s`` walks from node 0, then node 1, ...
    ``chunk_nodes`` controls how many start nodes are generated per batch.
    """

    def __init__(self, graph: Graph, cfg: WalkConfig, chunk_nodes: int = 256, threads: int = 1):
        if graph.n and graph.degrees.min() == 0:
            isolated = int(np.argmin(graph.degrees))
            raise GraphError(f"node {isolated} has no neighbours; walks need d(u) >= 1")
        self.graph = graph
        self.cfg = cfg
        self.chunk_nodes = max(1, int(chunk_nodes))
        self.threads = max(1, int(threads))
        self._edge_keys = graph.edge_keys() if isinstance(cfg.bias, Node2Vec) else None
        self.num_pairs = total_pairs(graph.n, cfg)

    @property
    def n(self) -> int:
        return self.graph.n

    def walks_from(self, nodes) -> np.ndarray:
        """Walks for the given start nodes, ``s`` consecutive rows per node."""
        nodes = np.asarray(nodes, dtype=np.int64)
        s = self.cfg.walks_per_node
        starts = np.repeat(nodes, s)
        widx = np.tile(np.arange(s, dtype=np.int64), len(nodes))
        return _walk_batch(self.graph, self.cfg, starts, widx, self._edge_keys)

    def iter_walks(self) -> Iterator[np.ndarray]:
        bounds = [(lo, min(lo + self.chunk_nodes, self.n)) for lo in range(0, self.n, self.chunk_nodes)]
        if self.threads == 1:
            for lo, hi in bounds:
                yield self.walks_from(np.arange(lo, hi))
            return
        with ThreadPoolExecutor(self.threads) as pool:
            yield from pool.map(lambda b: self.walks_from(np.arange(*b)), bounds)

    def walks(self) -> np.ndarray:
        """Materialise the whole corpus (debugging and small graphs)."""
        return np.concatenate(list(self.iter_walks()))

    def chunks(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """One full pass of (center, context) arrays in emission order."""
        ci, cj = window_positions(self.cfg.walk_length, self.cfg.window)
        for w in self.iter_walks():
            yield w[:, ci].ravel(), w[:, cj].ravel()

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            for w in self.iter_walks():
                np.savetxt(fh, w, fmt="%d")


def generate_walks(g: Graph, cfg: WalkConfig) -> WalkCorpus:
    return WalkCorpus(g, cfg)


class ArrayPairStream:
    """A fixed, materialised pair stream, replayed identically on each pass."""

    def __init__(self, u, v, n: int | None = None, chunk_size: int = 1 << 16):
        self.u = np.ascontiguousarray(u, dtype=np.int64)
        self.v = np.ascontiguousarray(v, dtype=np.int64)
        if self.u.shape != self.v.shape:
            raise ValueError("u and v must have equal length")
        self.n = int(n) if n is not None else int(max(self.u.max(initial=-1), self.v.max(initial=-1)) + 1)
        self.num_pairs = len(self.u)
        self.chunk_size = chunk_size

    def chunks(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        for lo in range(0, self.num_pairs, self.chunk_size):
            yield self.u[lo:lo + self.chunk_size], self.v[lo:lo + self.chunk_size]


def iter_pairs(stream) -> Iterator[tuple[int, int]]:
    for u, v in stream.chunks():
        yield from zip(u.tolist(), v.tolist())
