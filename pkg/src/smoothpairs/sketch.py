"""Pair-frequency estimation with the Frequent (Misra-Gries) sketch.

Pass 1 keeps at most ``b`` counters that lower-bound true frequencies; pass 2
replaces the surviving counters by exact counts. Pairs that did not survive
get the residual default ``(M - stored weight) / b``.
"""

from __future__ import annotations

import enum
from pathlib import Path

import numpy as np


class Phase(enum.Enum):
    PASS1 = "pass1"
    EXACT = "exact"


class CorpusMismatch(RuntimeError):
    pass


def pair_keys(u, v, n: int) -> np.ndarray:
    return np.asarray(u, dtype=np.int64) * n + np.asarray(v, dtype=np.int64)


class FrequentSketch:
    """Bounded dictionary of at most ``budget`` (key -> counter) entries.

    Keys are ints (pairs encoded as ``u * n + v``). When a new key arrives at
    a full sketch, every counter is decremented and zeros evicted instead of
    inserting; each such event removes ``b + 1`` units of weight, so it
    happens at most ``M / (b + 1)`` times and the O(b) sweep amortises to
    O(1) per update.
    """

    def __init__(self, budget: int, n: int):
        if budget < 1:
            raise ValueError("sketch budget must be >= 1")
        self.budget = int(budget)
        self.n = int(n)
        self.entries: dict[int, int] = {}
        self.decrement_total = 0
        self.processed = 0
        self.phase = Phase.PASS1

    def update(self, key: int) -> None:
        self.update_many([key])

    def update_many(self, keys) -> None:
        if self.phase is not Phase.PASS1:
            raise RuntimeError("sketch is frozen after the exact recount")
        if isinstance(keys, np.ndarray):
            keys = keys.tolist()
        entries = self.entries
        b = self.budget
        dec = 0
        for k in keys:
            c = entries.get(k)
            if c is not None:
                entries[k] = c + 1
            elif len(entries) < b:
                entries[k] = 1
            else:
                entries = {x: c - 1 for x, c in entries.items() if c > 1}
                dec += 1
        self.entries = entries
        self.decrement_total += dec
        self.processed += len(keys)

    def counter(self, key: int) -> int:
        return self.entries.get(key, 0)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries


def build_sketch(stream, budget: int) -> FrequentSketch:
    """One pass of the Frequent algorithm over ``stream.chunks()``."""
    sk = FrequentSketch(budget, stream.n)
    for u, v in stream.chunks():
        sk.update_many(pair_keys(u, v, sk.n))
    return sk


class FrequencyOracle:
    """Exact counts for sketched pairs, the residual default for the rest.

    ``keys`` is sorted; lookups are vectorised binary searches.
    """

    def __init__(self, keys, counts, total: int, budget: int, n: int):
        order = np.argsort(keys, kind="stable")
        self.keys = np.asarray(keys, dtype=np.int64)[order]
        self.counts = np.asarray(counts, dtype=np.int64)[order]
        self.total = int(total)
        self.budget = int(budget)
        self.n = int(n)
        stored = int(self.counts.sum())
        self.default_w = max(self.total - stored, 0) / self.budget

    @property
    def phase(self) -> Phase:
        return Phase.EXACT

    def _lookup(self, keys):
        keys = np.asarray(keys, dtype=np.int64)
        if len(self.keys) == 0:
            return np.zeros(keys.shape, dtype=bool), np.zeros(keys.shape, dtype=np.intp)
        pos = np.searchsorted(self.keys, keys).clip(max=len(self.keys) - 1)
        return self.keys[pos] == keys, pos

    def estimate_keys(self, keys) -> np.ndarray:
        """Vectorised estimate, clamped to >= 1."""
        found, pos = self._lookup(keys)
        fallback = max(self.default_w, 1.0)
        return np.where(found, self.counts[pos], fallback).astype(np.float64)

    def estimate(self, u: int, v: int) -> float:
        return float(self.estimate_keys(np.array([u * self.n + v]))[0])

    def estimate_pairs(self, u, v) -> np.ndarray:
        return self.estimate_keys(pair_keys(u, v, self.n))

    def stored(self, u: int, v: int) -> bool:
        return bool(self._lookup(np.array([u * self.n + v]))[0][0])

    def max_estimate(self) -> float:
        top = float(self.counts.max()) if len(self.counts) else 0.0
        return max(top, self.default_w, 1.0)

    def as_dict(self) -> dict[tuple[int, int], int]:
        return {(int(k) // self.n, int(k) % self.n): int(c) for k, c in zip(self.keys, self.counts)}

    def save(self, path) -> None:
        """Text table: header ``M b default_w n`` then ``u v count`` rows."""
        path = Path(path)
        with path.open("w") as fh:
            fh.write(f"{self.total} {self.budget} {self.default_w!r} {self.n}\n")
            rows = np.stack([self.keys // self.n, self.keys % self.n, self.counts], axis=1)
            np.savetxt(fh, rows, fmt="%d")

    @classmethod
    def load(cls, path) -> "FrequencyOracle":
        with open(path) as fh:
            head = fh.readline().split()
            rows = np.loadtxt(fh, dtype=np.int64, ndmin=2)
        total, budget, n = int(head[0]), int(head[1]), int(head[3])
        if rows.size == 0:
            rows = np.zeros((0, 3), dtype=np.int64)
        keys = rows[:, 0] * n + rows[:, 1]
        oracle = cls(keys, rows[:, 2], total, budget, n)
        if abs(oracle.default_w - float(head[2])) > 1e-9 * max(1.0, oracle.default_w):
            raise ValueError(f"{path}: default_w in header does not match the stored rows")
        return oracle


def recount_exact(sketch: FrequentSketch, stream) -> FrequencyOracle:
    """Second pass: replace surviving counters by exact frequencies."""
    if sketch.phase is not Phase.PASS1:
        raise RuntimeError("sketch was already recounted")
    keys = np.array(sorted(sketch.entries), dtype=np.int64)
    counts = np.zeros(len(keys), dtype=np.int64)
    seen = 0
    for u, v in stream.chunks():
        k = pair_keys(u, v, sketch.n)
        seen += len(k)
        if len(keys):
            pos = np.searchsorted(keys, k).clip(max=len(keys) - 1)
            hit = keys[pos] == k
            counts += np.bincount(pos[hit], minlength=len(keys))
    if seen != sketch.processed:
        raise CorpusMismatch(f"second pass saw {seen} pairs, first pass saw {sketch.processed}")
    sketch.phase = Phase.EXACT
    sketch.entries = dict(zip(keys.tolist(), counts.tolist()))
    return FrequencyOracle(keys, counts, seen, sketch.budget, sketch.n)


def exact_oracle(stream) -> FrequencyOracle:
    """Brute-force counts of every pair (small-graph mode, budget = P)."""
    keys, counts = exact_counts(stream)
    return FrequencyOracle(keys, counts, int(counts.sum()), max(len(keys), 1), stream.n)


def exact_counts(stream) -> tuple[np.ndarray, np.ndarray]:
    """Sorted unique pair keys and their exact frequencies."""
    parts_k, parts_c = [], []
    for u, v in stream.chunks():
        k, c = np.unique(pair_keys(u, v, stream.n), return_counts=True)
        parts_k.append(k)
        parts_c.append(c)
    if not parts_k:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    k = np.concatenate(parts_k)
    c = np.concatenate(parts_c)
    order = np.argsort(k, kind="stable")
    k, c = k[order], c[order]
    starts = np.flatnonzero(np.r_[True, k[1:] != k[:-1]])
    return k[starts], np.add.reduceat(c, starts).astype(np.int64)


def build_oracle(stream, budget: int) -> FrequencyOracle:
    """Both passes: Frequent sketch, then exact recount."""
    return recount_exact(build_sketch(stream, budget), stream)
