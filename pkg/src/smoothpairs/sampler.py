"""Smooth positive-pair sampling by rejection over repeated corpus passes.

Each pair occurrence is kept with probability ``f^(beta-1)`` where ``f`` is
its (estimated) corpus frequency, so a pair seen ``f`` times per pass is
emitted about ``f^beta`` times per pass. Passes repeat until exactly ``M``
pairs have been accepted, giving about ``T_beta * f^beta`` samples in total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .sketch import pair_keys


class SamplerError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    beta: float
    target: int | None = None  # defaults to the corpus size M
    seed: int = 0
    upper_bound: float | None = None  # required for beta > 1

    def __post_init__(self):
        if not self.beta > 0:
            raise SamplerError("beta must be positive")
        if self.target is not None and self.target < 1:
            raise SamplerError("target must be >= 1")
        if self.beta > 1 and self.upper_bound is None:
            raise SamplerError("beta > 1 requires an upper bound on pair frequencies")


@dataclass
class SampleStats:
    passes_completed: int = 0
    accepted: int = 0
    rejected: int = 0
    per_pass: list[tuple[int, int, int]] = field(default_factory=list)
    pair_counts: dict[tuple[int, int], int] | None = None

    @property
    def passes(self) -> int:
        """Passes started, counting a final truncated one."""
        return len(self.per_pass)

    def summary(self) -> str:
        return (f"passes={self.passes} accepted={self.accepted} "
                f"rejected={self.rejected}")

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("pass,accepted,rejected\n")
            for row in self.per_pass:
                fh.write("%d,%d,%d\n" % row)


def accept_probability(freq, beta: float, upper_bound: float | None = None):
    """``min(freq^(beta-1), 1)``, or ``(freq/U)^(beta-1)`` when unsmoothing."""
    f = np.asarray(freq, dtype=np.float64)
    if np.any(f < 1):
        raise SamplerError("pair frequency must be >= 1")
    if beta > 1:
        if upper_bound is None:
            raise SamplerError("beta > 1 requires an upper bound")
        p = (f / upper_bound) ** (beta - 1.0)
    else:
        p = f ** (beta - 1.0)
    p = np.minimum(p, 1.0)
    return float(p) if p.ndim == 0 else p


def m_beta(counts, beta: float) -> tuple[float, int]:
    """``M_beta = sum f^beta`` over unique pairs and ``T_beta = ceil(M / M_beta)``."""
    f = np.asarray(counts, dtype=np.float64)
    if f.size == 0:
        raise SamplerError("empty frequency table")
    mb = float(np.sum(f ** beta))
    total = float(f.sum())
    ratio = total / mb
    # guard the ceiling against float noise when M == M_beta
    t = math.ceil(ratio - 1e-12 * ratio)
    return mb, max(t, 1)


class SmoothSampler:
    """Iterates accepted ``(center, context)`` chunks; fills :attr:`stats`.

    ``corpus`` is any regenerable stream exposing ``chunks()``, ``n`` and
    ``num_pairs``. Acceptance draws come from their own generator seeded by
    ``cfg.seed``, independent of walk randomness. When the corpus is small
    enough, per-position probabilities from the first pass are cached and
    reused (the corpus is identical on every pass).
    """

    def __init__(self, corpus, oracle, cfg: SamplerConfig, *, track_pairs: bool = False,
                 cache_limit: int = 20_000_000, max_passes: int = 100_000):
        self.corpus = corpus
        self.oracle = oracle
        self.cfg = cfg
        self.target = cfg.target if cfg.target is not None else corpus.num_pairs
        self.track_pairs = track_pairs
        self.cache_limit = cache_limit
        self.max_passes = max_passes
        self.stats = SampleStats()
        if cfg.beta > 1 and cfg.upper_bound < oracle.max_estimate():
            self._check_bound()

    def _check_bound(self):
        keys = self.oracle.keys[self.oracle.counts > self.cfg.upper_bound]
        n = self.oracle.n
        if len(keys):
            u, v = divmod(int(keys[0]), n)
            f = int(self.oracle.counts[self.oracle.keys == keys[0]][0])
            raise SamplerError(f"pair ({u}, {v}) has frequency {f} > upper bound {self.cfg.upper_bound}")
        raise SamplerError(f"default estimate {self.oracle.default_w} exceeds upper bound {self.cfg.upper_bound}")

    def _probabilities(self, u, v):
        est = self.oracle.estimate_pairs(u, v)
        cfg = self.cfg
        if cfg.beta > 1:
            if est.max(initial=0) > cfg.upper_bound:
                i = int(np.argmax(est))
                raise SamplerError(f"pair ({u[i]}, {v[i]}) has estimate {est[i]} > upper bound {cfg.upper_bound}")
            return np.minimum((est / cfg.upper_bound) ** (cfg.beta - 1.0), 1.0)
        return np.minimum(est ** (cfg.beta - 1.0), 1.0)

    def __iter__(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        if self.corpus.num_pairs == 0:
            raise SamplerError("corpus is empty")
        rng = np.random.default_rng(self.cfg.seed)
        stats = self.stats
        stats.__init__()
        if self.track_pairs:
            counts: dict[int, int] = {}
        n = self.corpus.n
        identity = self.cfg.beta == 1
        cache: list[np.ndarray] | None = [] if self.corpus.num_pairs <= self.cache_limit else None
        remaining = self.target
        pass_idx = 0
        while remaining > 0:
            if pass_idx >= self.max_passes:
                raise SamplerError(f"no convergence after {self.max_passes} passes")
            acc_pass = rej_pass = 0
            for ci, (u, v) in enumerate(self.corpus.chunks()):
                if identity:
                    mask = None
                    k = len(u)
                else:
                    if pass_idx > 0 and cache is not None:
                        p = cache[ci]
                    else:
                        p = self._probabilities(u, v)
                        if cache is not None:
                            cache.append(p)
                    mask = rng.random(len(u)) <= p
                    k = int(np.count_nonzero(mask))
                if k >= remaining:
                    # truncate inside this chunk at the M-th acceptance
                    if mask is None:
                        cut = remaining
                    else:
                        cut = int(np.flatnonzero(mask)[remaining - 1]) + 1
                        mask = mask[:cut]
                    u, v = u[:cut], v[:cut]
                    k = remaining
                out_u, out_v = (u, v) if mask is None else (u[mask], v[mask])
                acc_pass += k
                rej_pass += len(u) - k
                remaining -= k
                if self.track_pairs and k:
                    kk, cc = np.unique(pair_keys(out_u, out_v, n), return_counts=True)
                    for a, b in zip(kk.tolist(), cc.tolist()):
                        counts[a] = counts.get(a, 0) + b
                if k:
                    yield out_u, out_v
                if remaining == 0:
                    break
            if acc_pass + rej_pass == self.corpus.num_pairs:
                stats.passes_completed += 1
            stats.per_pass.append((pass_idx + 1, acc_pass, rej_pass))
            stats.accepted += acc_pass
            stats.rejected += rej_pass
            pass_idx += 1
        if self.track_pairs:
            stats.pair_counts = {divmod(k_, n): c for k_, c in counts.items()}


def smooth_stream(corpus, oracle, cfg: SamplerConfig, **kw) -> tuple[SmoothSampler, SampleStats]:
    """Rejection-sample ``corpus`` to smoothed frequencies ``T_beta * f^beta``.

    Returns the sampler (iterate it for accepted chunks) and its stats
    object, which is complete once iteration finishes.
    """
    if cfg.beta > 1:
        raise SamplerError("use unsmooth_stream for beta > 1")
    s = SmoothSampler(corpus, oracle, cfg, **kw)
    return s, s.stats


def unsmooth_stream(corpus, oracle, cfg: SamplerConfig, **kw) -> tuple[SmoothSampler, SampleStats]:
    """Sharpen frequencies (beta > 1) using the upper bound ``U`` from ``cfg``."""
    if cfg.beta <= 1:
        raise SamplerError("unsmooth_stream needs beta > 1")
    s = SmoothSampler(corpus, oracle, cfg, **kw)
    return s, s.stats


def collect(sampler) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate all accepted chunks."""
    parts = list(sampler)
    if not parts:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
