"""Diagnostics on pair-frequency tables: skew, Zipf fits, transition ranks, significance."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .sampler import m_beta
from .walks import ArrayPairStream


@dataclass(frozen=True)
class FrequencyTable:
    """Pair frequencies sorted in non-increasing order (rank 1 first)."""

    counts: np.ndarray

    @classmethod
    def from_counts(cls, counts) -> "FrequencyTable":
        c = np.asarray(counts, dtype=np.float64).ravel()
        if np.any(c < 1):
            raise ValueError("pair counts must be >= 1")
        return cls(np.sort(c)[::-1].copy())

    @classmethod
    def from_mapping(cls, mapping: dict) -> "FrequencyTable":
        return cls.from_counts(list(mapping.values()))

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @property
    def unique(self) -> int:
        return len(self.counts)

    def smoothed(self, beta: float) -> np.ndarray:
        """Expected smoothed frequencies ``T_beta * f^beta`` by original rank."""
        _, t = m_beta(self.counts, beta)
        return t * self.counts ** beta


def top_mass_fraction(tbl: FrequencyTable, percents: Sequence[float]) -> list[float]:
    """Share of all pair occurrences held by the top ``k%`` unique pairs."""
    if tbl.unique == 0:
        raise ValueError("empty table")
    csum = np.cumsum(tbl.counts)
    out = []
    for pct in percents:
        if not 0 < pct <= 100:
            raise ValueError("percent must lie in (0, 100]")
        # tolerate float noise such as 0.07 * 100 = 7.000000000000001
        top = math.ceil(round(pct / 100 * tbl.unique, 9))
        out.append(float(csum[max(top, 1) - 1] / csum[-1]))
    return out


def fit_zipf(tbl: FrequencyTable) -> float:
    """Negated least-squares slope of log(count) on log(rank) over all ranks."""
    if tbl.unique < 10:
        raise ValueError("need at least 10 unique pairs to fit")
    y = np.log(tbl.counts)
    if np.ptp(y) == 0:
        return 0.0
    x = np.log(np.arange(1, tbl.unique + 1))
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


def transition_rank_empirical(tbl: FrequencyTable, beta: float) -> int | None:
    """Smallest rank whose smoothed frequency strictly exceeds the original."""
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    _, t = m_beta(tbl.counts, beta)
    hit = np.flatnonzero(t * tbl.counts ** beta > tbl.counts)
    return int(hit[0]) + 1 if len(hit) else None


def transition_rank_predicted(z: float, beta: float, P: int) -> tuple[float | None, str]:
    """Asymptotic transition rank for a Zipf(z) table and its regime.

    Regimes: ``constant`` (z > 1, beta*z > 1), ``sublinear`` (z > 1,
    beta*z < 1, estimate ``P^((1 - beta z) / (z - beta z))``), ``linear``
    (z < 1) and ``boundary`` when z or beta*z equals 1.
    """
    if z < 0 or not 0 < beta <= 1:
        raise ValueError("need z >= 0 and beta in (0, 1]")
    bz = beta * z
    if z == 1 or bz == 1:
        return None, "boundary"
    if z < 1:
        return None, "linear"
    if bz > 1:
        return None, "constant"
    return float(P ** ((1 - bz) / (z - bz))), "sublinear"


def binomial_pvalue(pos: int, neg: int, prob: float = 2 / 3) -> float:
    """``P(X >= pos)`` for ``X ~ Binomial(pos + neg, prob)``."""
    if pos <= 0:
        return 1.0
    return float(stats.binom.sf(pos - 1, pos + neg, prob))


def significant_pairs(pos_counts, neg_counts, level: float = 0.05, prob: float = 2 / 3) -> float:
    """Fraction of pairs whose positives significantly outnumber negatives 2:1."""
    pos = np.asarray(pos_counts, dtype=np.int64)
    neg = np.asarray(neg_counts, dtype=np.int64)
    if pos.shape != neg.shape:
        raise ValueError("pos and neg counts must align")
    if np.any(pos + neg < 1):
        raise ValueError("every pair needs at least one trial")
    p = stats.binom.sf(pos - 1, pos + neg, prob)
    p = np.where(pos > 0, p, 1.0)
    return float(np.mean(p <= level)) if len(p) else 0.0


def expected_pos_neg(pairs: dict, beta: float, mu_weights, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Expected positive and negative sample counts of each pair after smoothing.

    ``pairs`` maps ``(u, v)`` to exact corpus frequency. Pair ``(u, v)`` is
    seen ``T_beta f^beta`` times as a positive and, since every positive with
    center ``u`` draws ``k`` negatives from ``mu``, ``k T_beta F_u mu(v)``
    times as a negative, where ``F_u = sum_w f(u, w)^beta``.
    """
    keys = list(pairs)
    f = np.array([pairs[p] for p in keys], dtype=np.float64)
    _, t = m_beta(f, beta)
    u = np.array([p[0] for p in keys])
    v = np.array([p[1] for p in keys])
    fb = f ** beta
    per_center = np.bincount(u, weights=fb, minlength=len(mu_weights))
    pos = t * fb
    neg = k * t * per_center[u] * np.asarray(mu_weights)[v]
    return np.rint(pos).astype(np.int64), np.rint(neg).astype(np.int64)


def zipf_frequencies(P: int, z: float, total: float | None = None, tail: float | None = None) -> np.ndarray:
    """Integer Zipf frequencies ``floor(X / i^z)`` for ranks ``1..P``, all >= 1.

    Give either the approximate ``total`` M or the ``tail`` frequency of rank P.
    """
    i = np.arange(1, P + 1, dtype=np.float64)
    if tail is not None:
        x = tail * P ** z
    else:
        total = total if total is not None else 100.0 * P
        x = total / np.sum(i ** -z)
    return np.maximum(np.floor(x / i ** z), 1).astype(np.int64)


def zipf_corpus(freqs, seed: int, chunk_size: int = 1 << 16) -> ArrayPairStream:
    """Shuffled pair stream in which the rank-``i`` pair occurs ``freqs[i-1]`` times.

    Rank ``i`` (0-based) is encoded as pair ``(i // n, i % n)`` with
    ``n = ceil(sqrt(P))``.
    """
    freqs = np.asarray(freqs, dtype=np.int64)
    n = max(2, math.isqrt(len(freqs) - 1) + 1)
    ranks = np.repeat(np.arange(len(freqs)), freqs)
    np.random.default_rng(seed).shuffle(ranks)
    return ArrayPairStream(ranks // n, ranks % n, n=n, chunk_size=chunk_size)


def write_rank_frequency_csv(path, tbl: FrequencyTable, beta: float) -> None:
    smooth = tbl.smoothed(beta)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "original", "smoothed"])
        for r, (a, b) in enumerate(zip(tbl.counts, smooth), 1):
            w.writerow([r, repr(float(a)), repr(float(b))])


def write_skew_csv(path, tbl: FrequencyTable, percents=tuple(range(1, 11))) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["percent", "fraction"])
        for pct, frac in zip(percents, top_mass_fraction(tbl, percents)):
            w.writerow([pct, repr(frac)])
