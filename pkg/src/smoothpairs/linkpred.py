"""Link-prediction protocol: split, embed once, score sampled candidate pairs."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import stats as sstats

from . import _rng
from .graph import Graph, neg_sampling_distribution, split_link_prediction
from .pipeline import PipelineConfig, embed
from .train import EmbeddingMatrices


@dataclass(frozen=True)
class EvalRun:
    seed: int = 0
    ks: tuple[int, ...] = (100,)
    fraction: float = 0.001
    positive_fraction: float | None = None  # defaults to fraction
    repetitions: int = 100
    test_fraction: float = 0.2
    retrain_per_trial: bool = False

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ValueError("candidate fraction must lie in (0, 1]")
        if self.repetitions < 1:
            raise ValueError("need at least one repetition")


def _decode_pairs(idx: np.ndarray, n: int) -> np.ndarray:
    # index -> (u, v), u < v, enumerating rows u = 0, 1, ... of the upper triangle
    idx = np.asarray(idx, dtype=np.int64)
    row_start = lambda u: u * (2 * n - u - 1) // 2  # noqa: E731
    u = ((2 * n - 1) - np.sqrt((2 * n - 1) ** 2 - 8.0 * idx)) // 2
    u = u.astype(np.int64)
    # repair float rounding at row boundaries
    u = np.where(row_start(u) > idx, u - 1, u)
    u = np.where(row_start(u + 1) <= idx, u + 1, u)
    v = idx - row_start(u) + u + 1
    return np.stack([u, v], axis=1)


def candidate_sample(g_full: Graph | int, removed, fraction: float, seed: int,
                     positive_fraction: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Random node pairs plus a slice of the removed edges, deduplicated.

    ``ceil(fraction * C(n, 2))`` pairs are drawn without replacement, plus
    ``ceil(positive_fraction * |removed|)`` removed edges (``positive_fraction``
    defaults to ``fraction``). Returns ``(pairs, is_positive)`` with pairs as
    sorted ``(u, v)``, ``u < v``; a candidate is positive iff it is a removed
    edge.
    """
    n = g_full.n if isinstance(g_full, Graph) else int(g_full)
    if positive_fraction is None:
        positive_fraction = fraction
    removed = np.sort(np.asarray(removed, dtype=np.int64).reshape(-1, 2), axis=1)
    if len(removed) == 0:
        raise ValueError("no removed edges to evaluate against")
    total = n * (n - 1) // 2
    rng = np.random.default_rng(seed)
    n_rand = math.ceil(fraction * total)
    n_pos = math.ceil(positive_fraction * len(removed))
    rand = _decode_pairs(rng.choice(total, size=n_rand, replace=False), n)
    pos = removed[rng.choice(len(removed), size=n_pos, replace=False)]
    pairs = np.unique(np.concatenate([rand, pos]), axis=0)
    rkeys = np.sort(removed[:, 0] * n + removed[:, 1])
    keys = pairs[:, 0] * n + pairs[:, 1]
    hit = np.searchsorted(rkeys, keys).clip(max=len(rkeys) - 1)
    is_pos = rkeys[hit] == keys
    if not is_pos.any():
        raise ValueError("candidate sample contains no positives")
    return pairs, is_pos


def precision_recall_at_k(emb: EmbeddingMatrices | np.ndarray, candidates, positives, k: int) -> tuple[float, float]:
    """Precision and recall of the ``k`` candidates with the largest dot product.

    Ties are broken by candidate position (candidates come sorted by pair).
    """
    mat = emb.center if isinstance(emb, EmbeddingMatrices) else np.asarray(emb)
    candidates = np.asarray(candidates)
    positives = np.asarray(positives, dtype=bool)
    if k > len(candidates):
        raise ValueError("k exceeds the number of candidates")
    scores = np.einsum("ij,ij->i", mat[candidates[:, 0]], mat[candidates[:, 1]])
    order = np.lexsort((np.arange(len(scores)), -scores))
    hits = int(positives[order[:k]].sum())
    return hits / k, hits / max(int(positives.sum()), 1)


@dataclass(frozen=True)
class Method:
    name: str
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)


@dataclass
class ScoreRow:
    method: str
    beta: float
    b: int | None
    k: int
    metric: str
    mean: float
    std: float
    runs: int
    values: list[float] = field(repr=False, default_factory=list)


def run_experiment(g: Graph, method: Method, run: EvalRun, split=None) -> list[ScoreRow]:
    """Average precision@k / recall@k over ``run.repetitions`` candidate draws.

    The graph is split once (seeded by ``run.seed``) and embedded once; each
    repetition draws its own candidate sample. With ``retrain_per_trial``
    the embedding is retrained with a derived seed for every repetition.
    """
    reduced, removed = split if split is not None else split_link_prediction(g, run.test_fraction, run.seed)
    mu = neg_sampling_distribution(reduced, method.pipeline.train.neg_alpha)
    res = embed(reduced, method.pipeline, mu=mu)
    scores = {(k, m): [] for k in run.ks for m in ("precision", "recall")}
    for r in range(run.repetitions):
        seed_r = _rng.derive_seed(run.seed, r)
        if run.retrain_per_trial and r > 0:
            p = method.pipeline
            p = replace(p, sampler_seed=_rng.derive_seed(p.sampler_seed, r),
                        walk=replace(p.walk, seed=_rng.derive_seed(p.walk.seed, r)),
                        train=replace(p.train, seed=_rng.derive_seed(p.train.seed, r)))
            res = embed(reduced, p, mu=mu)
        cands, pos = candidate_sample(g, removed, run.fraction, seed_r, run.positive_fraction)
        for k in run.ks:
            prec, rec = precision_recall_at_k(res.embeddings, cands, pos, min(k, len(cands)))
            scores[(k, "precision")].append(prec)
            scores[(k, "recall")].append(rec)
    rows = []
    for (k, metric), vals in scores.items():
        a = np.array(vals)
        rows.append(ScoreRow(method.name, res.beta, res.budget, k, metric,
                             float(a.mean()), float(a.std()), len(a), vals))
    return rows


def write_scores_csv(path, rows: Sequence[ScoreRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "beta", "b", "k", "metric", "mean", "std", "runs"])
        for r in rows:
            w.writerow([r.method, r.beta, "" if r.b is None else r.b, r.k, r.metric,
                        repr(r.mean), repr(r.std), r.runs])


def compare_runs(a: Sequence[float], b: Sequence[float]) -> dict[str, float]:
    """Two-sided p-values of paired and unpaired t-tests between score lists.

    Degenerate inputs (e.g. identical constant lists) give ``nan``.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        out = {"unpaired": float(sstats.ttest_ind(a, b).pvalue)}
        if len(a) == len(b):
            out["paired"] = float(sstats.ttest_rel(a, b).pvalue)
    return out
