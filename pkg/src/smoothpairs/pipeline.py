"""End-to-end embedding: walks -> frequency oracle -> smooth sampling -> SGNS."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import _rng
from .graph import Graph, clustering_coefficient, neg_sampling_distribution
from .sampler import SampleStats, SamplerConfig, SmoothSampler
from .sketch import FrequencyOracle, build_oracle, exact_oracle, pair_keys
from .train import EmbeddingMatrices, TrainConfig, Trainer
from .walks import Node2Vec, Uniform, WalkConfig, WalkCorpus, _walk_batch, window_positions

logger = logging.getLogger(__name__)

LOW_CC_THRESHOLD = 0.2


def default_beta(cc: float) -> float:
    """0.5 for weakly clustered graphs, 0.75 otherwise."""
    return 0.5 if cc < LOW_CC_THRESHOLD else 0.75


@dataclass(frozen=True)
class PipelineConfig:
    walk: WalkConfig = field(default_factory=WalkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    beta: float | None = None  # None: pick from the clustering coefficient
    budget_frac: float | None = 0.10  # None: exact counts
    pairs_estimate: int | None = None  # overrides the sampled estimate of P
    sampler_seed: int = 0
    upper_bound: float | None = None
    epochs: int = 1
    threads: int = 1

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        bias = self.walk.bias
        d["walk"]["bias"] = ({"kind": "node2vec", "p": bias.p, "q": bias.q}
                             if isinstance(bias, Node2Vec) else {"kind": "uniform"})
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PipelineConfig":
        d = dict(d)
        w = dict(d.pop("walk"))
        b = w.pop("bias")
        bias = Node2Vec(b["p"], b["q"]) if b["kind"] == "node2vec" else Uniform()
        return cls(walk=WalkConfig(bias=bias, **w), train=TrainConfig(**d.pop("train")), **d)


def estimate_unique_pairs(corpus: WalkCorpus, rate: float = 0.01, seed: int = 0) -> int:
    """Estimate P from a ``rate`` subsample of walks.

    Unique-pair counts are measured on nested quarter, half and full
    subsamples; the log-log growth between them is extrapolated to the full
    corpus and capped by ``M``.
    """
    n, s = corpus.n, corpus.cfg.walks_per_node
    total_walks = n * s
    k = max(4, int(round(rate * total_walks)))
    if k >= total_walks:
        return int(len(np.unique(np.concatenate([pair_keys(u, v, n) for u, v in corpus.chunks()]))))
    rng = np.random.default_rng(seed)
    pick = rng.choice(total_walks, size=k, replace=False)
    walks = _walk_batch(corpus.graph, corpus.cfg, pick // s, pick % s, corpus._edge_keys)
    ci, cj = window_positions(corpus.cfg.walk_length, corpus.cfg.window)
    sizes = [max(1, k // 4), max(2, k // 2), k]
    uniq = []
    for m in sizes:
        w = walks[:m]
        uniq.append(len(np.unique(pair_keys(w[:, ci].ravel(), w[:, cj].ravel(), n))))
    slope = np.polyfit(np.log(sizes), np.log(uniq), 1)[0] if uniq[0] < uniq[-1] else 0.0
    slope = float(np.clip(slope, 0.0, 1.0))
    est = uniq[-1] * (total_walks / k) ** slope
    return int(min(max(est, uniq[-1]), corpus.num_pairs))


@dataclass
class EmbedResult:
    embeddings: EmbeddingMatrices
    beta: float
    budget: int | None
    oracle: FrequencyOracle
    stats: list[SampleStats]
    losses: list[float]
    clustering: float


def build_frequency_oracle(corpus: WalkCorpus, budget_frac: float | None,
                           pairs_estimate: int | None = None, seed: int = 0) -> tuple[FrequencyOracle, int | None]:
    if budget_frac is None:
        return exact_oracle(corpus), None
    p_est = pairs_estimate if pairs_estimate is not None else estimate_unique_pairs(corpus, seed=seed)
    budget = max(1, int(math.ceil(budget_frac * p_est)))
    return build_oracle(corpus, budget), budget


def embed(graph: Graph, cfg: PipelineConfig, oracle: FrequencyOracle | None = None,
          mu=None) -> EmbedResult:
    """Smooth-sample a walk corpus of ``graph`` and train SGNS embeddings on it.

    ``beta == 1`` skips the sketch entirely (the stream is the plain corpus).
    """
    corpus = WalkCorpus(graph, cfg.walk, threads=cfg.threads)
    cc = clustering_coefficient(graph)
    beta = cfg.beta if cfg.beta is not None else default_beta(cc)
    budget = None
    if oracle is None:
        if beta == 1:
            oracle = FrequencyOracle(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                                     corpus.num_pairs, 1, graph.n)
        else:
            oracle, budget = build_frequency_oracle(corpus, cfg.budget_frac, cfg.pairs_estimate,
                                                    seed=cfg.walk.seed)
    else:
        budget = oracle.budget
    if mu is None:
        mu = neg_sampling_distribution(graph, cfg.train.neg_alpha)
    trainer = Trainer(graph.n, cfg.train, mu)
    all_stats = []
    for epoch in range(cfg.epochs):
        scfg = SamplerConfig(beta=beta, seed=_rng.derive_seed(cfg.sampler_seed, epoch),
                             upper_bound=cfg.upper_bound)
        sampler = SmoothSampler(corpus, oracle, scfg)
        trainer.fit(sampler)
        all_stats.append(sampler.stats)
        logger.info("epoch %d: %s", epoch, sampler.stats.summary())
    return EmbedResult(trainer.emb, beta, budget, oracle, all_stats, trainer.losses, cc)
