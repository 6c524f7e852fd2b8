"""End-to-end acceptance checks, one test per criterion.

Each test records a ``criterion N: PASS|FAIL|SKIP`` line (printed in the
pytest terminal summary and to stdout) before asserting.
"""

import math
import os
import time
from collections import Counter

import numpy as np
import pytest

from smoothpairs.analysis import (
    FrequencyTable,
    top_mass_fraction,
    transition_rank_empirical,
    zipf_corpus,
    zipf_frequencies,
)
from smoothpairs.cli import main
from smoothpairs.graph import (
    Graph,
    clustering_coefficient,
    densify_neighborhoods,
    load_edge_list,
    neg_sampling_distribution,
    split_link_prediction,
    synth_scale_free,
)
from smoothpairs.linkpred import EvalRun, Method, compare_runs, run_experiment
from smoothpairs.pipeline import PipelineConfig
from smoothpairs.sampler import SamplerConfig, SmoothSampler, m_beta, smooth_stream
from smoothpairs.sketch import build_oracle, build_sketch, exact_oracle, pair_keys
from smoothpairs.train import TrainConfig, Trainer, pair_loss_and_gradient
from smoothpairs.walks import WalkConfig, WalkCorpus


def verdict(report, n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    report.append(line)
    print(line)
    assert ok, line


def skipped(report, n, detail):
    line = f"criterion {n}: SKIP - {detail}"
    report.append(line)
    print(line)
    pytest.skip(detail)


# ---------------------------------------------------------------------------- 1

def test_criterion_1_sampler_expectation(acceptance_report):
    t0 = time.perf_counter()
    f_big, beta = 5000, 0.5
    background = zipf_frequencies(3000, 1.1, tail=3)
    freqs = np.concatenate([[f_big], background])
    corpus = zipf_corpus(freqs, seed=0)
    oracle = exact_oracle(corpus)
    _, t = m_beta(freqs, beta)
    expected = t * f_big ** beta
    hits, worst = 0, 0.0
    for seed in range(100):
        sampler = SmoothSampler(corpus, oracle, SamplerConfig(beta, seed=seed))
        got = sum(int(np.count_nonzero((u == 0) & (v == 0))) for u, v in sampler)
        err = abs(got - expected)
        worst = max(worst, err)
        hits += err <= 0.05 * f_big
    elapsed = time.perf_counter() - t0
    verdict(acceptance_report, 1, hits >= 99 and elapsed < 60,
            f"{hits}/100 runs within 0.05*f={0.05 * f_big:.0f} of T*f^0.5={expected:.1f} "
            f"(T={t}, worst |err|={worst:.1f}), {elapsed:.1f}s")


# ---------------------------------------------------------------------------- 2

def test_criterion_2_pass_count_concentration(acceptance_report):
    t0 = time.perf_counter()
    freqs = zipf_frequencies(10_000, 1.5, total=1_000_000)
    corpus = zipf_corpus(freqs, seed=0)
    oracle = exact_oracle(corpus)
    _, t = m_beta(freqs, 0.5)
    passes = []
    for seed in range(100):
        sampler, stats = smooth_stream(corpus, oracle, SamplerConfig(0.5, seed=seed))
        for _ in sampler:
            pass
        passes.append(stats.passes)
    ok_runs = sum(t - 1 <= p <= t + 1 for p in passes)
    elapsed = time.perf_counter() - t0
    verdict(acceptance_report, 2, ok_runs >= 99 and elapsed < 300,
            f"M={corpus.num_pairs}, T={t}, passes in [T-1,T+1] for {ok_runs}/100 runs "
            f"(range {min(passes)}..{max(passes)}), {elapsed:.1f}s")


# ---------------------------------------------------------------------------- 3

def test_criterion_3_sketch_guarantees(acceptance_report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    missing = 0
    for i in range(100):
        z = float(rng.uniform(0.8, 2.0))
        freqs = zipf_frequencies(int(rng.integers(500, 3000)), z, total=int(rng.integers(5000, 30_000)))
        stream = zipf_corpus(freqs, seed=i)
        b = int(rng.integers(10, 200))
        sk = build_sketch(stream, b)
        heavy = np.flatnonzero(freqs > stream.num_pairs / b)
        missing += sum(int(r) not in sk for r in heavy)
    ok_a = missing == 0

    k = 20
    freqs = zipf_frequencies(10_000, 1.5, total=200_000)
    stream = zipf_corpus(freqs, seed=1)
    oracle = build_oracle(stream, 3 * k)
    n = stream.n
    exact_top = all(oracle.stored(r // n, r % n) and oracle.estimate(r // n, r % n) == freqs[r]
                    for r in range(k))

    g = synth_scale_free(300, 3, seed=3)
    corpus = WalkCorpus(g, WalkConfig(4, 20, 4, seed=2))
    brute = Counter()
    for u, v in corpus.chunks():
        brute.update(zip(u.tolist(), v.tolist()))
    oracle_c = build_oracle(corpus, len(brute))
    same = oracle_c.as_dict() == dict(brute) and oracle_c.default_w == 0
    elapsed = time.perf_counter() - t0
    verdict(acceptance_report, 3, ok_a and exact_top and same and elapsed < 120,
            f"(a) heavy pairs missing after pass 1: {missing}; (b) top-{k} exact with b={3 * k}: {exact_top}; "
            f"(c) b>=P equals brute force: {same}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------- 4

def test_criterion_4_beta_one_is_plain_corpus(acceptance_report):
    t0 = time.perf_counter()
    g = synth_scale_free(500, 3, seed=4)
    corpus = WalkCorpus(g, WalkConfig(5, 40, 5, seed=9))
    oracle = build_oracle(corpus, 1000)
    sampler, stats = smooth_stream(corpus, oracle, SamplerConfig(1.0, seed=3))
    out = [np.concatenate(x) for x in zip(*sampler)]
    raw = [np.concatenate(x) for x in zip(*corpus.chunks())]
    identical = all(a.dtype == b.dtype and a.tobytes() == b.tobytes() for a, b in zip(out, raw))
    elapsed = time.perf_counter() - t0
    verdict(acceptance_report, 4, identical and stats.passes == 1 and elapsed < 60,
            f"{len(out[0])} pairs bit-identical: {identical}, passes={stats.passes}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------- 5

def test_criterion_5_gradient_finite_differences(acceptance_report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    h = 1e-5
    worst = 0.0
    for i in range(100):
        d = int(rng.integers(2, 33))
        u, v = rng.normal(size=d), rng.normal(size=d)
        label = i % 2
        _, gu, gv = pair_loss_and_gradient(u, v, label)
        eye = np.eye(d)
        nu = [(pair_loss_and_gradient(u + h * e, v, label)[0] - pair_loss_and_gradient(u - h * e, v, label)[0]) / (2 * h)
              for e in eye]
        nv = [(pair_loss_and_gradient(u, v + h * e, label)[0] - pair_loss_and_gradient(u, v - h * e, label)[0]) / (2 * h)
              for e in eye]
        num = np.concatenate([nu, nv])
        ana = np.concatenate([gu, gv])
        worst = max(worst, np.linalg.norm(ana - num) / max(np.linalg.norm(num), 1e-12))
    elapsed = time.perf_counter() - t0
    verdict(acceptance_report, 5, worst <= 1e-4 and elapsed < 10,
            f"max relative error over 100 checks {worst:.2e}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------- 6

def factorisation_correlation(beta):
    edges = [(i, (i + 1) % 12) for i in range(12)] + [(0, 6), (2, 9), (3, 7), (1, 4), (5, 10), (8, 11)]
    g = Graph.from_edges(12, edges)
    window, k = 3, 5
    corpus = WalkCorpus(g, WalkConfig(walks_per_node=20, walk_length=20, window=window, seed=1))
    oracle = exact_oracle(corpus)
    mu = neg_sampling_distribution(g, 0.75)
    trainer = Trainer(12, TrainConfig(dim=12, negatives=k, optimizer="sgd", lr=0.01, batch_size=64, seed=0), mu)
    for epoch in range(50):
        trainer.fit(smooth_stream(corpus, oracle, SamplerConfig(beta, seed=100 + epoch))[0])
    counts = Counter()
    for w in corpus.walks().tolist():
        for i in range(len(w)):
            for j in range(max(0, i - window), min(len(w), i + window + 1)):
                if j != i:
                    counts[(w[i], w[j])] += 1
    per_center = np.zeros(12)
    for (u, _), f in counts.items():
        per_center[u] += f ** beta
    xs, ys = [], []
    for (u, v), f in counts.items():
        if f >= 5:
            xs.append(trainer.emb.center[u] @ trainer.emb.context[v])
            ys.append(math.log(f ** beta / (per_center[u] * mu.weights[v])) - math.log(k))
    return float(np.corrcoef(xs, ys)[0, 1]), len(xs)


def test_criterion_6_factorisation_recovery(acceptance_report):
    t0 = time.perf_counter()
    results = {beta: factorisation_correlation(beta) for beta in (0.5, 1.0)}
    elapsed = time.perf_counter() - t0
    ok = all(r >= 0.9 for r, _ in results.values()) and elapsed < 300
    verdict(acceptance_report, 6, ok,
            ", ".join(f"beta={b}: r={r:.3f} over {m} pairs" for b, (r, m) in results.items())
            + f", {elapsed:.1f}s")


# ---------------------------------------------------------------------------- 7

def test_criterion_7_transition_rank(acceptance_report):
    t0 = time.perf_counter()
    Ps = [10 ** 3, 10 ** 4, 10 ** 5]
    js = [transition_rank_empirical(FrequencyTable.from_counts(zipf_frequencies(P, 1.5, tail=10)), 0.5)
          for P in Ps]
    within = all(P ** (1 / 3) / 2 <= j <= 2 * P ** (1 / 3) for P, j in zip(Ps, js))
    slope = float(np.polyfit(np.log(Ps), np.log(js), 1)[0])
    elapsed = time.perf_counter() - t0
    verdict(acceptance_report, 7, within and abs(slope - 1 / 3) <= 0.1 and elapsed < 120,
            f"j={js} vs P^(1/3)={[round(P ** (1 / 3), 1) for P in Ps]}, growth exponent {slope:.3f}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------- 8

def paired_precision(g, betas, seeds=20):
    """Mean precision@100 per beta; seed r drives split, walks, training and candidates for every beta."""
    scores = {b: [] for b in betas}
    for seed in range(seeds):
        split = split_link_prediction(g, 0.2, seed)
        run = EvalRun(seed=seed, ks=(100,), fraction=0.001, positive_fraction=0.1, repetitions=5)
        for beta in betas:
            cfg = PipelineConfig(walk=WalkConfig(5, 40, 5, seed=seed), train=TrainConfig(dim=64, seed=seed),
                                 beta=beta, budget_frac=0.10, sampler_seed=seed)
            rows = run_experiment(g, Method(f"beta={beta}", cfg), run, split=split)
            scores[beta].append(next(r.mean for r in rows if r.metric == "precision"))
    return scores


@pytest.mark.slow
def test_criterion_8_precision_direction(acceptance_report):
    t0 = time.perf_counter()
    low = synth_scale_free(2000, 3, seed=0)
    dense = densify_neighborhoods(low, hub_fraction=1.0, extra_edges=6000, seed=1)
    cc_low, cc_dense = clustering_coefficient(low), clustering_coefficient(dense)
    s_low = paired_precision(low, (0.5, 1.0))
    s_dense = paired_precision(dense, (0.75, 0.3))
    m = {k: float(np.mean(v)) for k, v in {**{("low", b): s for b, s in s_low.items()},
                                            **{("dense", b): s for b, s in s_dense.items()}}.items()}
    p_low = compare_runs(s_low[0.5], s_low[1.0])["paired"]
    p_dense = compare_runs(s_dense[0.75], s_dense[0.3])["paired"]
    elapsed = time.perf_counter() - t0
    ok_low = m[("low", 0.5)] >= m[("low", 1.0)]
    ok_dense = m[("dense", 0.75)] >= m[("dense", 0.3)]
    verdict(acceptance_report, 8, ok_low and ok_dense and cc_low < 0.05 and cc_dense > 0.3 and elapsed < 1800,
            f"low CC={cc_low:.3f}: P@100 beta0.5={m[('low', 0.5)]:.4f} vs beta1.0={m[('low', 1.0)]:.4f} "
            f"(paired p={p_low:.2f}); dense CC={cc_dense:.3f}: beta0.75={m[('dense', 0.75)]:.4f} vs "
            f"beta0.3={m[('dense', 0.3)]:.4f} (paired p={p_dense:.2f}), {elapsed:.0f}s")


# ---------------------------------------------------------------------------- 9

def test_criterion_9_skew_on_cora(acceptance_report):
    path = os.environ.get("CORA_EDGES")
    if not path or not os.path.exists(path):
        skipped(acceptance_report, 9, "set CORA_EDGES to a Cora edge list to run (dataset not bundled)")
    t0 = time.perf_counter()
    g, *_ = load_edge_list(path)
    cc = clustering_coefficient(g)
    corpus = WalkCorpus(g, WalkConfig(10, 80, 10, seed=0))
    keys = np.concatenate([pair_keys(u, v, g.n) for u, v in corpus.chunks()])
    _, counts = np.unique(keys, return_counts=True)
    top1 = top_mass_fraction(FrequencyTable.from_counts(counts), [1])[0]
    elapsed = time.perf_counter() - t0
    verdict(acceptance_report, 9, abs(top1 - 0.487) <= 0.02 and abs(cc - 0.241) <= 0.001 and elapsed < 600,
            f"top-1% mass {top1:.3f} (target 0.487+-0.02), CC {cc:.4f} (target 0.241+-0.001), {elapsed:.0f}s")


# ---------------------------------------------------------------------------- 10

def test_criterion_10_cli_determinism(acceptance_report, tmp_path):
    graph_dir = tmp_path / "g"
    assert main(["synth", "--nodes", "300", "--attach", "3", "--seed", "5", "--out", str(graph_dir)]) == 0
    graph = str(graph_dir / "graph.txt")
    small = ["--walk-length", "20", "--walks-per-node", "4", "--window", "4"]
    runs = {
        "train": ["train", "--graph", graph, *small, "--dim", "16", "--seed", "7"],
        "train-beta1": ["train", "--graph", graph, *small, "--dim", "16", "--beta", "1.0", "--seed", "7"],
        "walk": ["walk", "--graph", graph, *small, "--seed", "7"],
        "sketch": ["sketch", "--graph", graph, *small, "--seed", "7"],
        "analyze": ["analyze", "--corpus-from", graph, *small, "--betas", "0.5,0.75,1.0"],
        "eval": ["eval", "--graph", graph, *small, "--dim", "16", "--betas", "0.5,1.0", "--fraction", "0.01",
                 "--positive-fraction", "0.2", "--ks", "10", "--repetitions", "3"],
    }
    differing = []
    for name, argv in runs.items():
        a, b, c = (tmp_path / f"{name}-{i}" for i in "abc")
        assert main(argv + ["--out", str(a)]) == 0
        assert main(argv + ["--out", str(b)]) == 0
        assert main(["rerun", str(a / "manifest.json"), "--out", str(c)]) == 0
        files = sorted(p.name for p in a.iterdir() if p.name != "manifest.json")
        for d in (b, c):
            if files != sorted(p.name for p in d.iterdir() if p.name != "manifest.json") or any(
                    (a / f).read_bytes() != (d / f).read_bytes() for f in files):
                differing.append(f"{name}:{d.name}")
    verdict(acceptance_report, 10, not differing,
            f"{len(runs)} subcommands x (repeat, rerun-from-manifest) bit-identical"
            + (f"; differing: {differing}" if differing else ""))
