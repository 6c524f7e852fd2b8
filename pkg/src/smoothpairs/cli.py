"""Command-line driver: ``smoothpairs {synth,walk,sketch,train,analyze,eval,rerun}``.

Every subcommand writes into ``--out DIR`` and leaves a ``manifest.json``
there holding the fully resolved command line, so ``smoothpairs rerun
DIR/manifest.json --out OTHER`` reproduces the outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path


from . import __version__
from .analysis import (
    FrequencyTable,
    expected_pos_neg,
    significant_pairs,
    write_rank_frequency_csv,
    write_skew_csv,
)
from .graph import (
    GraphError,
    clustering_coefficient,
    densify_neighborhoods,
    load_edge_list,
    neg_sampling_distribution,
    save_edge_list,
    save_id_map,
    split_link_prediction,
    synth_scale_free,
)
from .linkpred import EvalRun, Method, compare_runs, run_experiment, write_scores_csv
from .pipeline import PipelineConfig, build_frequency_oracle, default_beta, embed
from .sampler import SamplerError
from .sketch import CorpusMismatch
from .train import TrainConfig, TrainingDiverged, export_embeddings
from .walks import Node2Vec, Uniform, WalkConfig, WalkCorpus

logger = logging.getLogger("smoothpairs")

MANIFEST = "manifest.json"


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors are a single line on stderr."""

    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


# ----------------------------------------------------------------------------- flags

def _add_out(p):
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.set_defaults(subparser=p)


def _add_walk_flags(p, graph_flag="--graph"):
    p.add_argument(graph_flag, dest="graph", required=True, type=Path, help="edge-list file")
    p.add_argument("--walk-length", type=int, default=80)
    p.add_argument("--walks-per-node", type=int, default=10)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--node2vec-p", type=float, default=None)
    p.add_argument("--node2vec-q", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help=">1 generates walks in parallel")


def _add_sketch_flags(p):
    p.add_argument("--budget-frac", type=float, default=0.10,
                   help="sketch budget as a fraction of the estimated unique-pair count")
    p.add_argument("--pairs-estimate", type=int, default=None,
                   help="use this unique-pair count instead of estimating it")


def _add_train_flags(p):
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--neg-alpha", type=float, default=0.75)
    p.add_argument("--beta", type=float, default=None,
                   help="smoothing exponent (default: 0.5 if clustering < 0.2 else 0.75)")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--lr", type=float, default=0.01)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="smoothpairs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a scale-free test graph")
    p.add_argument("--nodes", type=int, default=2000)
    p.add_argument("--attach", type=int, default=3, help="edges added per new node")
    p.add_argument("--densify-edges", type=int, default=0,
                   help="close this many extra triangles around hubs")
    p.add_argument("--hub-fraction", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    _add_out(p)

    p = sub.add_parser("walk", help="generate a random-walk corpus")
    _add_walk_flags(p)
    _add_out(p)

    p = sub.add_parser("sketch", help="build the two-pass pair-frequency oracle")
    _add_walk_flags(p)
    _add_sketch_flags(p)
    _add_out(p)

    p = sub.add_parser("train", help="sketch, smooth-sample and train embeddings")
    _add_walk_flags(p)
    _add_sketch_flags(p)
    _add_train_flags(p)
    _add_out(p)

    p = sub.add_parser("analyze", help="pair-frequency diagnostics of a walk corpus")
    _add_walk_flags(p, graph_flag="--corpus-from")
    p.add_argument("--betas", type=_float_list, default=[0.5, 0.75, 1.0])
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--neg-alpha", type=float, default=0.75)
    _add_out(p)

    p = sub.add_parser("eval", help="link-prediction precision@k / recall@k")
    _add_walk_flags(p)
    _add_sketch_flags(p)
    _add_train_flags(p)
    p.add_argument("--betas", type=_float_list, default=None,
                   help="compare several smoothing exponents (overrides --beta)")
    p.add_argument("--ks", type=_int_list, default=[100])
    p.add_argument("--fraction", type=float, default=0.001, help="share of all node pairs sampled")
    p.add_argument("--positive-fraction", type=float, default=None,
                   help="share of removed edges added (default: --fraction)")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--repetitions", type=int, default=100)
    p.add_argument("--retrain-per-trial", action="store_true")
    _add_out(p)

    p = sub.add_parser("rerun", help="repeat the run recorded in a manifest")
    p.add_argument("manifest", type=Path)
    _add_out(p)
    return parser


# ----------------------------------------------------------------------------- helpers

def _walk_config(args) -> WalkConfig:
    if (args.node2vec_p is None) != (args.node2vec_q is None):
        raise ValueError("--node2vec-p and --node2vec-q must be given together")
    bias = Uniform() if args.node2vec_p is None else Node2Vec(args.node2vec_p, args.node2vec_q)
    return WalkConfig(args.walks_per_node, args.walk_length, args.window, seed=args.seed, bias=bias)


def _pipeline_config(args, beta=None) -> PipelineConfig:
    train = TrainConfig(dim=args.dim, negatives=args.negatives, neg_alpha=args.neg_alpha,
                        optimizer=args.optimizer, lr=args.lr, seed=args.seed)
    return PipelineConfig(walk=_walk_config(args), train=train,
                          beta=args.beta if beta is None else beta,
                          budget_frac=args.budget_frac, pairs_estimate=args.pairs_estimate,
                          sampler_seed=args.seed, threads=args.threads)


def _load(args):
    loaded = load_edge_list(args.graph)
    if loaded.self_loops or loaded.duplicates:
        logger.warning("%s: dropped %d self-loops and %d duplicate edges",
                       args.graph, loaded.self_loops, loaded.duplicates)
    return loaded


def _resolved_argv(parser, argv: list[str]) -> list[str]:
    """Re-express ``argv`` with every option spelled out (defaults included)."""
    args = parser.parse_args(argv)
    out = [args.command]
    for action in args.subparser._actions:
        if not action.option_strings or action.dest in ("help", "out"):
            continue
        value = getattr(args, action.dest)
        flag = action.option_strings[-1]
        if isinstance(action, argparse._StoreTrueAction):
            if value:
                out.append(flag)
        elif value is not None:
            if isinstance(value, list):
                value = ",".join(repr(x) for x in value)
            elif isinstance(value, Path):
                value = value.resolve()
            out += [flag, str(value)]
    return out


def _write_manifest(out: Path, argv: list[str], params: dict, started: str) -> None:
    manifest = {
        "tool": "smoothpairs",
        "version": __version__,
        "argv": argv,
        "params": params,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    with open(out / MANIFEST, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ----------------------------------------------------------------------------- commands

def cmd_synth(args) -> dict:
    g = synth_scale_free(args.nodes, args.attach, args.seed)
    if args.densify_edges:
        g = densify_neighborhoods(g, args.hub_fraction, args.densify_edges, seed=args.seed + 1)
    save_edge_list(g, args.out / "graph.txt")
    cc = clustering_coefficient(g)
    logger.info("n=%d m=%d clustering=%.4f", g.n, g.m, cc)
    return {"n": g.n, "m": g.m, "clustering": cc}


def cmd_walk(args) -> dict:
    g, ids, *_ = _load(args)
    corpus = WalkCorpus(g, _walk_config(args), threads=args.threads)
    corpus.dump(args.out / "walks.txt")  # internal ids; ids.txt maps them back
    save_id_map(ids, args.out / "ids.txt")
    return {"n": g.n, "pairs": corpus.num_pairs}


def cmd_sketch(args) -> dict:
    g, ids, *_ = _load(args)
    corpus = WalkCorpus(g, _walk_config(args), threads=args.threads)
    oracle, budget = build_frequency_oracle(corpus, args.budget_frac, args.pairs_estimate, seed=args.seed)
    oracle.save(args.out / "oracle.txt")
    save_id_map(ids, args.out / "ids.txt")
    return {"budget": budget, "stored": len(oracle.keys), "pairs": corpus.num_pairs,
            "default_w": oracle.default_w}


def cmd_train(args) -> dict:
    g, ids, *_ = _load(args)
    cfg = _pipeline_config(args)
    res = embed(g, cfg)
    export_embeddings(res.embeddings, ids, args.out / "embeddings.txt")
    save_id_map(ids, args.out / "ids.txt")
    res.stats[0].to_csv(args.out / "sampling.csv")
    logger.info("beta=%s budget=%s %s", res.beta, res.budget, res.stats[0].summary())
    return {"pipeline": cfg.to_dict(), "beta": res.beta, "budget": res.budget,
            "clustering": res.clustering, "passes": res.stats[0].passes}


def cmd_analyze(args) -> dict:
    g, ids, *_ = _load(args)
    corpus = WalkCorpus(g, _walk_config(args), threads=args.threads)
    oracle, _ = build_frequency_oracle(corpus, None)
    pairs = oracle.as_dict()
    tbl = FrequencyTable.from_mapping(pairs)
    write_skew_csv(args.out / "skew.csv", tbl)
    mu = neg_sampling_distribution(g, args.neg_alpha)
    with open(args.out / "significance.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["beta", "significant_fraction"])
        for beta in args.betas:
            write_rank_frequency_csv(args.out / f"rank_frequency_beta{beta:g}.csv", tbl, beta)
            pos, neg = expected_pos_neg(pairs, beta, mu.weights, args.negatives)
            keep = pos + neg >= 1
            w.writerow([beta, repr(significant_pairs(pos[keep], neg[keep]))])
    return {"pairs": int(tbl.total), "unique": tbl.unique, "clustering": clustering_coefficient(g)}


def cmd_eval(args) -> dict:
    g, ids, *_ = _load(args)
    cc = clustering_coefficient(g)
    betas = args.betas if args.betas else [args.beta if args.beta is not None else default_beta(cc)]
    run = EvalRun(seed=args.seed, ks=tuple(args.ks), fraction=args.fraction,
                  positive_fraction=args.positive_fraction, repetitions=args.repetitions,
                  test_fraction=args.test_fraction, retrain_per_trial=args.retrain_per_trial)
    split = split_link_prediction(g, run.test_fraction, run.seed)
    rows = []
    for beta in betas:
        rows += run_experiment(g, Method(f"beta={beta:g}", _pipeline_config(args, beta)), run, split=split)
    write_scores_csv(args.out / "scores.csv", rows)
    if len(betas) > 1:
        with open(args.out / "comparisons.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "metric", "method_a", "method_b", "p_paired", "p_unpaired"])
            by_key = {}
            for r in rows:
                by_key.setdefault((r.k, r.metric), []).append(r)
            for (k, metric), group in by_key.items():
                for i, a in enumerate(group):
                    for b in group[i + 1:]:
                        p = compare_runs(a.values, b.values)
                        w.writerow([k, metric, a.method, b.method, repr(p["paired"]), repr(p["unpaired"])])
    return {"clustering": cc, "betas": betas}


COMMANDS = {
    "synth": cmd_synth,
    "walk": cmd_walk,
    "sketch": cmd_sketch,
    "train": cmd_train,
    "analyze": cmd_analyze,
    "eval": cmd_eval,
}


def run(argv: list[str]) -> None:
    """Execute one subcommand; raises on failure."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "rerun":
        try:
            recorded = json.loads(args.manifest.read_text())["argv"]
        except (OSError, ValueError, KeyError) as exc:
            raise ValueError(f"{args.manifest}: not a readable manifest ({exc})") from None
        run(recorded + ["--out", str(args.out)])
        return
    resolved = _resolved_argv(parser, [a for a in argv if a not in ("-v", "--verbose")])
    started = datetime.now(timezone.utc).isoformat()
    args.out.mkdir(parents=True, exist_ok=True)
    params = COMMANDS[args.command](args)
    _write_manifest(args.out, resolved, params, started)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        run(argv)
    except (GraphError, SamplerError, CorpusMismatch, TrainingDiverged, ValueError, OverflowError, OSError) as exc:
        print(f"smoothpairs: error: {exc}".splitlines()[0], file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
