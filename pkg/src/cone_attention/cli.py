"""``cone-attention`` command-line tool.

Exit codes: 0 success, 1 a check failed, 2 I/O or format error, 3 numeric
range error. File formats are described in :mod:`cone_attention.io`.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bench, hierarchy, io, oracle
from .attention import AttentionBatch, multi_head, pairwise_logits
from .errors import InconsistencyError, NumericRangeError
from .gradients import gradient_check
from .kernels import CONE_KINDS, cone_height_reduced
from .geometry import reduce_to_plane

EXIT_OK, EXIT_CHECK, EXIT_IO, EXIT_RANGE = 0, 1, 2, 3

CONFIG_HELP = (
    'JSON config, e.g. {"kernel": "penumbral", "gamma": 1.0, "light_height": 1.0, '
    '"ball_radius": 0.1, "beta": 1.0, "c": 0.0, "projection": "default", "heads": 1}'
)
EMBED_HELP = "embedding file: first line 'd n', then n rows of d floats"


def cmd_kernel(args) -> int:
    config = io.load_config(args.config)
    x = io.read_embeddings(args.input)
    logits = pairwise_logits(AttentionBatch(x, x, np.zeros((x.shape[0], 1))), config, args.threads)
    io.write_matrix_csv(logits.logits, args.output)
    return EXIT_OK


def cmd_attend(args) -> int:
    config = io.load_config(args.config)
    batch = AttentionBatch(io.read_embeddings(args.queries), io.read_embeddings(args.keys), io.read_embeddings(args.values))
    io.write_matrix_csv(multi_head(batch, config, config.heads, args.threads), args.output)
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    config = io.load_config(args.config)
    if config.kind not in CONE_KINDS:
        raise io.FormatError(f"oracle-check needs a cone kernel, got {config.kind!r}")
    worst, worst_pair = -1.0, None
    for u, v in oracle.sample_pairs(config, args.samples, args.seed, dim=args.dim):
        closed = float(cone_height_reduced(*reduce_to_plane(u, v), config))
        brute = oracle.oracle_bruteforce_height(u, v, config, args.grid)
        if abs(closed - brute) > worst:
            worst, worst_pair = abs(closed - brute), (u, v, closed, brute)
    u, v, closed, brute = worst_pair
    print(f"worst |dheight| = {worst:.3e} at u={u.coords.tolist()} v={v.coords.tolist()} "
          f"closed={closed:.17g} oracle={brute:.17g}")
    return EXIT_OK if worst <= 1e-5 else EXIT_CHECK


def cmd_grad_check(args) -> int:
    config = io.load_config(args.config)
    worst = gradient_check(config, args.samples, args.seed, dim=args.dim)
    print(f"{config.kind}/{config.resolved_projection}: max relative error {worst:.3e}")
    return EXIT_OK if worst <= 1e-5 else EXIT_CHECK


def cmd_tree_bench(args) -> int:
    config = io.load_config(args.config)
    if args.tree:
        tree = hierarchy.read_tree(args.tree)
    else:
        if args.generate == "random_attachment" and args.seed is None:
            raise io.FormatError("--seed is required for random_attachment trees")
        tree = hierarchy.generate_tree(args.generate, args.size, 0 if args.seed is None else args.seed)
    points = hierarchy.embed_tree_cone_consistent(tree, config)
    score = hierarchy.lca_rank_score(points, tree, config)
    report = {
        "config": io.config_to_dict(config),
        "nodes": tree.size,
        "leaves": int(tree.leaves().size),
        "constructive": score._asdict(),
    }
    if args.embeddings:
        io.write_embeddings(np.stack([p.coords for p in points]), args.embeddings)
    if args.train:
        if args.seed is None:
            raise io.FormatError("--seed is required with --train")
        result = hierarchy.train_toy(tree, config, args.steps, args.lr, args.seed, dim=args.dim)
        report["train"] = {
            "steps": args.steps,
            "learning_rate": args.lr,
            "seed": args.seed,
            "dim": args.dim,
            "initial_loss": float(result.loss_curve[0]),
            "final_loss": float(result.loss_curve[-1]),
            "loss_curve": result.loss_curve.tolist(),
            "scores": result.scores._asdict(),
        }
    with open(args.output, "w") as fh:
        json.dump(report, fh, indent=2, allow_nan=True)
        fh.write("\n")
    return EXIT_OK


def cmd_perf(args) -> int:
    config = io.load_config(args.config)
    try:
        sizes = [int(s) for s in args.sizes.split(",")]
    except ValueError:
        raise io.FormatError(f"--sizes must be comma separated integers, got {args.sizes!r}") from None
    rows, times = [], []
    for n in sizes:
        t = bench.measure_throughput(n, n, args.d, config, args.repetitions, args.seed, args.threads)
        times.append(t.median_seconds)
        rows.append({"kernel": config.kind, "n": n, "m": n, "d": args.d, "threads": args.threads,
                     "median_seconds": t.median_seconds, "tokens_per_second": t.tokens_per_second})
    bench.write_csv(rows, args.output)
    if len(sizes) >= 3:
        print(f"scaling exponent: {bench.scaling_exponent(times, sizes):.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cone-attention", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", required=True, help=CONFIG_HELP)
        p.set_defaults(fn=fn)
        return p

    p = add("kernel", cmd_kernel, "logit matrix of every pair of input points, as CSV")
    p.add_argument("--input", required=True, help=EMBED_HELP)
    p.add_argument("--output", required=True, help="CSV output (n x n, no header)")
    p.add_argument("--threads", type=int, default=1)

    p = add("attend", cmd_attend, "run (multi-head) attention, write the n x dv output as CSV")
    p.add_argument("--queries", required=True, help=EMBED_HELP)
    p.add_argument("--keys", required=True, help=EMBED_HELP)
    p.add_argument("--values", required=True, help=EMBED_HELP)
    p.add_argument("--output", required=True)
    p.add_argument("--threads", type=int, default=1)

    p = add("oracle-check", cmd_oracle_check, "closed-form sup heights vs the brute-force oracle")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--grid", type=int, default=oracle.DEFAULT_GRID)
    p.add_argument("--dim", type=int, default=2, help="dimension of the sampled points")

    p = add("grad-check", cmd_grad_check, "analytic gradients vs central differences at smooth points")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dim", type=int, default=3)

    p = add("tree-bench", cmd_tree_bench,
            "constructive tree embedding and LCA ranking scores, optional toy training; JSON report")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--tree", help="tree file: 'node_id parent_id' per line, root parent -1")
    src.add_argument("--generate", choices=("complete_binary", "random_attachment"))
    p.add_argument("--size", type=int, default=63, help="node count for --generate")
    p.add_argument("--output", required=True)
    p.add_argument("--embeddings", help="also write the constructive embedding here")
    p.add_argument("--train", action="store_true")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=1.0)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--seed", type=int)

    p = add("perf", cmd_perf, "attention timing table (CSV) and scaling exponent")
    p.add_argument("--sizes", default="128,256,512,1024", help="comma separated n (= m)")
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", required=True, help="CSV: " + ",".join(bench.CSV_COLUMNS))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except NumericRangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RANGE
    except InconsistencyError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
