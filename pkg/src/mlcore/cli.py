"""``mlcore`` command-line tool.

Subcommands: knn, fnn, range, kmeans, gen, bench.  Result files hold
0-based point indices.  Progress and diagnostics go to standard error;
standard output carries only machine-readable summaries.

Exit status: 0 on success, 1 for usage errors (bad flags or parameter
values), 2 for data errors (missing or malformed input files).
"""

import argparse
import os
import sys
import time

import numpy as np

from . import __version__
from .bench import load_manifest, emit_report, render_figures, run_bench
from .covertree import CoverTree
from .data import SeededRng, format_number, generate_uniform, load_csv, save_csv
from .errors import DataFormatError, DimensionMismatch, InvalidParameter
from .kdtree import KdTree
from .kmeans import KMeansConfig, kmeans_cluster
from .neighbors import FURTHEST, NEAREST, SELF, knn_search, range_search

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; route that to the usage code
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value >= 0.0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _add_tree_flags(p):
    p.add_argument("--reference", required=True, metavar="CSV", help="reference points")
    p.add_argument("--query", metavar="CSV", help="query points (default: the reference set, excluding each point itself)")
    p.add_argument("--tree", choices=("kd", "cover"), default="kd", help="index type (default kd)")
    p.add_argument("--metric", choices=("l1", "l2"), default="l2", help="distance (default l2)")
    p.add_argument("--leaf-size", type=_positive_int, default=20, help="kd-tree leaf size (default 20)")
    p.add_argument("--base", type=float, default=2.0, help="cover-tree expansion base (default 2)")


def build_parser():
    parser = _Parser(prog="mlcore", allow_abbrev=False,
                     description="Tree-based neighbor search and k-means clustering.")
    parser.add_argument("--version", action="version", version=f"mlcore {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    for name, what in (("knn", "nearest"), ("fnn", "furthest")):
        p = sub.add_parser(name, allow_abbrev=False, help=f"k {what} neighbors")
        _add_tree_flags(p)
        p.add_argument("--k", type=_positive_int, required=True, help="neighbors per query")
        p.add_argument("--traversal", choices=("single", "dual", "naive"), default="dual",
                       help="search strategy (default dual)")
        p.add_argument("--neighbors-out", default="neighbors.csv", metavar="CSV",
                       help="neighbor index output (default neighbors.csv)")
        p.add_argument("--distances-out", default="distances.csv", metavar="CSV",
                       help="distance output (default distances.csv)")

    p = sub.add_parser("range", allow_abbrev=False, help="all neighbors within a distance window")
    _add_tree_flags(p)
    p.add_argument("--low", type=_nonneg_float, required=True, help="smallest distance kept")
    p.add_argument("--high", type=_nonneg_float, required=True, help="largest distance kept")
    p.add_argument("--out", default="range.txt", metavar="FILE",
                   help="output, one line of index:distance pairs per query (default range.txt)")

    p = sub.add_parser("kmeans", allow_abbrev=False, help="Lloyd k-means clustering")
    p.add_argument("--input", required=True, metavar="CSV", help="points to cluster")
    p.add_argument("--clusters", type=_positive_int, required=True, help="number of clusters")
    p.add_argument("--initial-centroids", metavar="CSV", help="starting centroids (overrides --init)")
    p.add_argument("--init", choices=("random", "kmeanspp"), default="random",
                   help="initialization (default random partition)")
    p.add_argument("--empty", choices=("allow", "reseed"), default="reseed",
                   help="empty-cluster handling (default reseed)")
    p.add_argument("--metric", choices=("l1", "l2"), default="l2", help="distance (default l2)")
    p.add_argument("--max-iterations", type=_positive_int, default=1000, help="iteration cap (default 1000)")
    p.add_argument("--tolerance", type=_nonneg_float, default=1e-6,
                   help="stop once total centroid movement is at most this (default 1e-6)")
    p.add_argument("--seed", type=_seed, default=0, help="random seed (default 0)")
    p.add_argument("--centroids-out", default="centroids.csv", metavar="CSV",
                   help="centroid output (default centroids.csv)")
    p.add_argument("--assignments-out", default="assignments.csv", metavar="CSV",
                   help="assignment output (default assignments.csv)")

    p = sub.add_parser("gen", allow_abbrev=False, help="uniform random dataset")
    p.add_argument("--rows", type=_positive_int, required=True, help="number of points")
    p.add_argument("--cols", type=_positive_int, required=True, help="number of dimensions")
    p.add_argument("--seed", type=_seed, default=0, help="random seed (default 0)")
    p.add_argument("--out", required=True, metavar="CSV", help="output file")

    p = sub.add_parser("bench", allow_abbrev=False, help="run a benchmark manifest")
    p.add_argument("--manifest", required=True, metavar="FILE", help="benchmark manifest")
    p.add_argument("--trials", type=_positive_int, default=5, help="timed runs per entry (default 5)")
    p.add_argument("--format", choices=("markdown", "csv"), default="markdown",
                   help="report format (default markdown)")
    p.add_argument("--out", metavar="FILE", help="write the report here instead of standard output")
    p.add_argument("--figures", metavar="DIR", help="also render timing plots (PNG) into DIR")
    p.add_argument("--warmup", action="store_true", help="run one untimed trial per entry first")
    return parser


def _info(msg):
    print(msg, file=sys.stderr)


def _load(path, what):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{what} file not found: {path}")
    return load_csv(path)


def _index(args, ref):
    if args.tree == "kd":
        return KdTree(ref, args.leaf_size)
    return CoverTree(ref, args.metric, args.base)


def _cmd_neighbors(args, policy):
    ref = _load(args.reference, "reference")
    query = SELF if args.query is None else _load(args.query, "query")
    t0 = time.perf_counter()
    index = None if args.traversal == "naive" else _index(args, ref)
    t1 = time.perf_counter()
    result = knn_search(index, ref, query, args.k, args.metric, policy, args.traversal)
    t2 = time.perf_counter()
    save_csv(result.indices, args.neighbors_out)
    save_csv(result.distances, args.distances_out)
    _info(f"{args.command}: {result.indices.shape[0]} queries, k={args.k}, "
          f"build {t1 - t0:.4f}s, search {t2 - t1:.4f}s")
    return EXIT_OK


def _cmd_range(args):
    if args.low > args.high:
        raise InvalidParameter(f"--low {args.low} exceeds --high {args.high}")
    ref = _load(args.reference, "reference")
    query = SELF if args.query is None else _load(args.query, "query")
    index = _index(args, ref)
    result = range_search(index, ref, query, args.low, args.high, args.metric)
    lines = []
    for idx, dist in zip(result.indices, result.distances):
        lines.append(",".join(f"{i}:{format_number(d)}" for i, d in zip(idx.tolist(), dist.tolist())))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    _info(f"range: {len(lines)} queries, {sum(len(i) for i in result.indices)} pairs in [{args.low}, {args.high}]")
    return EXIT_OK


def _cmd_kmeans(args):
    data = _load(args.input, "input")
    initial = None
    if args.initial_centroids is not None:
        initial = _load(args.initial_centroids, "initial centroids")
    config = KMeansConfig(
        args.clusters, args.max_iterations, args.tolerance, args.metric,
        "random_partition" if args.init == "random" else "kmeanspp",
        "allow_empty" if args.empty == "allow" else "reseed_furthest",
        args.seed,
    )
    if initial is not None and initial.shape[1] != data.shape[1]:
        raise DimensionMismatch(initial.shape[1], data.shape[1], "initial centroids and input")
    result = kmeans_cluster(data, config, initial)
    save_csv(result.centroids, args.centroids_out)
    save_csv(result.assignments, args.assignments_out)
    print(f"objective={format_number(result.objective)}")
    print(f"iterations={result.iterations}")
    print(f"converged={'true' if result.converged else 'false'}")
    if result.reseeded_iterations:
        _info("kmeans: reseeded empty clusters at iterations "
              + " ".join(str(i) for i in result.reseeded_iterations))
    return EXIT_OK


def _cmd_gen(args):
    data = generate_uniform(args.rows, args.cols, SeededRng(args.seed))
    save_csv(data, args.out)
    _info(f"gen: wrote {args.rows}x{args.cols} to {args.out}")
    return EXIT_OK


def _cmd_bench(args):
    if not os.path.isfile(args.manifest):
        raise FileNotFoundError(f"manifest not found: {args.manifest}")
    manifest = load_manifest(args.manifest, args.trials)
    report = run_bench(manifest, warmup=args.warmup)
    text = emit_report(report, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.figures:
        for path in render_figures(report, args.figures):
            _info(f"bench: wrote {path}")
    for row in report.failures:
        _info(f"bench: {row.name} failed: {row.error}")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _info(str(exc))
        return EXIT_USAGE
    try:
        if args.command == "knn":
            return _cmd_neighbors(args, NEAREST)
        if args.command == "fnn":
            return _cmd_neighbors(args, FURTHEST)
        if args.command == "range":
            return _cmd_range(args)
        if args.command == "kmeans":
            return _cmd_kmeans(args)
        if args.command == "gen":
            return _cmd_gen(args)
        return _cmd_bench(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError, DataFormatError, DimensionMismatch) as exc:
        _info(f"mlcore {args.command}: {exc}")
        return EXIT_DATA
    except InvalidParameter as exc:
        _info(f"mlcore {args.command}: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
