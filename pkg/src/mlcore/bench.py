"""Timing harness for k-NN and k-means runs.

A manifest lists one benchmark per line::

    # name, task, source, k, options...
    wine,    knn,    data/wine.csv,     3, tree=kd, traversal=dual
    randu,   knn,    gen:100000x10:1,   3, traversal=naive
    cloud,   kmeans, data/cloud.csv,    10, init=kmeanspp, seed=7

``source`` is a CSV path (relative paths resolve against the manifest's
directory) or ``gen:ROWSxCOLS:SEED`` for seeded uniform data.  Each entry
is loaded once, outside the timed region, then run for the requested
number of trials.  k-NN trials time tree construction and the search
separately; k-means trials time the whole clustering from starting
centroids that are computed once and shared by every trial.
"""

import csv
import io
import math
import os
import re
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .covertree import CoverTree
from .data import SeededRng, generate_uniform, load_csv
from .errors import DataFormatError, InvalidParameter, MlcoreError
from .kdtree import KdTree
from .kmeans import KMeansConfig, kmeans_cluster
from .neighbors import SELF, knn_search

DEFAULT_TRIALS = 5
TASKS = ("knn", "kmeans")

_KNN_OPTIONS = {"tree": ("kd", "cover"), "traversal": ("dual", "single", "naive"),
                "metric": None, "leaf_size": None, "base": None}
_KMEANS_OPTIONS = {"init": ("random_partition", "kmeanspp"),
                   "empty": ("reseed_furthest", "allow_empty"),
                   "metric": None, "max_iterations": None, "tolerance": None, "seed": None}
_GEN = re.compile(r"^gen:(\d+)x(\d+):(\d+)$")


@dataclass(frozen=True)
class GenSpec:
    rows: int
    cols: int
    seed: int

    def __str__(self):
        return f"gen:{self.rows}x{self.cols}:{self.seed}"


@dataclass(frozen=True)
class BenchEntry:
    name: str
    task: str
    source: object
    k: int
    options: tuple = ()

    def option(self, key, default=None):
        return dict(self.options).get(key, default)

    @property
    def variant(self):
        if self.task == "knn":
            traversal = self.option("traversal", "dual")
            if traversal == "naive":
                return "naive"
            return f"{self.option('tree', 'kd')}-{traversal}"
        return f"{self.option('init', 'random_partition')}/{self.option('empty', 'reseed_furthest')}"


@dataclass
class BenchManifest:
    entries: list
    trials: int = DEFAULT_TRIALS


def parse_manifest(text, base_dir="."):
    entries = []
    names = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) < 4:
            raise DataFormatError("manifest line needs name, task, source and k", row=lineno)
        name, task, source, k = fields[:4]
        if not name:
            raise DataFormatError("empty benchmark name", row=lineno)
        if name in names:
            raise DataFormatError(f"duplicate benchmark name {name!r}", row=lineno)
        names.add(name)
        if task not in TASKS:
            raise DataFormatError(f"unknown task {task!r}", row=lineno)
        try:
            k = int(k)
        except ValueError:
            raise DataFormatError(f"k must be an integer, got {k!r}", row=lineno) from None
        if k < 1:
            raise DataFormatError("k must be positive", row=lineno)
        m = _GEN.match(source)
        if m:
            spec = GenSpec(int(m.group(1)), int(m.group(2)), int(m.group(3)))
            if spec.rows < 1 or spec.cols < 1:
                raise DataFormatError(f"generated shape must be positive: {source}", row=lineno)
            source = spec
        elif source.startswith("gen:"):
            raise DataFormatError(f"malformed generator spec {source!r}", row=lineno)
        elif not os.path.isabs(source):
            source = os.path.normpath(os.path.join(base_dir, source))
        options = _parse_options(fields[4:], task, lineno)
        entries.append(BenchEntry(name, task, source, k, options))
    return BenchManifest(entries)


def load_manifest(path, trials=DEFAULT_TRIALS):
    with open(path, "r", encoding="utf-8") as fh:
        manifest = parse_manifest(fh.read(), os.path.dirname(os.path.abspath(path)))
    manifest.trials = trials
    return manifest


def _parse_options(items, task, lineno):
    allowed = _KNN_OPTIONS if task == "knn" else _KMEANS_OPTIONS
    out = {}
    for item in items:
        if not item:
            continue
        key, sep, value = item.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if not sep or not value:
            raise DataFormatError(f"option {item!r} is not key=value", row=lineno)
        if key not in allowed:
            raise DataFormatError(f"unknown {task} option {key!r}", row=lineno)
        choices = allowed[key]
        if choices is not None and value not in choices:
            raise DataFormatError(f"{key} must be one of {', '.join(choices)}", row=lineno)
        out[key] = value
    return tuple(sorted(out.items()))


# --- running ------------------------------------------------------------------

@dataclass
class BenchRow:
    name: str
    task: str
    variant: str
    build: list = field(default_factory=list)
    run: list = field(default_factory=list)
    iterations: int = None
    error: str = None

    @property
    def failed(self):
        return self.error is not None

    @property
    def trials(self):
        return len(self.run)

    @property
    def build_mean(self):
        return statistics.fmean(self.build) if self.build else math.nan

    @property
    def run_mean(self):
        return statistics.fmean(self.run) if self.run else math.nan


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    @property
    def failures(self):
        return [r for r in self.rows if r.failed]

    def rounded(self, places=4):
        """Copy with every timing rounded as the text reports print it."""
        def rnd(values):
            return [float(f"{v:.{places}f}") for v in values]
        return BenchReport([BenchRow(r.name, r.task, r.variant, rnd(r.build), rnd(r.run),
                                     r.iterations, r.error) for r in self.rows])


def default_loader(source):
    if isinstance(source, GenSpec):
        return generate_uniform(source.rows, source.cols, SeededRng(source.seed))
    return load_csv(source)


def run_bench(manifest, loader=default_loader, warmup=False, clock=time.perf_counter):
    """Run every manifest entry and collect wall-clock timings.

    Loading happens before the clock starts.  Compiled kernels are warmed
    on a tiny problem first so one-time compilation never lands in a
    trial.  ``warmup=True`` additionally runs one untimed full trial per
    entry.  An entry whose data cannot be loaded or whose run fails is
    reported as failed and the harness moves on.
    """
    trials = int(manifest.trials)
    if trials < 1:
        raise InvalidParameter("trials must be >= 1")
    report = BenchReport()
    for entry in manifest.entries:
        row = BenchRow(entry.name, entry.task, entry.variant)
        report.rows.append(row)
        try:
            data = loader(entry.source)
            if entry.task == "knn":
                job = _knn_job(entry, data)
            else:
                job = _kmeans_job(entry, data)
            job(clock, warm=True)
            if warmup:
                job(clock)
            for _ in range(trials):
                build, run, iterations = job(clock)
                row.build.append(build)
                row.run.append(run)
                row.iterations = iterations
        except (OSError, MlcoreError, ValueError) as exc:
            row.build.clear()
            row.run.clear()
            row.error = f"{type(exc).__name__}: {exc}"
    return report


def _knn_job(entry, data):
    tree = entry.option("tree", "kd")
    traversal = entry.option("traversal", "dual")
    metric = entry.option("metric", "l2")
    leaf_size = int(entry.option("leaf_size", 20))
    base = float(entry.option("base", 2.0))

    def build(points):
        if tree == "kd":
            return KdTree(points, leaf_size)
        return CoverTree(points, metric, base)

    def job(clock, warm=False):
        points = data[: min(len(data), 64)] if warm else data
        k = min(entry.k, len(points) - 1) if warm else entry.k
        if k < 1:
            return 0.0, 0.0, None
        if traversal == "naive":
            t0 = clock()
            knn_search(None, points, SELF, k, metric, traversal="naive")
            return 0.0, clock() - t0, None
        t0 = clock()
        index = build(points)
        t1 = clock()
        knn_search(index, points, SELF, k, None, traversal=traversal)
        return t1 - t0, clock() - t1, None

    return job


def _kmeans_job(entry, data):
    config = KMeansConfig(
        entry.k,
        max_iterations=int(entry.option("max_iterations", 1000)),
        tolerance=float(entry.option("tolerance", 1e-6)),
        metric=entry.option("metric", "l2"),
        init=entry.option("init", "random_partition"),
        empty_policy=entry.option("empty", "reseed_furthest"),
        seed=int(entry.option("seed", 0)),
    )
    # the same starting centroids for every trial
    initial = config.init.initialize(data, config.k, config.metric, SeededRng(config.seed))

    def job(clock, warm=False):
        if warm:
            kmeans_cluster(data[: config.k], KMeansConfig(config.k, 2, metric=config.metric),
                           initial)
            return 0.0, 0.0, None
        t0 = clock()
        result = kmeans_cluster(data, config, initial)
        return 0.0, clock() - t0, result.iterations

    return job


# --- reports ------------------------------------------------------------------

_TITLES = {"knn": "k-NN benchmarks (seconds)", "kmeans": "k-means benchmarks (seconds)"}
_MD_HEAD = {
    "knn": ("dataset", "variant", "build", "query", "trials"),
    "kmeans": ("dataset", "variant", "cluster", "iterations", "trials"),
}
CSV_COLUMNS = ("task", "dataset", "variant", "status", "build_mean", "run_mean",
               "build_trials", "run_trials", "iterations")


def _sec(x):
    return "nan" if math.isnan(x) else f"{x:.4f}"


def emit_report(report, format="markdown"):
    """Render one table per task, seconds printed to four decimals."""
    if format == "markdown":
        return _markdown(report)
    if format == "csv":
        return _csv(report)
    raise InvalidParameter(f"unknown report format {format!r}")


def _markdown(report):
    blocks = []
    for task in TASKS:
        head = _MD_HEAD[task]
        lines = [f"### {_TITLES[task]}", "", "| " + " | ".join(head) + " |",
                 "|" + "|".join("---" for _ in head) + "|"]
        for r in report.rows:
            if r.task != task:
                continue
            if r.failed:
                cells = [r.name, r.variant, "failed", r.error, ""]
            elif task == "knn":
                cells = [r.name, r.variant, _sec(r.build_mean), _sec(r.run_mean),
                         " ".join(_sec(v) for v in r.run)]
            else:
                cells = [r.name, r.variant, _sec(r.run_mean), str(r.iterations),
                         " ".join(_sec(v) for v in r.run)]
            lines.append("| " + " | ".join(c.replace("|", "/") for c in cells) + " |")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def _csv(report):
    out = io.StringIO()
    for n, task in enumerate(TASKS):
        if n:
            out.write("\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in report.rows:
            if r.task != task:
                continue
            w.writerow([task, r.name, r.variant, r.error if r.failed else "ok",
                        _sec(r.build_mean), _sec(r.run_mean),
                        ";".join(_sec(v) for v in r.build),
                        ";".join(_sec(v) for v in r.run),
                        "" if r.iterations is None else r.iterations])
    return out.getvalue()


def parse_report_csv(text):
    """Inverse of the CSV report; means are recomputed from the trials."""
    rows = []
    for line in csv.reader(io.StringIO(text)):
        if not line or tuple(line) == CSV_COLUMNS:
            continue
        if len(line) != len(CSV_COLUMNS):
            raise DataFormatError(f"report row has {len(line)} fields, expected {len(CSV_COLUMNS)}")
        rec = dict(zip(CSV_COLUMNS, line))
        trials = lambda s: [float(v) for v in s.split(";")] if s else []  # noqa: E731
        rows.append(BenchRow(
            rec["dataset"], rec["task"], rec["variant"],
            trials(rec["build_trials"]), trials(rec["run_trials"]),
            int(rec["iterations"]) if rec["iterations"] else None,
            None if rec["status"] == "ok" else rec["status"],
        ))
    return BenchReport(rows)


def render_figures(report, directory):
    """Write one PNG per task plotting the mean time of each entry with its
    individual trials overlaid.  Returns the written paths."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(directory, exist_ok=True)
    paths = []
    for task in TASKS:
        rows = [r for r in report.rows if r.task == task and not r.failed]
        if not rows:
            continue
        labels = [f"{r.name}\n{r.variant}" for r in rows]
        x = np.arange(len(rows))
        fig, ax = plt.subplots(figsize=(max(4.0, 1.3 * len(rows)), 3.6))
        if task == "knn":
            ax.bar(x, [r.build_mean for r in rows], color="#b8c7d9", label="build")
            ax.bar(x, [r.run_mean for r in rows], bottom=[r.build_mean for r in rows],
                   color="#3d6a9e", label="query")
            tops = [[r.build_mean + v for v in r.run] for r in rows]
        else:
            ax.bar(x, [r.run_mean for r in rows], color="#3d6a9e", label="cluster")
            tops = [r.run for r in rows]
        for xi, vals in zip(x, tops):
            ax.plot([xi] * len(vals), vals, "k.", markersize=4)
        ax.set_xticks(x)
        ax.set_xticklabels(labels, fontsize=8)
        ax.set_ylabel("seconds")
        ax.set_title(_TITLES[task])
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(directory, f"bench_{task}.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths
