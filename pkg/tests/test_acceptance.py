"""Acceptance checks.  Each test prints one PASS/FAIL line with its measured
quantities, then asserts."""

import os
import time

import numpy as np
import pytest

from mlcore import CoverTree, KdTree, SeededRng
from mlcore.bench import BenchEntry, BenchManifest, GenSpec, default_loader, run_bench
from mlcore.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from mlcore.covertree import check_cover_tree
from mlcore.data import generate_uniform, save_csv
from mlcore.kdtree import check_kdtree
from mlcore.kmeans import KMeansConfig, init_kmeanspp, kmeans_cluster
from mlcore.neighbors import (
    FURTHEST, NEAREST, SELF, brute_force_range, brute_force_search, knn_search, range_search,
)

from conftest import oracle_distances, oracle_knn

# tolerances pinned by the acceptance criteria
KNN_REL_TOL = 1e-12
KNN_INSTANCES = 100
KNN_MAX_N = 2000
KNN_DIMS = (1, 2, 5, 10, 20)
KNN_KS = (1, 3, 10)
KNN_PS = (1.0, 2.0)
KNN_SUITE_SECONDS = 300.0
TREE_INSTANCES = 50
TREE_MAX_N = 1000
TREE_BASES = (1.3, 2.0)
KMEANS_INSTANCES = 20
KMEANS_CENTROID_REL_TOL = 1e-9
KMEANSPP_RUNS = 10_000
KMEANSPP_ABS_TOL = 0.02
SPEEDUP_ROWS, SPEEDUP_COLS, SPEEDUP_K = 100_000, 10, 3
SPEEDUP_MIN = 5.0
SPEEDUP_MAX_SECONDS = 120.0
BENCH_TRIALS = 5
CLI_DATASETS = 10


@pytest.fixture
def report(request):
    term = request.config.pluginmanager.getplugin("terminalreporter")

    def emit(name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        if term is not None:
            term.write_line("")
            term.write_line(line)
        else:
            print(line)
        return ok

    return emit


def instance_family(count, seed):
    """Random instances cycling through every (d, k, p) combination."""
    rng = np.random.default_rng(seed)
    combos = [(d, k, p) for d in KNN_DIMS for k in KNN_KS for p in KNN_PS]
    for i in range(count):
        d, k, p = combos[i % len(combos)]
        n = int(rng.integers(k + 1, KNN_MAX_N + 1)) if i % 4 else int(rng.integers(k + 1, 60))
        if i % 5 == 0:
            X = rng.integers(0, 4, size=(n, d)).astype(float)  # many exact ties
        else:
            X = rng.random((n, d))
        Q = SELF if i % 2 else rng.random((int(rng.integers(1, 200)), d))
        yield i, X, Q, k, p


def test_knn_oracle_equivalence(report):
    start = time.perf_counter()
    bad = []
    count = 0
    for i, X, Q, k, p in instance_family(KNN_INSTANCES + 20, seed=101):
        count += 1
        Qm = None if Q is SELF else Q
        want_i, want_d = oracle_knn(X, Qm, k, p, exclude_self=Q is SELF)
        brute = brute_force_search(X, Q, k, p)
        # ties are broken by index on exact equality, so the oracle agrees only
        # where scipy's rounding matches; bitwise agreement with brute force is
        # required everywhere
        if not np.allclose(brute.distances, want_d, rtol=KNN_REL_TOL, atol=0):
            bad.append((i, "brute vs scipy distances"))
        if not np.array_equal(brute.indices, want_i):
            bad.append((i, "brute vs scipy indices"))
        kd, cover = KdTree(X), CoverTree(X, p)
        for label, index, trav in (("kd-single", kd, "single"), ("kd-dual", kd, "dual"),
                                   ("cover-single", cover, "single"), ("cover-dual", cover, "dual")):
            got = knn_search(index, X, Q, k, p, NEAREST, trav)
            if not np.array_equal(got.indices, brute.indices):
                bad.append((i, label + " indices"))
            if not np.allclose(got.distances, want_d, rtol=KNN_REL_TOL, atol=0):
                bad.append((i, label + " distances"))
    elapsed = time.perf_counter() - start
    ok = not bad and count >= KNN_INSTANCES and elapsed < KNN_SUITE_SECONDS
    report("k-NN oracle equivalence", ok,
           f"{count} instances, {len(bad)} mismatches, {elapsed:.1f}s (limit {KNN_SUITE_SECONDS:.0f}s)")
    assert ok, bad[:10]


def test_furthest_and_range_oracle_equivalence(report):
    bad = []
    count = 0
    rng = np.random.default_rng(7)
    for i, X, Q, k, p in instance_family(KNN_INSTANCES, seed=202):
        count += 1
        Qm = None if Q is SELF else Q
        want_i, want_d = oracle_knn(X, Qm, k, p, furthest=True, exclude_self=Q is SELF)
        kd, cover = KdTree(X), CoverTree(X, p)
        for label, index, trav in (("kd-single", kd, "single"), ("kd-dual", kd, "dual"),
                                   ("cover-single", cover, "single"), ("cover-dual", cover, "dual")):
            got = knn_search(index, X, Q, k, p, FURTHEST, trav)
            if not np.array_equal(got.indices, want_i):
                bad.append((i, label + " furthest indices"))
            if not np.allclose(got.distances, want_d, rtol=KNN_REL_TOL, atol=0):
                bad.append((i, label + " furthest distances"))

        D = oracle_distances(X if Qm is None else Qm, X, p)
        low, high = sorted(rng.uniform(0, np.sqrt(X.shape[1]), size=2))
        exact = brute_force_range(X, Q, low, high, p)
        for label, index in (("kd", kd), ("cover", cover)):
            got = range_search(index, X, Q, low, high, p)
            for qi, (gi, gd) in enumerate(zip(got.indices, got.distances)):
                if not (np.array_equal(gi, exact.indices[qi]) and np.array_equal(gd, exact.distances[qi])):
                    bad.append((i, label + " range vs exhaustive"))
                    break
                # independent filter, skipping pairs within rounding of an edge
                row = D[qi]
                near_edge = (np.abs(row - low) <= 1e-12 * max(low, 1e-300)) | (np.abs(row - high) <= 1e-12 * high)
                inside = (row >= low) & (row <= high) & ~near_edge
                if Q is SELF:
                    inside[qi] = False
                hit = np.zeros(row.shape[0], dtype=bool)
                hit[gi] = True
                if np.any(inside & ~hit) or np.any(hit & ~inside & ~near_edge):
                    bad.append((i, label + " range vs scipy filter"))
                    break
    ok = not bad and count >= KNN_INSTANCES
    report("furthest & range oracle equivalence", ok, f"{count} instances, {len(bad)} mismatches")
    assert ok, bad[:10]


def test_tree_invariants(report):
    rng = np.random.default_rng(303)
    failures = []
    built = 0
    for i in range(TREE_INSTANCES):
        n = int(rng.integers(1, TREE_MAX_N + 1))
        d = int(rng.choice(KNN_DIMS))
        X = rng.random((n, d)) if i % 3 else rng.integers(0, 3, size=(n, d)).astype(float)
        try:
            check_kdtree(KdTree(X, int(rng.integers(1, 30))))
            built += 1
            for base in TREE_BASES:
                check_cover_tree(CoverTree(X, "l2" if i % 2 else "l1", base))
                built += 1
        except AssertionError as exc:
            failures.append((i, str(exc)))
    ok = not failures
    report("tree invariants", ok, f"{built} trees checked (bases {TREE_BASES}), {len(failures)} violations")
    assert ok, failures[:5]


def plain_lloyd(X, C, max_iter):
    """Independent Euclidean Lloyd with argmin assignment; empty clusters keep
    their centroid.  Returns final centroids, assignments and per-iteration
    objectives."""
    C = C.copy()
    prev = None
    objectives = []
    for _ in range(max_iter):
        D = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
        labels = D.argmin(axis=1)
        objectives.append(D[np.arange(len(X)), labels].sum())
        for j in range(C.shape[0]):
            if np.any(labels == j):
                C[j] = X[labels == j].mean(axis=0)
        if prev is not None and np.array_equal(prev, labels):
            break
        prev = labels
    D = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
    return C, D.argmin(axis=1), objectives


def test_kmeans_reproducibility(report):
    rng = np.random.default_rng(404)
    bad, non_monotone = [], []
    for i in range(KMEANS_INSTANCES + 5):
        n = int(rng.integers(20, 800))
        d = int(rng.choice([1, 2, 5, 13]))
        k = int(rng.integers(1, 9))
        centers = rng.normal(scale=5, size=(k, d))
        X = centers[rng.integers(0, k, n)] + rng.normal(size=(n, d))
        C0 = X[rng.choice(n, size=k, replace=False)] + rng.normal(scale=0.1, size=(k, d))
        if i % 4 == 0:
            C0[-1] = 1e6  # starts empty
        cfg = KMeansConfig(k, max_iterations=1000, tolerance=0.0, empty_policy="allow_empty")
        got = kmeans_cluster(X, cfg, initial=C0)
        C, labels, _ = plain_lloyd(X, C0, 1000)
        if not np.array_equal(got.assignments, labels):
            bad.append((i, "assignments"))
        if not np.allclose(got.centroids, C, rtol=KMEANS_CENTROID_REL_TOL, atol=0):
            bad.append((i, "centroids"))
        trace = got.objective_trace + [got.objective]
        if any(b > a for a, b in zip(trace, trace[1:])):
            non_monotone.append(i)
    ok = not bad and not non_monotone
    report("k-means reproducibility", ok,
           f"{KMEANS_INSTANCES + 5} instances, {len(bad)} oracle mismatches, "
           f"{len(non_monotone)} objective increases")
    assert ok, (bad, non_monotone)


def test_kmeanspp_statistics(report):
    X = np.array([[0.0], [1.0], [10.0]])
    counts = np.zeros((3, 3))
    for seed in range(KMEANSPP_RUNS):
        C = init_kmeanspp(X, 2, "l2", SeededRng(seed)).ravel()
        first = int(np.flatnonzero(X.ravel() == C[0])[0])
        second = int(np.flatnonzero(X.ravel() == C[1])[0])
        counts[first, second] += 1
    D2 = (X - X.T) ** 2
    analytic = D2 / D2.sum(axis=1, keepdims=True)
    freq = counts / counts.sum(axis=1, keepdims=True)
    first = counts.sum(axis=1) / KMEANSPP_RUNS
    err = max(np.abs(freq - analytic).max(), np.abs(first - 1 / 3).max())
    ok = err <= KMEANSPP_ABS_TOL
    report("k-means++ statistics", ok,
           f"{KMEANSPP_RUNS} runs, max |freq - analytic| = {err:.4f} (limit {KMEANSPP_ABS_TOL})")
    assert ok


@pytest.mark.slow
def test_relative_speedup(report):
    X = generate_uniform(SPEEDUP_ROWS, SPEEDUP_COLS, SeededRng(1))
    # compile outside the timed region
    knn_search(KdTree(X[:200]), X[:200], SELF, SPEEDUP_K)
    knn_search(None, X[:200], SELF, SPEEDUP_K)

    t0 = time.perf_counter()
    tree = KdTree(X)
    dual = knn_search(tree, X, SELF, SPEEDUP_K, traversal="dual")
    dual_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    naive = knn_search(None, X, SELF, SPEEDUP_K, traversal="naive")
    naive_s = time.perf_counter() - t0

    same = np.array_equal(dual.indices, naive.indices) and np.array_equal(dual.distances, naive.distances)
    speedup = naive_s / dual_s
    ok = same and speedup >= SPEEDUP_MIN and dual_s < SPEEDUP_MAX_SECONDS
    report("relative speedup", ok,
           f"{SPEEDUP_ROWS}x{SPEEDUP_COLS} k={SPEEDUP_K}: dual {dual_s:.1f}s (build+query, limit "
           f"{SPEEDUP_MAX_SECONDS:.0f}s), naive {naive_s:.1f}s, speedup {speedup:.1f}x "
           f"(need {SPEEDUP_MIN:.0f}x), results identical: {same}")
    assert ok


def test_protocol_fidelity(report):
    calls = {"load": 0}
    load_seconds = 0.5

    def slow_loader(source):
        calls["load"] += 1
        time.sleep(load_seconds)
        return default_loader(source)

    entries = [
        BenchEntry("knn-kd", "knn", GenSpec(400, 3, 1), 3, (("traversal", "dual"),)),
        BenchEntry("knn-naive", "knn", GenSpec(400, 3, 1), 3, (("traversal", "naive"),)),
        BenchEntry("km", "kmeans", GenSpec(400, 3, 1), 3, ()),
    ]
    rep = run_bench(BenchManifest(entries, BENCH_TRIALS), loader=slow_loader)
    counts_ok = all(len(r.run) == BENCH_TRIALS and len(r.build) == BENCH_TRIALS for r in rep.rows)
    means_ok = all(np.isclose(r.run_mean, sum(r.run) / BENCH_TRIALS, rtol=1e-12) for r in rep.rows)
    worst = max(max(b + r for b, r in zip(row.build, row.run)) for row in rep.rows)
    excluded = worst < load_seconds and calls["load"] == len(entries)
    ok = counts_ok and means_ok and excluded and not rep.failures
    report("protocol fidelity", ok,
           f"trials per entry {[len(r.run) for r in rep.rows]}, mean check {means_ok}, "
           f"slowest trial {worst:.4f}s vs {load_seconds}s load sleep, loads {calls['load']}")
    assert ok


def test_cli_contract(report, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rng = np.random.default_rng(505)
    ref = tmp_path / "ref.csv"
    save_csv(rng.random((40, 3)), str(ref))
    (tmp_path / "bad.csv").write_text("1,2\nx,4\n")
    missing = str(tmp_path / "missing.csv")
    matrix = [
        (["knn", "--reference", missing, "--k", "3"], EXIT_DATA),
        (["knn", "--reference", str(tmp_path / "bad.csv"), "--k", "1"], EXIT_DATA),
        (["kmeans", "--input", missing, "--clusters", "2"], EXIT_DATA),
        (["range", "--reference", missing, "--low", "0", "--high", "1"], EXIT_DATA),
        (["knn", "--reference", str(ref), "--k", "0"], EXIT_USAGE),
        (["knn", "--reference", str(ref), "--k", "40"], EXIT_USAGE),
        (["kmeans", "--input", str(ref), "--clusters", "41"], EXIT_USAGE),
        (["range", "--reference", str(ref), "--low", "2", "--high", "1"], EXIT_USAGE),
        (["knn", "--reference", str(ref), "--k", "3", "--no-such-flag"], EXIT_USAGE),
        (["gen", "--rows", "0", "--cols", "1", "--out", "g.csv"], EXIT_USAGE),
        (["knn", "--reference", str(ref), "--k", "3"], EXIT_OK),
    ]
    wrong = [(argv, code, got) for argv, code in matrix if (got := main(argv)) != code]

    differ = []
    for i in range(CLI_DATASETS):
        X = rng.random((int(rng.integers(20, 400)), int(rng.choice(KNN_DIMS))))
        path = tmp_path / f"d{i}.csv"
        save_csv(X, str(path))
        outputs = []
        for trav in ("naive", "dual"):
            n, d = tmp_path / f"n{i}{trav}.csv", tmp_path / f"dist{i}{trav}.csv"
            main(["knn", "--reference", str(path), "--k", "3", "--metric", "l1" if i % 2 else "l2",
                  "--traversal", trav, "--neighbors-out", str(n), "--distances-out", str(d)])
            outputs.append((n.read_bytes(), d.read_bytes()))
        if outputs[0] != outputs[1]:
            differ.append(i)
    ok = not wrong and not differ
    report("CLI contract", ok,
           f"{len(matrix) - len(wrong)}/{len(matrix)} exit codes correct, "
           f"{CLI_DATASETS - len(differ)}/{CLI_DATASETS} datasets byte-identical naive vs dual")
    assert ok, (wrong, differ)
