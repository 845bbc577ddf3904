"""Lloyd k-means with pluggable metric, initialization and empty-cluster
policies.

Defaults give standard Euclidean k-means.  Every other combination is
spelled out through :class:`KMeansConfig` or the :class:`KMeans` wrapper::

    KMeans(3, metric=ManhattanDistance(), init=KMeansPlusPlusInitialization(),
           empty_policy=AllowEmptyClusters())

All reductions run in a fixed order, so a run is a pure function of the
data, the configuration and the seed.
"""

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .data import SeededRng, as_data_matrix
from .errors import DimensionMismatch, InvalidParameter
from .metrics import EUCLIDEAN, MANHATTAN, get_metric, reduced_rows


# --- kernels ---------------------------------------------------------------

@numba.njit(cache=True)
def _assign(X, C, mode, p):
    # nearest centroid per point; strict comparison keeps the lowest index on ties
    n = X.shape[0]
    k = C.shape[0]
    out = np.empty(n, dtype=np.int64)
    red = np.empty(n)
    for i in range(n):
        best = np.inf
        arg = 0
        for j in range(k):
            r = reduced_rows(X, i, C, j, mode, p)
            if r < best:
                best = r
                arg = j
        out[i] = arg
        red[i] = best
    return out, red


@numba.njit(cache=True)
def _cluster_means(X, labels, k):
    # offsets from each cluster's first member, summed in point order: exact
    # when members coincide and independent of scheduling
    anchor = np.full(k, -1, dtype=np.int64)
    sums = np.zeros((k, X.shape[1]))
    counts = np.zeros(k, dtype=np.int64)
    for i in range(X.shape[0]):
        c = labels[i]
        if anchor[c] < 0:
            anchor[c] = i
        counts[c] += 1
        for t in range(X.shape[1]):
            sums[c, t] += X[i, t] - X[anchor[c], t]
    means = np.zeros((k, X.shape[1]))
    for c in range(k):
        if counts[c] > 0:
            for t in range(X.shape[1]):
                means[c, t] = X[anchor[c], t] + sums[c, t] / counts[c]
    return means, counts


@numba.njit(cache=True)
def _reduced_to_own(X, C, labels, mode, p):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        out[i] = reduced_rows(X, i, C, labels[i], mode, p)
    return out


def _squared_distances(red, metric):
    if metric.mode == EUCLIDEAN:
        return red
    d = red if metric.mode == MANHATTAN else red ** (1.0 / metric.p)
    return d * d


def _means(X, labels, k):
    return _cluster_means(X, labels, k)


# --- initialization policies ------------------------------------------------

class RandomPartition:
    """Assign every point to a uniformly random cluster and take the means.

    Clusters left empty are refilled one at a time, in index order, by
    moving a randomly drawn point out of a cluster that has at least two.
    """

    name = "random_partition"

    def initialize(self, data, k, metric, rng):
        return init_random_partition(data, k, rng)

    def __repr__(self):
        return "RandomPartition()"


class KMeansPlusPlusInitialization:
    """Seeding by D² sampling (Arthur and Vassilvitskii)."""

    name = "kmeanspp"

    def initialize(self, data, k, metric, rng):
        return init_kmeanspp(data, k, metric, rng)

    def __repr__(self):
        return "KMeansPlusPlusInitialization()"


class GivenCentroids:
    """Start from fixed centroids; the run never touches the generator."""

    name = "given_centroids"

    def __init__(self, centroids):
        self.centroids = np.array(as_data_matrix(centroids, "initial centroids"))

    def initialize(self, data, k, metric, rng):
        return _check_initial(self.centroids, k, data.shape[1])

    def __repr__(self):
        return f"GivenCentroids(shape={self.centroids.shape})"


def init_random_partition(data, k, rng):
    X = as_data_matrix(data)
    n = X.shape[0]
    k = _check_k(k, n)
    rng = _as_rng(rng)
    labels = rng.integers(k, n)
    counts = np.bincount(labels, minlength=k)
    for c in range(k):
        while counts[c] == 0:
            i = rng.integers(n)
            if counts[labels[i]] >= 2:
                counts[labels[i]] -= 1
                labels[i] = c
                counts[c] += 1
    means, _ = _means(X, labels, k)
    return means


def init_kmeanspp(data, k, metric, rng):
    X = as_data_matrix(data)
    n = X.shape[0]
    k = _check_k(k, n)
    metric = get_metric(metric)
    rng = _as_rng(rng)
    chosen = [rng.integers(n)]
    nearest = _squared_distances(metric.reduced_to_many(X[chosen[0]], X), metric)
    for _ in range(1, k):
        if nearest.sum() > 0.0:
            pick = rng.choice_weighted(nearest)
        else:
            # fewer distinct points than k: fall back to an unchosen point
            rest = np.setdiff1d(np.arange(n), chosen)
            pick = int(rest[rng.integers(rest.shape[0])])
        chosen.append(pick)
        d2 = _squared_distances(metric.reduced_to_many(X[pick], X), metric)
        nearest = np.minimum(nearest, d2)
    return np.array(X[chosen])


# --- empty-cluster policies ---------------------------------------------------

class AllowEmptyClusters:
    """Leave an empty cluster's centroid where it was."""

    name = "allow_empty"

    # repair() fills empty clusters in place and reports whether any
    # centroid was relocated
    def repair(self, X, labels, centroids, counts, old, metric):
        empty = counts == 0
        centroids[empty] = old[empty]
        return False

    def __repr__(self):
        return "AllowEmptyClusters()"


class ReseedFurthest:
    """Move each empty centroid onto the point furthest from the centroid of
    the cluster with the largest variance.

    Empty clusters are handled in index order.  A point used for one
    reseed is not offered again within the same step.
    """

    name = "reseed_furthest"

    def repair(self, X, labels, centroids, counts, old, metric):
        empties = np.flatnonzero(counts == 0)
        if empties.size == 0:
            return False
        red = _reduced_to_own(X, centroids, labels, metric.mode, metric.p)
        d2 = _squared_distances(red, metric)
        k = centroids.shape[0]
        sse = np.zeros(k)
        np.add.at(sse, labels, d2)
        variance = np.where(counts > 0, sse / np.maximum(counts, 1), -np.inf)
        used = np.zeros(X.shape[0], dtype=bool)
        for c in empties:
            donor = int(np.argmax(variance))
            members = np.flatnonzero((labels == donor) & ~used)
            if members.size == 0:
                centroids[c] = old[c]
                continue
            far = members[int(np.argmax(d2[members]))]
            used[far] = True
            centroids[c] = X[far]
        return True

    def __repr__(self):
        return "ReseedFurthest()"


_INIT = {"random_partition": RandomPartition, "random": RandomPartition,
         "kmeanspp": KMeansPlusPlusInitialization}
_EMPTY = {"allow_empty": AllowEmptyClusters, "allow": AllowEmptyClusters,
          "reseed_furthest": ReseedFurthest, "reseed": ReseedFurthest}


def _resolve(spec, table, what):
    if isinstance(spec, str):
        try:
            return table[spec.strip().lower()]()
        except KeyError:
            raise InvalidParameter(f"unknown {what} {spec!r}") from None
    return spec


# --- iteration ------------------------------------------------------------------

@dataclass
class StepResult:
    assignments: np.ndarray
    centroids: np.ndarray
    objective: float
    moved: float
    reseeded: bool = False

    def __iter__(self):
        return iter((self.assignments, self.centroids, self.objective, self.moved))


def lloyd_step(data, centroids, metric="l2", empty_policy="reseed_furthest"):
    """One assignment and update pass.

    The objective is measured against the centroids that produced the
    assignments.  ``moved`` is the summed metric distance between old and
    new centroids.
    """
    X = as_data_matrix(data)
    C = _check_centroids(centroids, X.shape[1])
    metric = get_metric(metric)
    policy = _resolve(empty_policy, _EMPTY, "empty-cluster policy")
    labels, red = _assign(X, C, metric.mode, metric.p)
    objective = math.fsum(_squared_distances(red, metric))
    new, counts = _means(X, labels, C.shape[0])
    reseeded = bool((counts == 0).any()) and policy.repair(X, labels, new, counts, C, metric)
    moved = math.fsum(metric.distance(C[j], new[j]) for j in range(C.shape[0]))
    return StepResult(labels, new, objective, moved, reseeded)


@dataclass
class KMeansConfig:
    k: int
    max_iterations: int = 1000
    tolerance: float = 1e-6
    metric: object = "l2"
    init: object = "random_partition"
    empty_policy: object = "reseed_furthest"
    seed: int = 0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InvalidParameter(f"k must be a positive integer, got {self.k}")
        self.k = int(self.k)
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise InvalidParameter(f"max_iterations must be >= 1, got {self.max_iterations}")
        self.max_iterations = int(self.max_iterations)
        tol = float(self.tolerance)
        if not tol >= 0.0:
            raise InvalidParameter(f"tolerance must be non-negative, got {self.tolerance}")
        self.tolerance = tol
        self.metric = get_metric(self.metric)
        if isinstance(self.init, str) and self.init.strip().lower() == "given_centroids":
            raise InvalidParameter("given_centroids needs the centroids; pass initial= or GivenCentroids(...)")
        self.init = _resolve(self.init, _INIT, "initialization")
        self.empty_policy = _resolve(self.empty_policy, _EMPTY, "empty-cluster policy")
        self.seed = int(self.seed)
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidParameter("seed must be a 64-bit unsigned integer")


@dataclass
class ClusteringResult:
    centroids: np.ndarray
    assignments: np.ndarray
    objective: float
    iterations: int
    converged: bool
    objective_trace: list = field(default_factory=list)
    reseeded_iterations: list = field(default_factory=list)


def kmeans_cluster(data, config, initial=None):
    """Run Lloyd iterations until the centroids stop moving (total movement
    at most ``tolerance``), the assignments repeat, or the iteration cap.

    ``objective_trace[t]`` is the objective of iteration ``t + 1``.  With
    the Euclidean metric and empty clusters allowed it never increases;
    iterations that reseeded a centroid are listed in
    ``reseeded_iterations`` since they may raise it.

    The returned assignments and objective are recomputed against the
    returned centroids.
    """
    X = as_data_matrix(data)
    if not isinstance(config, KMeansConfig):
        raise InvalidParameter("config must be a KMeansConfig")
    k = _check_k(config.k, X.shape[0])
    metric = config.metric
    if initial is not None:
        C = _check_initial(initial, k, X.shape[1])
    else:
        C = _check_initial(config.init.initialize(X, k, metric, SeededRng(config.seed)), k, X.shape[1])

    trace, flagged = [], []
    previous = None
    converged = False
    iterations = 0
    while iterations < config.max_iterations:
        step = lloyd_step(X, C, metric, config.empty_policy)
        iterations += 1
        trace.append(step.objective)
        if step.reseeded:
            flagged.append(iterations)
        C = step.centroids
        if step.moved <= config.tolerance or (
                previous is not None and np.array_equal(previous, step.assignments)):
            converged = True
            break
        previous = step.assignments

    labels, red = _assign(X, C, metric.mode, metric.p)
    objective = math.fsum(_squared_distances(red, metric))
    return ClusteringResult(C, labels, objective, iterations, converged, trace, flagged)


class KMeans:
    """Policy-configured clusterer; ``KMeans(k)`` is Euclidean Lloyd with
    random-partition seeding and furthest-point reseeding."""

    def __init__(self, k, metric="l2", init="random_partition", empty_policy="reseed_furthest",
                 max_iterations=1000, tolerance=1e-6, seed=0):
        self.config = KMeansConfig(k, max_iterations, tolerance, metric, init, empty_policy, seed)

    def cluster(self, data, initial=None):
        return kmeans_cluster(data, self.config, initial)

    def __repr__(self):
        c = self.config
        return (f"KMeans(k={c.k}, metric={c.metric.name}, init={c.init!r}, "
                f"empty_policy={c.empty_policy!r})")


# --- validation -------------------------------------------------------------

def _as_rng(rng):
    return rng if isinstance(rng, SeededRng) else SeededRng(rng)


def _check_k(k, n):
    if int(k) != k or k < 1:
        raise InvalidParameter(f"k must be a positive integer, got {k}")
    if k > n:
        raise InvalidParameter(f"k = {k} exceeds the number of points ({n})")
    return int(k)


def _check_centroids(centroids, d):
    C = np.asarray(centroids, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] < 1:
        raise InvalidParameter("centroids must be a non-empty 2-D matrix")
    if C.shape[1] != d:
        raise DimensionMismatch(C.shape[1], d, "centroids and data")
    if not np.all(np.isfinite(C)):
        raise InvalidParameter("centroids must be finite")
    return np.ascontiguousarray(C)


def _check_initial(initial, k, d):
    C = _check_centroids(initial, d)
    if C.shape[0] != k:
        raise InvalidParameter(f"expected {k} initial centroids, got {C.shape[0]}")
    return C.copy()
