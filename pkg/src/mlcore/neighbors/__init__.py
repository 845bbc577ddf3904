"""Exact k-nearest/furthest-neighbor and range search.

All searches return exactly what an exhaustive scan returns: same
indices (ties broken toward the smaller reference index) and bitwise
identical distances.  Tree traversals only change how much work is done.

>>> import numpy as np
>>> from mlcore.neighbors import NeighborSearch
>>> ns = NeighborSearch(np.array([[0.0, 0.0], [1.0, 0.0], [4.0, 0.0]]))
>>> ns.search(np.array([[0.4, 0.0]]), k=2).indices
array([[0, 1]])
"""

from dataclasses import dataclass

import numpy as np

from ..covertree import DEFAULT_BASE, CoverTree
from ..data import as_data_matrix
from ..errors import DimensionMismatch, InvalidParameter
from ..kdtree import DEFAULT_LEAF_SIZE, KdTree
from ..metrics import get_metric
from . import _kernels

TRAVERSALS = ("single", "dual", "naive")


class _SelfQuery:
    """Sentinel: the query set is the reference set, each point excluding itself."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "SELF"


SELF = _SelfQuery()


@dataclass(frozen=True)
class SortPolicy:
    """Nearest/furthest duality.

    ``better(d1, i1, d2, i2)`` is the replacement rule used everywhere:
    strictly better distance, or equal distance and smaller index.
    """

    direction: str

    def __post_init__(self):
        if self.direction not in ("nearest", "furthest"):
            raise InvalidParameter(f"unknown sort direction {self.direction!r}")

    @property
    def furthest(self):
        return self.direction == "furthest"

    @property
    def worst_distance(self):
        return -np.inf if self.furthest else np.inf

    def better(self, d1, i1, d2, i2):
        if self.furthest:
            return d1 > d2 or (d1 == d2 and i1 < i2)
        return d1 < d2 or (d1 == d2 and i1 < i2)

    def can_prune(self, bound, kth):
        """True when a node whose best possible distance is ``bound`` cannot
        improve on the current k-th result ``kth``."""
        return bound < kth if self.furthest else bound > kth


NEAREST = SortPolicy("nearest")
FURTHEST = SortPolicy("furthest")


def get_policy(policy):
    if isinstance(policy, SortPolicy):
        return policy
    return SortPolicy(str(policy).lower())


@dataclass
class NeighborResult:
    """``indices[i, j]`` is the j-th best reference point for query i."""

    indices: np.ndarray
    distances: np.ndarray
    evaluations: int = 0

    def __iter__(self):
        return iter((self.indices, self.distances))


@dataclass
class RangeResult:
    """Per-query reference indices (ascending) and their distances."""

    indices: list
    distances: list

    def __len__(self):
        return len(self.indices)

    @classmethod
    def _from_csr(cls, offsets, idx, dist):
        return cls(
            [idx[offsets[i]:offsets[i + 1]] for i in range(offsets.shape[0] - 1)],
            [dist[offsets[i]:offsets[i + 1]] for i in range(offsets.shape[0] - 1)],
        )


def _resolve_query(ref, query):
    if query is SELF or query is None:
        return ref, True
    query = as_data_matrix(query, "query")
    if query.shape[1] != ref.shape[1]:
        raise DimensionMismatch(ref.shape[1], query.shape[1], "reference and query sets")
    return query, False


def _check_k(k, ref, self_mode):
    usable = ref.shape[0] - (1 if self_mode else 0)
    if int(k) != k or k < 1:
        raise InvalidParameter(f"k must be a positive integer, got {k}")
    if k > usable:
        raise InvalidParameter(
            f"k={k} exceeds the {usable} usable reference points"
            + (" (a point is never its own neighbor)" if self_mode else "")
        )
    return int(k)


def _empty_result(m, k, policy):
    best_d = np.full((m, k), policy.worst_distance)
    best_i = np.full((m, k), _kernels.NO_INDEX, dtype=np.int64)
    return best_d, best_i


def _finish(best_d, best_i, metric):
    if metric.mode == 1:
        dist = best_d
    elif metric.mode == 2:
        dist = np.sqrt(best_d)
    else:
        dist = best_d ** (1.0 / metric.p)
    return NeighborResult(best_i, dist)


def brute_force_search(ref, query=SELF, k=1, metric="l2", policy=NEAREST):
    """Exhaustive k-nearest (or furthest) neighbors; the reference oracle."""
    ref = as_data_matrix(ref, "reference")
    metric = get_metric(metric)
    policy = get_policy(policy)
    query, self_mode = _resolve_query(ref, query)
    k = _check_k(k, ref, self_mode)
    best_d, best_i = _empty_result(query.shape[0], k, policy)
    _kernels.brute_knn(ref, query, best_d, best_i, metric.mode, metric.p, policy.furthest, self_mode)
    result = _finish(best_d, best_i, metric)
    result.evaluations = query.shape[0] * (ref.shape[0] - (1 if self_mode else 0))
    return result


def _tree_metric(index, metric):
    if isinstance(index, CoverTree):
        if metric is None:
            return index.metric
        metric = get_metric(metric)
        if metric != index.metric:
            raise InvalidParameter(
                f"cover tree was built with {index.metric.name}, cannot search with {metric.name}"
            )
        return metric
    return get_metric("l2" if metric is None else metric)


def _same_reference(index, ref):
    if ref is None or ref is index.data:
        return index.data
    ref = as_data_matrix(ref, "reference")
    if ref.shape != index.data.shape or not np.array_equal(ref, index.data):
        raise InvalidParameter("reference set differs from the data the tree was built on")
    return index.data


def knn_search(index, ref=None, query=SELF, k=1, metric=None, policy=NEAREST,
               traversal="dual", record_prunes=False):
    """k-nearest or k-furthest neighbors of every query point.

    ``index`` is a :class:`KdTree` or :class:`CoverTree` over ``ref``
    (``ref`` may be omitted), or None for an exhaustive scan.  ``query``
    is a matrix or :data:`SELF`.  ``traversal='dual'`` builds a query tree
    of the same kind (reused as-is in SELF mode).

    With ``record_prunes=True`` returns ``(result, pruned)`` where
    ``pruned`` lists (query, reference node) pairs for single traversals
    and (query node, reference node) pairs for dual ones; query nodes
    index the ``query_tree`` attribute set on the returned result.
    """
    if traversal not in TRAVERSALS:
        raise InvalidParameter(f"traversal must be one of {TRAVERSALS}, got {traversal!r}")
    policy = get_policy(policy)
    if index is None:
        if ref is None:
            raise InvalidParameter("a reference set is required without an index")
        traversal = "naive"
        ref = as_data_matrix(ref, "reference")
        metric = get_metric("l2" if metric is None else metric)
    else:
        ref = _same_reference(index, ref)
        metric = _tree_metric(index, metric)
    query, self_mode = _resolve_query(ref, query)
    k = _check_k(k, ref, self_mode)
    best_d, best_i = _empty_result(query.shape[0], k, policy)
    mode, p, furthest = metric.mode, metric.p, policy.furthest
    pruned = np.empty((0, 2), dtype=np.int64)
    query_tree = None

    if traversal == "naive":
        _kernels.brute_knn(ref, query, best_d, best_i, mode, p, furthest, self_mode)
        evals = query.shape[0] * (ref.shape[0] - (1 if self_mode else 0))
    elif isinstance(index, KdTree):
        t = index
        ordered = np.ascontiguousarray(ref[t.perm])
        if traversal == "single":
            # self queries in tree order reuse cached nodes between neighbours
            qorder = t.perm if self_mode else np.arange(query.shape[0], dtype=np.int64)
            pruned, evals = _kernels.kd_single_knn(
                ordered, t.perm, t.lo, t.hi, t.begin, t.count, t.left, t.right,
                query, qorder, best_d, best_i, mode, p, furthest, self_mode, record_prunes)
        else:
            qt = t if self_mode else KdTree(query, t.leaf_size)
            query_tree = qt
            pruned, evals = _kernels.kd_dual_knn(
                ordered, t.perm, t.lo, t.hi, t.begin, t.count, t.left, t.right,
                query, qt.perm, qt.lo, qt.hi, qt.begin, qt.count, qt.left, qt.right, qt.parent,
                best_d, best_i, mode, p, furthest, self_mode, record_prunes)
    elif isinstance(index, CoverTree):
        t = index
        if traversal == "single":
            pruned, evals = _kernels.cover_single_knn(
                ref, t.point, t.fdd, t.head, t.child_start, t.child_end, t.children,
                query, best_d, best_i, mode, p, furthest, self_mode, record_prunes)
        else:
            qt = t if self_mode else CoverTree(query, t.metric, t.base)
            query_tree = qt
            pruned, evals = _kernels.cover_dual_knn(
                ref, t.point, t.fdd, t.scale, t.child_start, t.child_end, t.children,
                query, qt.point, qt.fdd, qt.scale, qt.child_start, qt.child_end, qt.children, qt.parent,
                best_d, best_i, mode, p, furthest, self_mode, record_prunes)
    else:
        raise InvalidParameter(f"unsupported index type {type(index).__name__}")

    result = _finish(best_d, best_i, metric)
    result.evaluations = int(evals)
    if record_prunes:
        result.query_tree = query_tree
        return result, pruned
    return result


def brute_force_range(ref, query=SELF, low=0.0, high=np.inf, metric="l2"):
    ref = as_data_matrix(ref, "reference")
    metric = get_metric(metric)
    low, high = _check_range(low, high)
    query, self_mode = _resolve_query(ref, query)
    out = _kernels.brute_range(ref, query, low, high, metric.mode, metric.p, self_mode)
    return RangeResult._from_csr(*out)


def _check_range(low, high):
    low, high = float(low), float(high)
    if np.isnan(low) or np.isnan(high) or low < 0.0:
        raise InvalidParameter(f"range bounds must satisfy 0 <= low <= high, got [{low}, {high}]")
    if low > high:
        raise InvalidParameter(f"range low {low} exceeds high {high}")
    return low, high


def range_search(index, ref=None, query=SELF, low=0.0, high=np.inf, metric=None):
    """Every reference point whose distance to each query lies in ``[low, high]``."""
    low, high = _check_range(low, high)
    if index is None:
        return brute_force_range(ref, query, low, high, "l2" if metric is None else metric)
    ref = _same_reference(index, ref)
    metric = _tree_metric(index, metric)
    query, self_mode = _resolve_query(ref, query)
    mode, p = metric.mode, metric.p
    if isinstance(index, KdTree):
        t = index
        # widen the reduced-space window slightly; exact filtering happens per point
        with np.errstate(over="ignore"):
            high_red = metric.unroot(high * (1.0 + 1e-12)) if np.isfinite(high) else np.inf
            low_red = metric.unroot(low * (1.0 - 1e-12))
        out = _kernels.kd_range(np.ascontiguousarray(ref[t.perm]), t.perm, t.lo, t.hi, t.begin, t.count, t.left, t.right,
                                query, low, high, low_red, high_red, mode, p, self_mode)
    elif isinstance(index, CoverTree):
        t = index
        out = _kernels.cover_range(ref, t.point, t.fdd, t.head, t.child_start, t.child_end, t.children,
                                   query, low, high, mode, p, self_mode)
    else:
        raise InvalidParameter(f"unsupported index type {type(index).__name__}")
    return RangeResult._from_csr(*out)


class NeighborSearch:
    """Reference set plus index, ready for repeated queries.

    ``tree`` is ``'kd'``, ``'cover'`` or ``'naive'`` (no index).
    """

    def __init__(self, reference, tree="kd", metric="l2", leaf_size=DEFAULT_LEAF_SIZE,
                 base=DEFAULT_BASE):
        self.reference = as_data_matrix(reference, "reference")
        self.metric = get_metric(metric)
        if tree == "kd":
            self.index = KdTree(self.reference, leaf_size)
        elif tree == "cover":
            self.index = CoverTree(self.reference, self.metric, base)
        elif tree == "naive":
            self.index = None
        else:
            raise InvalidParameter(f"tree must be 'kd', 'cover' or 'naive', got {tree!r}")
        self.tree = tree

    def search(self, query=SELF, k=1, policy=NEAREST, traversal="dual"):
        return knn_search(self.index, self.reference, query, k, self.metric, policy, traversal)

    def furthest(self, query=SELF, k=1, traversal="dual"):
        return self.search(query, k, FURTHEST, traversal)

    def range(self, query=SELF, low=0.0, high=np.inf):
        return range_search(self.index, self.reference, query, low, high, self.metric)


__all__ = [
    "SELF", "SortPolicy", "NEAREST", "FURTHEST", "NeighborResult", "RangeResult",
    "brute_force_search", "brute_force_range", "knn_search", "range_search", "NeighborSearch",
]
