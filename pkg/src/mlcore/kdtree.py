"""Axis-aligned kd-trees with hyperrectangle bounds.

Nodes live in flat arrays (preorder numbering, root = 0) so the numba
traversal kernels can walk them without Python objects.  The tree never
copies the dataset; it only stores a permutation of point indices, and a
node owns the contiguous slice ``perm[begin:begin + count]``.
"""

from dataclasses import dataclass

import numba
import numpy as np

from .data import as_data_matrix
from .errors import DimensionMismatch, InvalidParameter
from .metrics import get_metric, root, term

DEFAULT_LEAF_SIZE = 20


@dataclass(frozen=True)
class HRectBound:
    """Closed box ``[lo_j, hi_j]`` in every dimension."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64).ravel()
        hi = np.asarray(self.hi, dtype=np.float64).ravel()
        if lo.shape != hi.shape:
            raise DimensionMismatch(lo.shape[0], hi.shape[0], "bound corners")
        if np.any(lo > hi):
            raise InvalidParameter("bound has lo > hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.shape[0]

    @classmethod
    def from_points(cls, points):
        points = np.asarray(points, dtype=np.float64)
        return cls(points.min(axis=0), points.max(axis=0))

    def contains(self, q):
        q = np.asarray(q, dtype=np.float64)
        return bool(np.all(q >= self.lo) and np.all(q <= self.hi))


def min_dist_point(bound, q, metric="l2"):
    """Smallest possible distance from ``q`` to a point inside ``bound``."""
    metric = get_metric(metric)
    q = _point_for(bound, q)
    r = _min_point_reduced(bound.lo[None], bound.hi[None], 0, q[None], 0, metric.mode, metric.p)
    return float(root(r, metric.mode, metric.p))


def max_dist_point(bound, q, metric="l2"):
    """Largest possible distance from ``q`` to a point inside ``bound``."""
    metric = get_metric(metric)
    q = _point_for(bound, q)
    r = _max_point_reduced(bound.lo[None], bound.hi[None], 0, q[None], 0, metric.mode, metric.p)
    return float(root(r, metric.mode, metric.p))


def min_dist_bound(a, b, metric="l2"):
    """Smallest possible distance between a point of ``a`` and a point of ``b``."""
    metric = get_metric(metric)
    if a.dim != b.dim:
        raise DimensionMismatch(a.dim, b.dim, "bounds")
    r = _min_box_reduced(a.lo[None], a.hi[None], 0, b.lo[None], b.hi[None], 0, metric.mode, metric.p)
    return float(root(r, metric.mode, metric.p))


def max_dist_bound(a, b, metric="l2"):
    """Largest possible distance between a point of ``a`` and a point of ``b``."""
    metric = get_metric(metric)
    if a.dim != b.dim:
        raise DimensionMismatch(a.dim, b.dim, "bounds")
    r = _max_box_reduced(a.lo[None], a.hi[None], 0, b.lo[None], b.hi[None], 0, metric.mode, metric.p)
    return float(root(r, metric.mode, metric.p))


def _point_for(bound, q):
    q = np.asarray(q, dtype=np.float64).ravel()
    if q.shape[0] != bound.dim:
        raise DimensionMismatch(bound.dim, q.shape[0], "bound and point")
    return q


class KdTree:
    """Immutable kd-tree over a data matrix.

    Attributes are numpy arrays indexed by node id:

    ``lo``, ``hi``
        tight bounding box of the node's points, shape ``(nodes, d)``
    ``begin``, ``count``
        the node's slice of ``perm``
    ``left``, ``right``
        child ids, ``-1`` for leaves
    ``parent``
        parent id, ``-1`` for the root
    ``split_dim``, ``split_value``
        split rule of internal nodes (``-1`` / ``nan`` for leaves)
    """

    def __init__(self, data, leaf_size=DEFAULT_LEAF_SIZE):
        leaf_size = int(leaf_size)
        if leaf_size < 1:
            raise InvalidParameter(f"leaf_size must be >= 1, got {leaf_size}")
        self.data = as_data_matrix(data)
        self.leaf_size = leaf_size
        _Builder(self.data, leaf_size).build_into(self)
        for name in ("perm", "lo", "hi", "begin", "count", "left", "right",
                     "parent", "split_dim", "split_value"):
            getattr(self, name).flags.writeable = False

    @property
    def n_points(self):
        return self.data.shape[0]

    @property
    def n_nodes(self):
        return self.begin.shape[0]

    def is_leaf(self, node):
        return self.left[node] < 0

    def bound(self, node):
        return HRectBound(self.lo[node], self.hi[node])

    def points_of(self, node):
        """Original indices of the points under ``node``."""
        b = self.begin[node]
        return self.perm[b:b + self.count[node]]

    def leaves(self):
        return np.flatnonzero(self.left < 0)

    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(1, self.n_nodes):
            depth[node] = depth[self.parent[node]] + 1
        return int(depth.max())

    def __repr__(self):
        return (f"KdTree(n={self.n_points}, d={self.data.shape[1]}, "
                f"nodes={self.n_nodes}, leaf_size={self.leaf_size})")


def build_kdtree(data, leaf_size=DEFAULT_LEAF_SIZE):
    return KdTree(data, leaf_size)


class _Builder:
    # Split on the widest dimension at the bound midpoint; if one side would
    # be empty use the median with ties sent left.  A node whose points are
    # all identical cannot be split and stays a (possibly oversized) leaf.

    def __init__(self, data, leaf_size):
        self.data = data
        self.leaf_size = leaf_size
        n, d = data.shape
        cap = max(1, 2 * ((n + leaf_size - 1) // leaf_size) + 1)
        cap = min(cap, 2 * n - 1) if n > 1 else 1
        self.cap = cap
        self.lo = np.empty((cap, d))
        self.hi = np.empty((cap, d))
        self.begin = np.empty(cap, dtype=np.int64)
        self.count = np.empty(cap, dtype=np.int64)
        self.left = np.full(cap, -1, dtype=np.int64)
        self.right = np.full(cap, -1, dtype=np.int64)
        self.parent = np.full(cap, -1, dtype=np.int64)
        self.split_dim = np.full(cap, -1, dtype=np.int64)
        self.split_value = np.full(cap, np.nan)
        self.perm = np.arange(n, dtype=np.int64)
        self.n_nodes = 0

    def _grow(self):
        extra = self.cap
        self.lo = np.vstack([self.lo, np.empty_like(self.lo[:extra])])
        self.hi = np.vstack([self.hi, np.empty_like(self.hi[:extra])])
        self.begin = np.concatenate([self.begin, np.empty(extra, dtype=np.int64)])
        self.count = np.concatenate([self.count, np.empty(extra, dtype=np.int64)])
        for name, fill, dtype in (("left", -1, np.int64), ("right", -1, np.int64),
                                  ("parent", -1, np.int64), ("split_dim", -1, np.int64),
                                  ("split_value", np.nan, np.float64)):
            arr = getattr(self, name)
            setattr(self, name, np.concatenate([arr, np.full(extra, fill, dtype=dtype)]))
        self.cap += extra

    def build_into(self, tree):
        # explicit stack; ids are relabelled to preorder afterwards
        root_id = self._new_node(0, self.data.shape[0], -1)
        stack = [root_id]
        while stack:
            node = stack.pop()
            children = self._split(node)
            if children is not None:
                # push right first so the left subtree is numbered first
                stack.append(children[1])
                stack.append(children[0])
        m = self.n_nodes
        tree.perm = self.perm
        tree.lo = self.lo[:m].copy()
        tree.hi = self.hi[:m].copy()
        tree.begin = self.begin[:m].copy()
        tree.count = self.count[:m].copy()
        tree.left = self.left[:m].copy()
        tree.right = self.right[:m].copy()
        tree.parent = self.parent[:m].copy()
        tree.split_dim = self.split_dim[:m].copy()
        tree.split_value = self.split_value[:m].copy()
        _renumber_preorder(tree)

    def _new_node(self, begin, count, parent):
        if self.n_nodes == self.cap:
            self._grow()
        node = self.n_nodes
        self.n_nodes += 1
        pts = self.data[self.perm[begin:begin + count]]
        self.lo[node] = pts.min(axis=0)
        self.hi[node] = pts.max(axis=0)
        self.begin[node] = begin
        self.count[node] = count
        self.parent[node] = parent
        return node

    def _split(self, node):
        count = self.count[node]
        if count <= self.leaf_size:
            return None
        width = self.hi[node] - self.lo[node]
        dim = int(np.argmax(width))
        if width[dim] <= 0.0:
            return None
        begin = self.begin[node]
        idx = self.perm[begin:begin + count]
        coords = self.data[idx, dim]
        value = self.lo[node, dim] + 0.5 * width[dim]
        go_left = coords <= value
        n_left = int(go_left.sum())
        if n_left == 0 or n_left == count:
            ordered = np.sort(coords)
            value = ordered[(count - 1) // 2]
            if value >= ordered[-1]:
                # the lower median is the maximum: split just below it
                value = ordered[ordered < ordered[-1]][-1]
            go_left = coords <= value
            n_left = int(go_left.sum())
        # stable partition keeps the build deterministic
        self.perm[begin:begin + count] = np.concatenate([idx[go_left], idx[~go_left]])
        self.split_dim[node] = dim
        self.split_value[node] = value
        left = self._new_node(begin, n_left, node)
        right = self._new_node(begin + n_left, count - n_left, node)
        self.left[node] = left
        self.right[node] = right
        return left, right


def _renumber_preorder(tree):
    # children are created in pairs, so the raw ids are not preorder; relabel
    m = tree.begin.shape[0]
    order = np.empty(m, dtype=np.int64)
    stack = [0]
    pos = 0
    while stack:
        node = stack.pop()
        order[pos] = node
        pos += 1
        if tree.left[node] >= 0:
            stack.append(tree.right[node])
            stack.append(tree.left[node])
    new_id = np.empty(m, dtype=np.int64)
    new_id[order] = np.arange(m)

    def remap(a):
        out = a[order].copy()
        mask = out >= 0
        out[mask] = new_id[out[mask]]
        return out

    tree.lo = tree.lo[order]
    tree.hi = tree.hi[order]
    tree.begin = tree.begin[order]
    tree.count = tree.count[order]
    tree.split_dim = tree.split_dim[order]
    tree.split_value = tree.split_value[order]
    tree.left = remap(tree.left)
    tree.right = remap(tree.right)
    tree.parent = remap(tree.parent)


def check_kdtree(tree):
    """Exhaustively verify the structural invariants; raise AssertionError on failure."""
    data = tree.data
    n = data.shape[0]
    perm = np.asarray(tree.perm)
    assert np.array_equal(np.sort(perm), np.arange(n)), "permutation is not a bijection"
    seen = np.zeros(n, dtype=np.int64)
    for node in range(tree.n_nodes):
        pts = data[tree.points_of(node)]
        assert tree.count[node] >= 1, f"node {node} is empty"
        assert np.array_equal(tree.lo[node], pts.min(axis=0)), f"node {node} lower bound not tight"
        assert np.array_equal(tree.hi[node], pts.max(axis=0)), f"node {node} upper bound not tight"
        l, r = tree.left[node], tree.right[node]
        if l < 0:
            assert r < 0, f"leaf {node} has a right child"
            if tree.count[node] > tree.leaf_size:
                assert np.all(tree.lo[node] == tree.hi[node]), f"leaf {node} oversized"
            seen[tree.points_of(node)] += 1
            continue
        assert r >= 0, f"internal node {node} lacks a right child"
        assert tree.parent[l] == node and tree.parent[r] == node
        assert tree.begin[l] == tree.begin[node]
        assert tree.begin[r] == tree.begin[node] + tree.count[l]
        assert tree.count[l] + tree.count[r] == tree.count[node]
        j, v = tree.split_dim[node], tree.split_value[node]
        assert np.all(data[tree.points_of(l), j] <= v), f"split violated left of node {node}"
        assert np.all(data[tree.points_of(r), j] > v), f"split violated right of node {node}"
    assert np.all(seen == 1), "a point is not in exactly one leaf"


# --- numba bound kernels (reduced distances) ------------------------------
# Kernels index the node arrays directly; slicing rows inside a hot loop
# costs reference-count traffic in numba.

# The gap expressions are branch-free: at most one of the two max() terms
# is nonzero, so the result is bitwise the same as the branching form while
# avoiding unpredictable branches.

@numba.njit(cache=True, inline="always")
def _min_point_reduced(lo, hi, node, Q, qi, mode, p):
    acc = 0.0
    for t in range(Q.shape[1]):
        x = Q[qi, t]
        acc += term(max(lo[node, t] - x, 0.0) + max(x - hi[node, t], 0.0), mode, p)
    return acc


@numba.njit(cache=True, inline="always")
def _max_point_reduced(lo, hi, node, Q, qi, mode, p):
    acc = 0.0
    for t in range(Q.shape[1]):
        x = Q[qi, t]
        acc += term(max(abs(x - lo[node, t]), abs(hi[node, t] - x)), mode, p)
    return acc


@numba.njit(cache=True, inline="always")
def _min_box_reduced(alo, ahi, an, blo, bhi, bn, mode, p):
    acc = 0.0
    for t in range(alo.shape[1]):
        gap = max(blo[bn, t] - ahi[an, t], 0.0) + max(alo[an, t] - bhi[bn, t], 0.0)
        acc += term(gap, mode, p)
    return acc


@numba.njit(cache=True, inline="always")
def _max_box_reduced(alo, ahi, an, blo, bhi, bn, mode, p):
    acc = 0.0
    for t in range(alo.shape[1]):
        acc += term(max(abs(bhi[bn, t] - alo[an, t]), abs(ahi[an, t] - blo[bn, t])), mode, p)
    return acc
