"""Cover trees built by batch insertion.

A node at scale ``s`` has children at lower scales whose points lie within
``base**s`` of it (covering) and are pairwise more than ``base**(s-1)``
apart (separation).  The first child always repeats the parent's point
(nesting).  Levels where a point would only have its self-child are left
implicit, so a child's scale can be lower than ``s - 1``.  Every point ends
its self-chain in exactly one leaf.

Exact duplicates cannot be separated at any scale.  They are attached as
extra leaf children of the point they duplicate; the invariant checker
exempts zero-distance pairs from separation.
"""

import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .data import as_data_matrix
from .errors import InvalidParameter
from .metrics import get_metric

DEFAULT_BASE = 2.0
LEAF_SCALE = -(2 ** 31)


@dataclass
class CoverNode:
    point: int
    scale: int
    children: list = field(default_factory=list)
    furthest_descendant_distance: float = 0.0

    @property
    def is_leaf(self):
        return not self.children


class CoverTree:
    """Immutable cover tree.

    ``root`` is the :class:`CoverNode` hierarchy.  The same structure is
    also flattened into arrays (node id = preorder position) for the
    search kernels: ``point``, ``scale``, ``fdd``, ``parent``,
    ``child_start``/``child_end`` into ``children``, and ``head`` marking
    the node where each point first appears.
    """

    def __init__(self, data, metric="l2", base=DEFAULT_BASE):
        base = float(base)
        if not base > 1.0 or not math.isfinite(base):
            raise InvalidParameter(f"cover tree base must be > 1, got {base}")
        self.data = as_data_matrix(data)
        self.metric = get_metric(metric)
        self.base = base
        self.root = _build(self.data, self.metric, base)
        _fill_furthest_descendants(self)
        _flatten(self)

    @property
    def n_points(self):
        return self.data.shape[0]

    @property
    def n_nodes(self):
        return self.point.shape[0]

    def nodes(self):
        """Preorder iterator over ``(node, parent)`` pairs."""
        stack = [(self.root, None)]
        while stack:
            node, parent = stack.pop()
            yield node, parent
            for child in reversed(node.children):
                stack.append((child, node))

    def leaf_points(self):
        return sorted(node.point for node, _ in self.nodes() if node.is_leaf)

    def __repr__(self):
        return (f"CoverTree(n={self.n_points}, base={self.base:g}, "
                f"metric={self.metric.name}, nodes={self.n_nodes})")


def build_cover_tree(data, metric="l2", base=DEFAULT_BASE):
    return CoverTree(data, metric, base)


def node_min_dist(tree, node, q):
    """Lower bound on the distance from ``q`` to any descendant of ``node``."""
    d = tree.metric.distance(q, tree.data[node.point])
    return max(0.0, d - node.furthest_descendant_distance)


def node_max_dist(tree, node, q):
    d = tree.metric.distance(q, tree.data[node.point])
    return d + node.furthest_descendant_distance


def _scale_for(dist, base):
    """Smallest integer s with ``base**s >= dist`` (dist > 0)."""
    s = math.ceil(math.log(dist) / math.log(base))
    while base ** s < dist:
        s += 1
    while base ** (s - 1) >= dist:
        s -= 1
    return s


def _build(data, metric, base):
    n = data.shape[0]
    if n == 1:
        return CoverNode(0, LEAF_SCALE)
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10000))
    try:
        others = np.arange(1, n, dtype=np.int64)
        dists = metric.to_many(data[0], data[others])
        near = (others, dists)
        far = (np.empty(0, dtype=np.int64), np.empty(0))
        top = _scale_for(dists.max(), base) if dists.max() > 0 else 0
        node, unused = _Construct(data, metric, base).run(0, near, far, top)
    finally:
        sys.setrecursionlimit(limit)
    assert unused[0].size == 0
    return node


class _Construct:
    # near holds points within base**scale of p, far points beyond it; both
    # are (indices, distances-to-p) array pairs.  run() places every near
    # point under p and returns the far points it did not consume.

    def __init__(self, data, metric, base):
        self.data = data
        self.metric = metric
        self.base = base

    def dist_from(self, i, idx):
        return self.metric.to_many(self.data[i], self.data[idx])

    def run(self, p, near, far, scale):
        near_idx, near_d = near
        if near_idx.size == 0:
            return CoverNode(p, LEAF_SCALE), far
        dmax = near_d.max()
        if dmax == 0.0:
            node = CoverNode(p, scale, [CoverNode(p, LEAF_SCALE)])
            node.children.extend(CoverNode(int(i), LEAF_SCALE) for i in np.sort(near_idx))
            return node, far
        # skip levels at which p would only have its self-child
        scale = min(scale, _scale_for(dmax, self.base))
        inner = self.base ** (scale - 1)

        mask = near_d <= inner
        self_child, rest = self.run(
            p, (near_idx[mask], near_d[mask]), (near_idx[~mask], near_d[~mask]), scale - 1
        )
        near_idx, near_d = rest
        if near_idx.size == 0:
            return self_child, far
        far_idx, far_d = far
        node = CoverNode(p, scale, [self_child])
        radius = self.base ** scale
        while near_idx.size:
            # deterministic choice: the smallest remaining point index
            pick = int(np.argmin(near_idx))
            q = int(near_idx[pick])
            keep = np.ones(near_idx.size, dtype=bool)
            keep[pick] = False
            near_idx, near_d = near_idx[keep], near_d[keep]

            dq_near = self.dist_from(q, near_idx)
            dq_far = self.dist_from(q, far_idx)
            take_near = dq_near <= radius
            take_far = dq_far <= radius
            cand_idx = np.concatenate([near_idx[take_near], far_idx[take_far]])
            cand_d = np.concatenate([dq_near[take_near], dq_far[take_far]])
            near_idx, near_d = near_idx[~take_near], near_d[~take_near]
            far_idx, far_d = far_idx[~take_far], far_d[~take_far]

            inside = cand_d <= inner
            child, unused = self.run(
                q, (cand_idx[inside], cand_d[inside]), (cand_idx[~inside], cand_d[~inside]), scale - 1
            )
            node.children.append(child)

            back_idx = unused[0]
            if back_idx.size:
                back_d = self.dist_from(p, back_idx)
                close = back_d <= radius
                near_idx = np.concatenate([near_idx, back_idx[close]])
                near_d = np.concatenate([near_d, back_d[close]])
                far_idx = np.concatenate([far_idx, back_idx[~close]])
                far_d = np.concatenate([far_d, back_d[~close]])
        return node, (far_idx, far_d)


def _fill_furthest_descendants(tree):
    # exact: max distance from each node's point to its descendant leaves
    data, metric = tree.data, tree.metric

    def leaves_under(node):
        if node.is_leaf:
            return [node.point]
        out = []
        for child in node.children:
            out.extend(leaves_under(child))
        node._leaves = out
        return out

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10000))
    try:
        leaves_under(tree.root)
    finally:
        sys.setrecursionlimit(limit)
    for node, _ in tree.nodes():
        if node.is_leaf:
            node.furthest_descendant_distance = 0.0
        else:
            idx = np.asarray(node._leaves, dtype=np.int64)
            node.furthest_descendant_distance = float(metric.to_many(data[node.point], data[idx]).max())
            del node._leaves


def _flatten(tree):
    order = list(tree.nodes())
    ids = {id(node): i for i, (node, _) in enumerate(order)}
    m = len(order)
    point = np.empty(m, dtype=np.int64)
    scale = np.empty(m, dtype=np.int64)
    fdd = np.empty(m)
    parent = np.full(m, -1, dtype=np.int64)
    head = np.zeros(m, dtype=np.bool_)
    child_start = np.zeros(m, dtype=np.int64)
    child_end = np.zeros(m, dtype=np.int64)
    children = []
    for i, (node, par) in enumerate(order):
        point[i] = node.point
        scale[i] = node.scale
        fdd[i] = node.furthest_descendant_distance
        if par is not None:
            parent[i] = ids[id(par)]
        head[i] = par is None or par.point != node.point
        child_start[i] = len(children)
        children.extend(ids[id(c)] for c in node.children)
        child_end[i] = len(children)
    tree.point = point
    tree.scale = scale
    tree.fdd = fdd
    tree.parent = parent
    tree.head = head
    tree.child_start = child_start
    tree.child_end = child_end
    tree.children = np.asarray(children, dtype=np.int64)
    for name in ("point", "scale", "fdd", "parent", "head", "child_start", "child_end", "children"):
        getattr(tree, name).flags.writeable = False


def check_cover_tree(tree):
    """Exhaustively verify nesting, covering, separation, the descendant
    radius, and that leaves are exactly the dataset.  Raises AssertionError."""
    data, metric, base = tree.data, tree.metric, tree.base
    leaves = []
    for node, parent in tree.nodes():
        if node.is_leaf:
            leaves.append(node.point)
            assert node.furthest_descendant_distance == 0.0
            continue
        s = node.scale
        assert node.children[0].point == node.point, f"nesting violated at point {node.point}"
        pts = np.array([c.point for c in node.children], dtype=np.int64)
        d_parent = metric.to_many(data[node.point], data[pts])
        assert np.all(d_parent <= base ** s), f"covering violated under point {node.point} scale {s}"
        for c in node.children:
            assert c.scale < s, f"child scale {c.scale} not below parent scale {s}"
        sep = base ** (s - 1)
        for a in range(len(pts)):
            if a + 1 < len(pts):
                d = metric.to_many(data[pts[a]], data[pts[a + 1:]])
                # duplicates are the only pairs allowed to be inseparable
                assert np.all((d > sep) | (d == 0.0)), f"separation violated under point {node.point} scale {s}"
        desc = _descendant_leaves(node)
        dd = metric.to_many(data[node.point], data[np.asarray(desc)])
        fdd = node.furthest_descendant_distance
        assert fdd >= dd.max(), "furthest descendant distance too small"
        assert fdd <= base ** (s + 1) / (base - 1) * (1 + 1e-12), "furthest descendant distance above cap"
    assert sorted(leaves) == list(range(tree.n_points)), "leaf points differ from the dataset"


def _descendant_leaves(node):
    out = []
    stack = [node]
    while stack:
        cur = stack.pop()
        if cur.is_leaf:
            out.append(cur.point)
        else:
            stack.extend(cur.children)
    return out
