import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mlcore import CoverTree, KdTree
from mlcore.errors import DimensionMismatch, InvalidParameter
from mlcore.neighbors import (
    FURTHEST, NEAREST, SELF, NeighborSearch, SortPolicy, brute_force_range,
    brute_force_search, knn_search, range_search,
)

from conftest import oracle_distances, oracle_knn

REF = np.array([[0.0, 0.0], [1.0, 0.0], [4.0, 0.0]])


def cover_leaves_under(tree, node):
    out, stack = [], [node]
    while stack:
        cur = stack.pop()
        kids = tree.children[tree.child_start[cur]:tree.child_end[cur]]
        if kids.size == 0:
            out.append(int(tree.point[cur]))
        stack.extend(kids.tolist())
    return out


def index_for(kind, X, metric="l2", leaf_size=4):
    return KdTree(X, leaf_size) if kind == "kd" else CoverTree(X, metric)


class TestSortPolicy:
    def test_replacement_rule(self):
        assert NEAREST.better(1.0, 5, 2.0, 0)
        assert NEAREST.better(1.0, 1, 1.0, 2) and not NEAREST.better(1.0, 2, 1.0, 1)
        assert FURTHEST.better(3.0, 9, 2.0, 0)
        assert not FURTHEST.better(2.0, 3, 2.0, 3)

    def test_prune_is_strict(self):
        assert NEAREST.can_prune(2.0, 1.0) and not NEAREST.can_prune(1.0, 1.0)
        assert FURTHEST.can_prune(1.0, 2.0) and not FURTHEST.can_prune(2.0, 2.0)

    def test_unknown_direction(self):
        with pytest.raises(InvalidParameter):
            SortPolicy("sideways")


class TestBruteForce:
    def test_nearest_example(self):
        r = brute_force_search(REF, [[0.4, 0.0]], 2, "l2", NEAREST)
        assert r.indices.tolist() == [[0, 1]]
        np.testing.assert_allclose(r.distances, [[0.4, 0.6]], rtol=1e-15)

    def test_furthest_example(self):
        r = brute_force_search(REF, [[0.4, 0.0]], 1, "l2", FURTHEST)
        assert r.indices.tolist() == [[2]]
        np.testing.assert_allclose(r.distances, [[3.6]], rtol=1e-15)

    def test_self_exclusion(self):
        r = brute_force_search(REF, SELF, 1)
        assert r.indices[:, 0].tolist() == [1, 0, 1]

    def test_ties_prefer_smaller_index(self):
        X = np.array([[0.0], [1.0], [-1.0], [1.0]])
        r = brute_force_search(X, [[0.0]], 3)
        assert r.indices.tolist() == [[0, 1, 2]]

    def test_k_too_large(self):
        with pytest.raises(InvalidParameter):
            brute_force_search(REF, SELF, 3)
        with pytest.raises(InvalidParameter):
            brute_force_search(REF, [[0.0, 0.0]], 4)
        brute_force_search(REF, [[0.0, 0.0]], 3)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            brute_force_search(REF, [[0.0, 0.0, 1.0]], 1)

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
    @pytest.mark.parametrize("furthest", [False, True])
    def test_matches_scipy_oracle(self, rng, p, furthest):
        X = rng.random((200, 4))
        Q = rng.random((30, 4))
        r = brute_force_search(X, Q, 5, p, FURTHEST if furthest else NEAREST)
        idx, dist = oracle_knn(X, Q, 5, p, furthest)
        assert np.array_equal(r.indices, idx)
        np.testing.assert_allclose(r.distances, dist, rtol=1e-12)

    def test_matches_scipy_oracle_self(self, rng):
        X = rng.random((150, 3))
        r = brute_force_search(X, SELF, 3)
        idx, dist = oracle_knn(X, None, 3, 2.0, exclude_self=True)
        assert np.array_equal(r.indices, idx)
        np.testing.assert_allclose(r.distances, dist, rtol=1e-12)


COMBOS = [(kind, trav) for kind in ("kd", "cover") for trav in ("single", "dual", "naive")]


class TestTreeSearch:
    @pytest.mark.parametrize("kind,traversal", COMBOS)
    @pytest.mark.parametrize("policy", [NEAREST, FURTHEST])
    @pytest.mark.parametrize("metric", ["l1", "l2", 1.5])
    def test_matches_brute_force(self, rng, kind, traversal, policy, metric):
        X = rng.random((250, 3))
        Q = rng.random((40, 3))
        idx = index_for(kind, X, metric, leaf_size=5)
        for query in (SELF, Q):
            want = brute_force_search(X, query, 4, metric, policy)
            got = knn_search(idx, X, query, 4, metric, policy, traversal)
            assert np.array_equal(got.indices, want.indices)
            assert np.array_equal(got.distances, want.distances)

    @pytest.mark.parametrize("kind,traversal", COMBOS)
    def test_heavy_ties(self, kind, traversal):
        # integer grid with many duplicate points and equal distances
        rng = np.random.default_rng(2)
        X = rng.integers(0, 3, size=(120, 2)).astype(float)
        idx = index_for(kind, X, leaf_size=3)
        for policy in (NEAREST, FURTHEST):
            want = brute_force_search(X, SELF, 7, "l2", policy)
            got = knn_search(idx, X, SELF, 7, None, policy, traversal)
            assert np.array_equal(got.indices, want.indices)
            assert np.array_equal(got.distances, want.distances)

    def test_wine_shaped(self, rng):
        X = rng.normal(size=(178, 13))
        r = knn_search(KdTree(X), X, SELF, 3)
        assert r.indices.shape == (178, 3)
        idx, dist = oracle_knn(X, None, 3, 2.0, exclude_self=True)
        assert np.array_equal(r.indices, idx)
        np.testing.assert_allclose(r.distances, dist, rtol=1e-12)

    def test_k_equals_n_self_is_error(self, rng):
        X = rng.random((10, 2))
        with pytest.raises(InvalidParameter):
            knn_search(KdTree(X), X, SELF, 10)

    def test_unknown_traversal(self, rng):
        X = rng.random((10, 2))
        with pytest.raises(InvalidParameter):
            knn_search(KdTree(X), X, SELF, 1, traversal="sideways")

    def test_reference_must_match_tree(self, rng):
        X = rng.random((10, 2))
        with pytest.raises(InvalidParameter):
            knn_search(KdTree(X), X + 1, SELF, 1)

    def test_cover_metric_fixed_at_build(self, rng):
        X = rng.random((10, 2))
        with pytest.raises(InvalidParameter):
            knn_search(CoverTree(X, "l2"), X, SELF, 1, "l1")

    def test_rows_sorted_distinct_no_self(self, rng):
        X = rng.random((300, 2))
        for policy in (NEAREST, FURTHEST):
            r = knn_search(KdTree(X), X, SELF, 6, None, policy)
            step = np.diff(r.distances, axis=1)
            assert np.all(step >= 0) if policy is NEAREST else np.all(step <= 0)
            assert all(len(set(row)) == 6 for row in r.indices.tolist())
            assert not np.any(r.indices == np.arange(300)[:, None])

    def test_distances_recomputable(self, rng):
        X = rng.random((100, 3))
        Q = rng.random((20, 3))
        r = knn_search(CoverTree(X, "l1"), X, Q, 3)
        D = oracle_distances(Q, X, 1.0)
        np.testing.assert_allclose(r.distances, np.take_along_axis(D, r.indices, 1), rtol=1e-12)

    def test_trees_do_less_work(self, rng):
        X = rng.random((3000, 2))
        naive = knn_search(None, X, SELF, 3)
        for trav in ("single", "dual"):
            assert knn_search(KdTree(X), X, SELF, 3, traversal=trav).evaluations < naive.evaluations / 5
            assert knn_search(CoverTree(X), X, SELF, 3, traversal=trav).evaluations < naive.evaluations / 5

    def test_neighbor_search_wrapper(self):
        ns = NeighborSearch(REF, tree="cover")
        assert ns.search([[0.4, 0.0]], k=2).indices.tolist() == [[0, 1]]
        assert ns.furthest([[0.4, 0.0]], k=1).indices.tolist() == [[2]]
        assert ns.range([[0.4, 0.0]], 0.0, 1.0).indices[0].tolist() == [0, 1]
        with pytest.raises(InvalidParameter):
            NeighborSearch(REF, tree="ball")

    @given(arrays(np.float64, st.tuples(st.integers(2, 60), st.integers(1, 3)),
                  elements=st.sampled_from([0.0, 1.0, 2.0]) | st.floats(-3, 3)),
           st.integers(1, 5), st.sampled_from(COMBOS), st.booleans())
    def test_property_matches_brute_force(self, X, k, combo, furthest):
        k = min(k, X.shape[0] - 1)
        kind, traversal = combo
        policy = FURTHEST if furthest else NEAREST
        want = brute_force_search(X, SELF, k, "l2", policy)
        got = knn_search(index_for(kind, X, leaf_size=2), X, SELF, k, None, policy, traversal)
        assert np.array_equal(got.indices, want.indices)
        assert np.array_equal(got.distances, want.distances)


class TestPruneSoundness:
    @pytest.mark.parametrize("policy", [NEAREST, FURTHEST])
    @pytest.mark.parametrize("traversal", ["single", "dual"])
    def test_kd(self, rng, policy, traversal):
        X = rng.random((400, 2))
        Q = rng.random((60, 2))
        t = KdTree(X, 4)
        r, pruned = knn_search(t, X, Q, 3, None, policy, traversal, record_prunes=True)
        assert len(pruned) > 0
        for a, node in pruned.tolist():
            queries = [a] if traversal == "single" else r.query_tree.points_of(a).tolist()
            inside = set(t.points_of(node).tolist())
            for q in queries:
                assert inside.isdisjoint(r.indices[q].tolist())

    @pytest.mark.parametrize("policy", [NEAREST, FURTHEST])
    @pytest.mark.parametrize("traversal", ["single", "dual"])
    def test_cover(self, rng, policy, traversal):
        X = rng.random((300, 2))
        Q = rng.random((50, 2))
        t = CoverTree(X)
        r, pruned = knn_search(t, X, Q, 3, None, policy, traversal, record_prunes=True)
        assert len(pruned) > 0
        for a, node in pruned.tolist():
            queries = [a] if traversal == "single" else cover_leaves_under(r.query_tree, a)
            inside = set(cover_leaves_under(t, node))
            for q in queries:
                assert inside.isdisjoint(r.indices[q].tolist())


class TestRange:
    @staticmethod
    def oracle(X, Q, low, high, p, self_mode=False):
        D = oracle_distances(X if Q is None else Q, X, p)
        out = []
        for i, row in enumerate(D):
            hit = np.flatnonzero((row >= low) & (row <= high))
            if self_mode:
                hit = hit[hit != i]
            out.append(hit)
        return out

    @pytest.mark.parametrize("kind", ["kd", "cover"])
    def test_uniform_3d_window(self, rng, kind):
        X = rng.random((500, 3))
        r = range_search(index_for(kind, X, leaf_size=10), X, SELF, 0.1, 0.3)
        want = self.oracle(X, None, 0.1, 0.3, 2.0, self_mode=True)
        brute = brute_force_range(X, SELF, 0.1, 0.3)
        for got, exp, bi, bd, gd in zip(r.indices, want, brute.indices, brute.distances, r.distances):
            assert np.array_equal(got, bi) and np.array_equal(gd, bd)
            # boundary-straddling pairs may differ from scipy by one rounding step
            assert len(np.setxor1d(got, exp)) <= 1

    @pytest.mark.parametrize("kind", ["kd", "cover"])
    def test_zero_window_distinct_points(self, rng, kind):
        X = rng.random((80, 2))
        r = range_search(index_for(kind, X), X, SELF, 0.0, 0.0)
        assert all(len(i) == 0 for i in r.indices)

    @pytest.mark.parametrize("kind", ["kd", "cover"])
    def test_full_window(self, rng, kind):
        X = rng.random((60, 2))
        Q = rng.random((7, 2))
        r = range_search(index_for(kind, X), X, Q, 0.0, np.finfo(float).max)
        assert all(i.tolist() == list(range(60)) for i in r.indices)

    def test_duplicates_at_zero(self):
        X = np.array([[0.0], [0.0], [1.0]])
        r = range_search(KdTree(X), X, SELF, 0.0, 0.0)
        assert [i.tolist() for i in r.indices] == [[1], [0], []]

    def test_low_above_high(self, rng):
        X = rng.random((5, 2))
        with pytest.raises(InvalidParameter):
            range_search(KdTree(X), X, SELF, 0.5, 0.1)
        with pytest.raises(InvalidParameter):
            range_search(KdTree(X), X, SELF, -0.1, 0.1)

    @pytest.mark.parametrize("kind", ["kd", "cover"])
    @pytest.mark.parametrize("metric", ["l1", "l2"])
    def test_matches_brute_force(self, rng, kind, metric):
        X = rng.random((200, 4))
        Q = rng.random((25, 4))
        for query in (SELF, Q):
            want = brute_force_range(X, query, 0.2, 0.7, metric)
            got = range_search(index_for(kind, X, metric), X, query, 0.2, 0.7, metric)
            for a, b, c, d in zip(got.indices, want.indices, got.distances, want.distances):
                assert np.array_equal(a, b) and np.array_equal(c, d)
