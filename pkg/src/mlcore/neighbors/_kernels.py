"""numba kernels for brute-force, kd-tree and cover-tree searches.

Conventions shared by every kernel:

* candidates are compared on reduced distances (see ``metrics``), ties
  broken toward the smaller reference index;
* ``best_d``/``best_i`` are ``(m, k)`` rows kept sorted best-first, seeded
  with sentinels (``+inf``/``-inf`` and ``NO_INDEX``);
* ``self_mode`` means the query set is the reference set and a query never
  matches its own index;
* kernels optionally log every pruned (query, node) or (query node,
  reference node) pair so tests can check that pruning was sound.
"""

import math

import numba
import numpy as np

from ..metrics import EUCLIDEAN, GENERAL, MANHATTAN, reduced_rows, root
from ..kdtree import _max_box_reduced, _max_point_reduced, _min_box_reduced, _min_point_reduced

NO_INDEX = np.iinfo(np.int64).max
# cover-tree bounds come from the triangle inequality on rounded distances
_TRI_SLACK = 1e-12


@numba.njit(cache=True, inline="always")
def _better(d, i, bd, bi, furthest):
    if furthest:
        return d > bd or (d == bd and i < bi)
    return d < bd or (d == bd and i < bi)


@numba.njit(cache=True)
def _shift_in(best_d, best_i, row, d, i, furthest):
    # callers test _better against the k-th entry first; inlining that test
    # here makes numba emit a much slower inner loop
    pos = best_d.shape[1] - 1
    while pos > 0 and _better(d, i, best_d[row, pos - 1], best_i[row, pos - 1], furthest):
        best_d[row, pos] = best_d[row, pos - 1]
        best_i[row, pos] = best_i[row, pos - 1]
        pos -= 1
    best_d[row, pos] = d
    best_i[row, pos] = i


@numba.njit(cache=True, inline="always")
def _box_prune(bound, kth, furthest, mode):
    # kd bounds are exact in floating point for p in {1, 2}; shave general p
    if mode == GENERAL:
        if furthest:
            return bound * (1.0 + 1e-12) < kth
        return bound * (1.0 - 1e-12) > kth
    if furthest:
        return bound < kth
    return bound > kth


@numba.njit(cache=True)
def _log(rec, n_rec, a, b):
    if n_rec >= rec.shape[0]:
        grown = np.empty((max(16, 2 * rec.shape[0]), 2), dtype=np.int64)
        grown[:n_rec] = rec[:n_rec]
        rec = grown
    rec[n_rec, 0] = a
    rec[n_rec, 1] = b
    return rec, n_rec + 1


# --- brute force -----------------------------------------------------------

# The kd and brute-force kernels pin the metric mode and sort direction with
# numba.literally, so each combination compiles with those branches folded.
# Python callers go through the jitted dispatchers at the end of this module:
# a literal request from a Python call re-runs type inference every time.

@numba.njit(cache=True)
def _brute_knn(R, Q, best_d, best_i, mode, p, furthest, self_mode):
    numba.literally(mode); numba.literally(furthest)
    n = R.shape[0]
    k = best_d.shape[1]
    for qi in range(Q.shape[0]):
        for r in range(n):
            if self_mode and r == qi:
                continue
            cand = reduced_rows(Q, qi, R, r, mode, p)
            if _better(cand, r, best_d[qi, k - 1], best_i[qi, k - 1], furthest):
                _shift_in(best_d, best_i, qi, cand, r, furthest)


@numba.njit(cache=True)
def _brute_range(R, Q, low, high, mode, p, self_mode):
    numba.literally(mode)
    m = Q.shape[0]
    offsets = np.zeros(m + 1, dtype=np.int64)
    idx = np.empty(16, dtype=np.int64)
    dist = np.empty(16)
    total = 0
    for qi in range(m):
        for r in range(R.shape[0]):
            if self_mode and r == qi:
                continue
            d = root(reduced_rows(Q, qi, R, r, mode, p), mode, p)
            if low <= d <= high:
                if total == idx.shape[0]:
                    idx, dist = _grow_pair(idx, dist)
                idx[total] = r
                dist[total] = d
                total += 1
        offsets[qi + 1] = total
    return offsets, idx[:total].copy(), dist[:total].copy()


@numba.njit(cache=True)
def _grow_pair(idx, dist):
    n = idx.shape[0]
    i2 = np.empty(2 * n, dtype=np.int64)
    d2 = np.empty(2 * n)
    i2[:n] = idx
    d2[:n] = dist
    return i2, d2


@numba.njit(cache=True)
def _sort_range_segment(idx, dist, start, end):
    # insertion sort by index; segments are produced in tree order
    for a in range(start + 1, end):
        ki = idx[a]
        kd = dist[a]
        b = a - 1
        while b >= start and idx[b] > ki:
            idx[b + 1] = idx[b]
            dist[b + 1] = dist[b]
            b -= 1
        idx[b + 1] = ki
        dist[b + 1] = kd


# --- kd-tree ---------------------------------------------------------------
# The kd kernels take the reference rows already permuted into tree order
# (row s is point perm[s]) so leaf scans read memory sequentially.

@numba.njit(cache=True)
def _kd_descend(R, perm, lo, hi, begin, count, left, right, start,
                Q, qi, best_d, best_i, mode, p, furthest, self_mode,
                stack, sbound, evals, record, rec, n_rec):
    # single-point depth-first search of the subtree under `start`
    k = best_d.shape[1]
    stack[0] = start
    if furthest:
        sbound[0] = _max_point_reduced(lo, hi, start, Q, qi, mode, p)
    else:
        sbound[0] = _min_point_reduced(lo, hi, start, Q, qi, mode, p)
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if _box_prune(sbound[top], best_d[qi, k - 1], furthest, mode):
            if record:
                rec, n_rec = _log(rec, n_rec, qi, node)
            continue
        if left[node] < 0:
            for s in range(begin[node], begin[node] + count[node]):
                r = perm[s]
                if self_mode and r == qi:
                    continue
                cand = reduced_rows(Q, qi, R, s, mode, p)
                evals += 1
                if _better(cand, r, best_d[qi, k - 1], best_i[qi, k - 1], furthest):
                    _shift_in(best_d, best_i, qi, cand, r, furthest)
            continue
        a = left[node]
        b = right[node]
        if furthest:
            ba = _max_point_reduced(lo, hi, a, Q, qi, mode, p)
            bb = _max_point_reduced(lo, hi, b, Q, qi, mode, p)
            a_first = ba >= bb
        else:
            ba = _min_point_reduced(lo, hi, a, Q, qi, mode, p)
            bb = _min_point_reduced(lo, hi, b, Q, qi, mode, p)
            a_first = ba <= bb
        if a_first:
            stack[top] = b
            sbound[top] = bb
            stack[top + 1] = a
            sbound[top + 1] = ba
        else:
            stack[top] = a
            sbound[top] = ba
            stack[top + 1] = b
            sbound[top + 1] = bb
        top += 2
    return evals, rec, n_rec


@numba.njit(cache=True)
def _kd_single_knn(R, perm, lo, hi, begin, count, left, right,
                  Q, qorder, best_d, best_i, mode, p, furthest, self_mode, record):
    numba.literally(mode); numba.literally(furthest)
    n_nodes = begin.shape[0]
    stack = np.empty(n_nodes + 1, dtype=np.int64)
    sbound = np.empty(n_nodes + 1)
    rec = np.empty((16 if record else 0, 2), dtype=np.int64)
    n_rec = 0
    evals = 0
    for qq in range(qorder.shape[0]):
        evals, rec, n_rec = _kd_descend(R, perm, lo, hi, begin, count, left, right, 0,
                                        Q, qorder[qq], best_d, best_i, mode, p, furthest, self_mode,
                                        stack, sbound, evals, record, rec, n_rec)
    return rec[:n_rec], evals


@numba.njit(cache=True)
def _kd_propagate(qbound, qparent, qleft, qright, node, furthest):
    node = qparent[node]
    while node >= 0:
        a = qbound[qleft[node]]
        b = qbound[qright[node]]
        if furthest:
            nb = a if a < b else b
        else:
            nb = a if a > b else b
        if nb == qbound[node]:
            break
        qbound[node] = nb
        node = qparent[node]


# A reference node is split alongside the query node only while it holds
# more than this many times the query node's points.  Coarse reference
# nodes let each per-point descent amortise its bound computations; in
# moderate dimension box-to-box bounds rarely prune fine node pairs.
_SPLIT_RATIO = 32


@numba.njit(cache=True)
def _kd_dual_knn(R, rperm, rlo, rhi, rbegin, rcount, rleft, rright,
                Q, qperm, qlo, qhi, qbegin, qcount, qleft, qright, qparent,
                best_d, best_i, mode, p, furthest, self_mode, record):
    numba.literally(mode); numba.literally(furthest)
    k = best_d.shape[1]
    qbound = np.full(qbegin.shape[0], -np.inf if furthest else np.inf)
    cap = 64
    sq = np.empty(cap, dtype=np.int64)
    sr = np.empty(cap, dtype=np.int64)
    sb = np.empty(cap)
    rec = np.empty((16 if record else 0, 2), dtype=np.int64)
    n_rec = 0
    evals = 0
    cq = np.empty(4, dtype=np.int64)
    cr = np.empty(4, dtype=np.int64)
    cb = np.empty(4)
    pstack = np.empty(rbegin.shape[0] + 1, dtype=np.int64)
    pbound = np.empty(rbegin.shape[0] + 1)
    prec = np.empty((0, 2), dtype=np.int64)

    sq[0] = 0
    sr[0] = 0
    if furthest:
        sb[0] = _max_box_reduced(qlo, qhi, 0, rlo, rhi, 0, mode, p)
    else:
        sb[0] = _min_box_reduced(qlo, qhi, 0, rlo, rhi, 0, mode, p)
    top = 1
    while top > 0:
        top -= 1
        qn = sq[top]
        rn = sr[top]
        if _box_prune(sb[top], qbound[qn], furthest, mode):
            if record:
                rec, n_rec = _log(rec, n_rec, qn, rn)
            continue
        if qleft[qn] < 0:
            # base case: each query point of the leaf descends the reference
            # subtree on its own, pruning with its own k-th distance
            worst = np.inf if furthest else -np.inf
            for s in range(qbegin[qn], qbegin[qn] + qcount[qn]):
                qi = qperm[s]
                evals, prec, n_prec = _kd_descend(R, rperm, rlo, rhi, rbegin, rcount, rleft, rright, rn,
                                                  Q, qi, best_d, best_i, mode, p, furthest, self_mode,
                                                  pstack, pbound, evals, False, prec, 0)
                kth = best_d[qi, k - 1]
                if furthest:
                    if kth < worst:
                        worst = kth
                elif kth > worst:
                    worst = kth
            if worst != qbound[qn]:
                qbound[qn] = worst
                _kd_propagate(qbound, qparent, qleft, qright, qn, furthest)
            continue
        # expand into child pairs, best bound popped first
        keep_r = rleft[rn] < 0 or rcount[rn] <= _SPLIT_RATIO * qcount[qn]
        nc = 0
        for a in range(2):
            qc = qleft[qn] if a == 0 else qright[qn]
            for b in range(2):
                if keep_r:
                    if b == 1:
                        break
                    rc = rn
                else:
                    rc = rleft[rn] if b == 0 else rright[rn]
                if furthest:
                    bound = _max_box_reduced(qlo, qhi, qc, rlo, rhi, rc, mode, p)
                else:
                    bound = _min_box_reduced(qlo, qhi, qc, rlo, rhi, rc, mode, p)
                cq[nc] = qc
                cr[nc] = rc
                cb[nc] = bound
                nc += 1
        if top + nc > cap:
            cap = 2 * cap
            sq2 = np.empty(cap, dtype=np.int64)
            sr2 = np.empty(cap, dtype=np.int64)
            sb2 = np.empty(cap)
            sq2[:top] = sq[:top]
            sr2[:top] = sr[:top]
            sb2[:top] = sb[:top]
            sq, sr, sb = sq2, sr2, sb2
        # stable insertion sort, worst first so the best ends on top
        for x in range(1, nc):
            vq, vr, vb = cq[x], cr[x], cb[x]
            y = x - 1
            while y >= 0 and ((cb[y] > vb) if furthest else (cb[y] < vb)):
                cq[y + 1] = cq[y]
                cr[y + 1] = cr[y]
                cb[y + 1] = cb[y]
                y -= 1
            cq[y + 1] = vq
            cr[y + 1] = vr
            cb[y + 1] = vb
        for x in range(nc):
            sq[top] = cq[x]
            sr[top] = cr[x]
            sb[top] = cb[x]
            top += 1
    return rec[:n_rec], evals


@numba.njit(cache=True)
def _kd_range(R, perm, lo, hi, begin, count, left, right, Q,
             low, high, low_red, high_red, mode, p, self_mode):
    numba.literally(mode)
    m = Q.shape[0]
    n_nodes = begin.shape[0]
    offsets = np.zeros(m + 1, dtype=np.int64)
    idx = np.empty(16, dtype=np.int64)
    dist = np.empty(16)
    total = 0
    stack = np.empty(n_nodes + 1, dtype=np.int64)
    for qi in range(m):
        start = total
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            if _min_point_reduced(lo, hi, node, Q, qi, mode, p) > high_red:
                continue
            if _max_point_reduced(lo, hi, node, Q, qi, mode, p) < low_red:
                continue
            if left[node] >= 0:
                stack[top] = right[node]
                stack[top + 1] = left[node]
                top += 2
                continue
            for s in range(begin[node], begin[node] + count[node]):
                r = perm[s]
                if self_mode and r == qi:
                    continue
                d = root(reduced_rows(Q, qi, R, s, mode, p), mode, p)
                if low <= d <= high:
                    if total == idx.shape[0]:
                        idx, dist = _grow_pair(idx, dist)
                    idx[total] = r
                    dist[total] = d
                    total += 1
        _sort_range_segment(idx, dist, start, total)
        offsets[qi + 1] = total
    return offsets, idx[:total].copy(), dist[:total].copy()


# --- cover tree ------------------------------------------------------------

@numba.njit(cache=True, inline="always")
def _cover_prune(dist, fdd, kth_red, mode, p, furthest):
    if furthest:
        if kth_red == -np.inf:
            return False
        kth = root(kth_red, mode, p)
        return dist + fdd < kth - _TRI_SLACK * (dist + fdd + kth)
    if kth_red == np.inf:
        return False
    kth = root(kth_red, mode, p)
    return dist - fdd > kth + _TRI_SLACK * (dist + fdd + kth)


@numba.njit(cache=True)
def _sort_children(ids, reds, keys, n, descending):
    # stable insertion sort of the first n entries by key
    for x in range(1, n):
        vi, vr, vk = ids[x], reds[x], keys[x]
        y = x - 1
        while y >= 0 and ((keys[y] < vk) if descending else (keys[y] > vk)):
            ids[y + 1] = ids[y]
            reds[y + 1] = reds[y]
            keys[y + 1] = keys[y]
            y -= 1
        ids[y + 1] = vi
        reds[y + 1] = vr
        keys[y + 1] = vk


@numba.njit(cache=True)
def cover_single_knn(R, point, fdd, head, child_start, child_end, children,
                     Q, best_d, best_i, mode, p, furthest, self_mode, record):
    n_nodes = point.shape[0]
    k = best_d.shape[1]
    max_c = 1
    for node in range(n_nodes):
        c = child_end[node] - child_start[node]
        if c > max_c:
            max_c = c
    stack = np.empty(n_nodes + 1, dtype=np.int64)
    sred = np.empty(n_nodes + 1)
    ids = np.empty(max_c, dtype=np.int64)
    reds = np.empty(max_c)
    keys = np.empty(max_c)
    rec = np.empty((16 if record else 0, 2), dtype=np.int64)
    n_rec = 0
    evals = 0
    for qi in range(Q.shape[0]):
        stack[0] = 0
        sred[0] = reduced_rows(Q, qi, R, point[0], mode, p)
        evals += 1
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            red = sred[top]
            dist = root(red, mode, p)
            if _cover_prune(dist, fdd[node], best_d[qi, k - 1], mode, p, furthest):
                if record:
                    rec, n_rec = _log(rec, n_rec, qi, node)
                continue
            pt = point[node]
            if head[node] and not (self_mode and pt == qi):
                if _better(red, pt, best_d[qi, k - 1], best_i[qi, k - 1], furthest):
                    _shift_in(best_d, best_i, qi, red, pt, furthest)
            nc = 0
            for s in range(child_start[node], child_end[node]):
                c = children[s]
                if point[c] == pt:
                    cred = red
                else:
                    cred = reduced_rows(Q, qi, R, point[c], mode, p)
                    evals += 1
                cd = root(cred, mode, p)
                ids[nc] = c
                reds[nc] = cred
                keys[nc] = cd + fdd[c] if furthest else cd - fdd[c]
                nc += 1
            # worst first on the stack so the most promising child pops next
            _sort_children(ids, reds, keys, nc, not furthest)
            for x in range(nc):
                stack[top] = ids[x]
                sred[top] = reds[x]
                top += 1
    return rec[:n_rec], evals


@numba.njit(cache=True)
def _cover_propagate(qbound, qparent, child_start, child_end, children, node, furthest):
    node = qparent[node]
    while node >= 0:
        nb = np.inf if furthest else -np.inf
        for s in range(child_start[node], child_end[node]):
            v = qbound[children[s]]
            if furthest:
                if v < nb:
                    nb = v
            elif v > nb:
                nb = v
        if nb == qbound[node]:
            break
        qbound[node] = nb
        node = qparent[node]


@numba.njit(cache=True)
def cover_dual_knn(R, rpoint, rfdd, rscale, rstart, rend, rchildren,
                   Q, qpoint, qfdd, qscale, qstart, qend, qchildren, qparent,
                   best_d, best_i, mode, p, furthest, self_mode, record):
    k = best_d.shape[1]
    qbound = np.full(qpoint.shape[0], -np.inf if furthest else np.inf)
    max_c = 1
    for node in range(rpoint.shape[0]):
        c = rend[node] - rstart[node]
        if c > max_c:
            max_c = c
    for node in range(qpoint.shape[0]):
        c = qend[node] - qstart[node]
        if c > max_c:
            max_c = c
    cap = 256
    sq = np.empty(cap, dtype=np.int64)
    sr = np.empty(cap, dtype=np.int64)
    sred = np.empty(cap)
    ids = np.empty(max_c, dtype=np.int64)
    reds = np.empty(max_c)
    keys = np.empty(max_c)
    rec = np.empty((16 if record else 0, 2), dtype=np.int64)
    n_rec = 0
    evals = 0

    sq[0] = 0
    sr[0] = 0
    sred[0] = reduced_rows(Q, qpoint[0], R, rpoint[0], mode, p)
    evals += 1
    top = 1
    while top > 0:
        top -= 1
        qn = sq[top]
        rn = sr[top]
        red = sred[top]
        dist = root(red, mode, p)
        if _cover_prune(dist, qfdd[qn] + rfdd[rn], qbound[qn], mode, p, furthest):
            if record:
                rec, n_rec = _log(rec, n_rec, qn, rn)
            continue
        q_leaf = qend[qn] == qstart[qn]
        r_leaf = rend[rn] == rstart[rn]
        if q_leaf and r_leaf:
            qi = qpoint[qn]
            r = rpoint[rn]
            if not (self_mode and r == qi):
                if _better(red, r, best_d[qi, k - 1], best_i[qi, k - 1], furthest):
                    _shift_in(best_d, best_i, qi, red, r, furthest)
            kth = best_d[qi, k - 1]
            if kth != qbound[qn]:
                qbound[qn] = kth
                _cover_propagate(qbound, qparent, qstart, qend, qchildren, qn, furthest)
            continue
        # descend the reference side unless the query node is strictly coarser
        descend_q = (not q_leaf) and (r_leaf or qscale[qn] > rscale[rn])
        descend_r = (not r_leaf) and (q_leaf or rscale[rn] >= qscale[qn])
        if descend_q and not descend_r:
            n_q = qend[qn] - qstart[qn]
        else:
            n_q = 1
        n_r = rend[rn] - rstart[rn] if descend_r else 1
        need = top + n_q * n_r
        if need > cap:
            while cap < need:
                cap *= 2
            sq2 = np.empty(cap, dtype=np.int64)
            sr2 = np.empty(cap, dtype=np.int64)
            sred2 = np.empty(cap)
            sq2[:top] = sq[:top]
            sr2[:top] = sr[:top]
            sred2[:top] = sred[:top]
            sq, sr, sred = sq2, sr2, sred2
        if descend_r:
            nc = 0
            for s in range(rstart[rn], rend[rn]):
                c = rchildren[s]
                if rpoint[c] == rpoint[rn]:
                    cred = red
                else:
                    cred = reduced_rows(Q, qpoint[qn], R, rpoint[c], mode, p)
                    evals += 1
                cd = root(cred, mode, p)
                ids[nc] = c
                reds[nc] = cred
                keys[nc] = cd + rfdd[c] if furthest else cd - rfdd[c]
                nc += 1
            _sort_children(ids, reds, keys, nc, not furthest)
            for x in range(nc):
                sq[top] = qn
                sr[top] = ids[x]
                sred[top] = reds[x]
                top += 1
        else:
            nc = 0
            for s in range(qstart[qn], qend[qn]):
                c = qchildren[s]
                if qpoint[c] == qpoint[qn]:
                    cred = red
                else:
                    cred = reduced_rows(Q, qpoint[c], R, rpoint[rn], mode, p)
                    evals += 1
                cd = root(cred, mode, p)
                ids[nc] = c
                reds[nc] = cred
                keys[nc] = cd + qfdd[c] if furthest else cd - qfdd[c]
                nc += 1
            _sort_children(ids, reds, keys, nc, not furthest)
            for x in range(nc):
                sq[top] = ids[x]
                sr[top] = rn
                sred[top] = reds[x]
                top += 1
    return rec[:n_rec], evals


@numba.njit(cache=True)
def cover_range(R, point, fdd, head, child_start, child_end, children,
                Q, low, high, mode, p, self_mode):
    m = Q.shape[0]
    n_nodes = point.shape[0]
    offsets = np.zeros(m + 1, dtype=np.int64)
    idx = np.empty(16, dtype=np.int64)
    dist = np.empty(16)
    total = 0
    stack = np.empty(n_nodes + 1, dtype=np.int64)
    sred = np.empty(n_nodes + 1)
    for qi in range(m):
        start = total
        stack[0] = 0
        sred[0] = reduced_rows(Q, qi, R, point[0], mode, p)
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            red = sred[top]
            d = root(red, mode, p)
            f = fdd[node]
            slack = _TRI_SLACK * (d + f + high if high < np.inf else d + f)
            if d - f > high + slack:
                continue
            if d + f < low - _TRI_SLACK * (d + f + low):
                continue
            pt = point[node]
            if head[node] and not (self_mode and pt == qi) and low <= d <= high:
                if total == idx.shape[0]:
                    idx, dist = _grow_pair(idx, dist)
                idx[total] = pt
                dist[total] = d
                total += 1
            for s in range(child_start[node], child_end[node]):
                c = children[s]
                stack[top] = c
                if point[c] == pt:
                    sred[top] = red
                else:
                    sred[top] = reduced_rows(Q, qi, R, point[c], mode, p)
                top += 1
        _sort_range_segment(idx, dist, start, total)
        offsets[qi + 1] = total
    return offsets, idx[:total].copy(), dist[:total].copy()


# --- literal dispatch ----------------------------------------------------------

@numba.njit(cache=True)
def brute_knn(R, Q, best_d, best_i, mode, p, furthest, self_mode):
    if furthest:
        if mode == MANHATTAN:
            _brute_knn(R, Q, best_d, best_i, 1, p, True, self_mode)
        elif mode == EUCLIDEAN:
            _brute_knn(R, Q, best_d, best_i, 2, p, True, self_mode)
        else:
            _brute_knn(R, Q, best_d, best_i, 0, p, True, self_mode)
    else:
        if mode == MANHATTAN:
            _brute_knn(R, Q, best_d, best_i, 1, p, False, self_mode)
        elif mode == EUCLIDEAN:
            _brute_knn(R, Q, best_d, best_i, 2, p, False, self_mode)
        else:
            _brute_knn(R, Q, best_d, best_i, 0, p, False, self_mode)


@numba.njit(cache=True)
def brute_range(R, Q, low, high, mode, p, self_mode):
    if mode == MANHATTAN:
        return _brute_range(R, Q, low, high, 1, p, self_mode)
    if mode == EUCLIDEAN:
        return _brute_range(R, Q, low, high, 2, p, self_mode)
    return _brute_range(R, Q, low, high, 0, p, self_mode)


@numba.njit(cache=True)
def kd_single_knn(R, perm, lo, hi, begin, count, left, right,
                  Q, qorder, best_d, best_i, mode, p, furthest, self_mode, record):
    if furthest:
        if mode == MANHATTAN:
            return _kd_single_knn(R, perm, lo, hi, begin, count, left, right,
                                  Q, qorder, best_d, best_i, 1, p, True, self_mode, record)
        if mode == EUCLIDEAN:
            return _kd_single_knn(R, perm, lo, hi, begin, count, left, right,
                                  Q, qorder, best_d, best_i, 2, p, True, self_mode, record)
        return _kd_single_knn(R, perm, lo, hi, begin, count, left, right,
                              Q, qorder, best_d, best_i, 0, p, True, self_mode, record)
    if mode == MANHATTAN:
        return _kd_single_knn(R, perm, lo, hi, begin, count, left, right,
                              Q, qorder, best_d, best_i, 1, p, False, self_mode, record)
    if mode == EUCLIDEAN:
        return _kd_single_knn(R, perm, lo, hi, begin, count, left, right,
                              Q, qorder, best_d, best_i, 2, p, False, self_mode, record)
    return _kd_single_knn(R, perm, lo, hi, begin, count, left, right,
                          Q, qorder, best_d, best_i, 0, p, False, self_mode, record)


@numba.njit(cache=True)
def kd_dual_knn(R, rperm, rlo, rhi, rbegin, rcount, rleft, rright,
                Q, qperm, qlo, qhi, qbegin, qcount, qleft, qright, qparent,
                best_d, best_i, mode, p, furthest, self_mode, record):
    if furthest:
        if mode == MANHATTAN:
            return _kd_dual_knn(R, rperm, rlo, rhi, rbegin, rcount, rleft, rright,
                                Q, qperm, qlo, qhi, qbegin, qcount, qleft, qright, qparent,
                                best_d, best_i, 1, p, True, self_mode, record)
        if mode == EUCLIDEAN:
            return _kd_dual_knn(R, rperm, rlo, rhi, rbegin, rcount, rleft, rright,
                                Q, qperm, qlo, qhi, qbegin, qcount, qleft, qright, qparent,
                                best_d, best_i, 2, p, True, self_mode, record)
        return _kd_dual_knn(R, rperm, rlo, rhi, rbegin, rcount, rleft, rright,
                            Q, qperm, qlo, qhi, qbegin, qcount, qleft, qright, qparent,
                            best_d, best_i, 0, p, True, self_mode, record)
    if mode == MANHATTAN:
        return _kd_dual_knn(R, rperm, rlo, rhi, rbegin, rcount, rleft, rright,
                            Q, qperm, qlo, qhi, qbegin, qcount, qleft, qright, qparent,
                            best_d, best_i, 1, p, False, self_mode, record)
    if mode == EUCLIDEAN:
        return _kd_dual_knn(R, rperm, rlo, rhi, rbegin, rcount, rleft, rright,
                            Q, qperm, qlo, qhi, qbegin, qcount, qleft, qright, qparent,
                            best_d, best_i, 2, p, False, self_mode, record)
    return _kd_dual_knn(R, rperm, rlo, rhi, rbegin, rcount, rleft, rright,
                        Q, qperm, qlo, qhi, qbegin, qcount, qleft, qright, qparent,
                        best_d, best_i, 0, p, False, self_mode, record)


@numba.njit(cache=True)
def kd_range(R, perm, lo, hi, begin, count, left, right, Q,
             low, high, low_red, high_red, mode, p, self_mode):
    if mode == MANHATTAN:
        return _kd_range(R, perm, lo, hi, begin, count, left, right, Q,
                         low, high, low_red, high_red, 1, p, self_mode)
    if mode == EUCLIDEAN:
        return _kd_range(R, perm, lo, hi, begin, count, left, right, Q,
                         low, high, low_red, high_red, 2, p, self_mode)
    return _kd_range(R, perm, lo, hi, begin, count, left, right, Q,
                     low, high, low_red, high_red, 0, p, self_mode)
