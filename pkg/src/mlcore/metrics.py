"""Lp metric policies.

Every distance in the library is computed as a *reduced* value
``sum_j |a_j - b_j|**p`` accumulated in coordinate order, followed by a
p-th root.  The numpy and numba paths below perform the same floating
point operations in the same order, so a distance evaluated during tree
construction, a tree search, or a brute-force scan is bitwise identical.
"""

import math

import numba
import numpy as np

from .errors import DimensionMismatch, InvalidParameter

# kernel modes; GENERAL uses pow() for both the terms and the root
MANHATTAN = 1
EUCLIDEAN = 2
GENERAL = 0


class LpMetric:
    """Minkowski distance of order ``p >= 1``.

    Instances are immutable policy objects.  Kernels receive the pair
    ``(mode, p)`` rather than the object itself.
    """

    __slots__ = ("_p", "_mode")

    def __init__(self, p=2.0):
        p = float(p)
        if not math.isfinite(p) or p < 1.0:
            raise InvalidParameter(f"Lp metric requires finite p >= 1, got {p}")
        object.__setattr__(self, "_p", p)
        if p == 1.0:
            mode = MANHATTAN
        elif p == 2.0:
            mode = EUCLIDEAN
        else:
            mode = GENERAL
        object.__setattr__(self, "_mode", mode)

    def __setattr__(self, name, value):
        raise AttributeError("metric policies are immutable")

    @property
    def p(self):
        return self._p

    @property
    def mode(self):
        return self._mode

    @property
    def name(self):
        if self._mode == MANHATTAN:
            return "l1"
        if self._mode == EUCLIDEAN:
            return "l2"
        return f"l{self._p:g}"

    def __repr__(self):
        return f"{type(self).__name__}(p={self._p:g})"

    def __eq__(self, other):
        return isinstance(other, LpMetric) and other._p == self._p

    def __hash__(self):
        return hash(("LpMetric", self._p))

    def __reduce__(self):
        return (LpMetric, (self._p,))

    def reduced(self, a, b):
        a, b = _pair(a, b)
        return _reduced_vec(a, b, self._mode, self._p)

    def root(self, r):
        return _root_scalar(r, self._mode, self._p)

    def unroot(self, d):
        """Inverse of :meth:`root` (up to rounding)."""
        if self._mode == MANHATTAN:
            return d
        if self._mode == EUCLIDEAN:
            return d * d
        return d ** self._p

    def distance(self, a, b):
        return self.root(self.reduced(a, b))

    __call__ = distance

    def reduced_to_many(self, x, Y):
        """Reduced distances from point ``x`` to every row of ``Y``."""
        x = np.asarray(x, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if Y.ndim != 2 or x.ndim != 1:
            raise InvalidParameter("expected a point and a 2-D matrix")
        if x.shape[0] != Y.shape[1]:
            raise DimensionMismatch(x.shape[0], Y.shape[1])
        return _reduced_to_many(np.ascontiguousarray(x[None, :]), np.ascontiguousarray(Y),
                                self._mode, self._p)

    def to_many(self, x, Y):
        return _root_many(self.reduced_to_many(x, Y), self._mode, self._p)


def ManhattanDistance():
    return LpMetric(1.0)


def EuclideanDistance():
    return LpMetric(2.0)


def get_metric(spec):
    """Resolve ``'l1'``, ``'l2'``, a number, or an :class:`LpMetric`."""
    if isinstance(spec, LpMetric):
        return spec
    if isinstance(spec, str):
        key = spec.strip().lower()
        aliases = {"l1": 1.0, "manhattan": 1.0, "l2": 2.0, "euclidean": 2.0}
        if key in aliases:
            return LpMetric(aliases[key])
        if key.startswith("l"):
            key = key[1:]
        try:
            return LpMetric(float(key))
        except ValueError:
            raise InvalidParameter(f"unknown metric {spec!r}") from None
    return LpMetric(spec)


def lp_distance(a, b, p=2.0):
    """``(sum |a_i - b_i|**p) ** (1/p)``."""
    return LpMetric(p).distance(a, b)


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(a.shape[0], b.shape[0])
    return a, b


def _reduced_vec(a, b, mode, p):
    acc = 0.0
    for j in range(a.shape[0]):
        diff = float(a[j]) - float(b[j])
        if mode == MANHATTAN:
            acc += abs(diff)
        elif mode == EUCLIDEAN:
            acc += diff * diff
        else:
            acc += abs(diff) ** p
    return acc


def _root_scalar(r, mode, p):
    if mode == MANHATTAN:
        return float(r)
    if mode == EUCLIDEAN:
        return math.sqrt(r)
    return float(r) ** (1.0 / p)


# --- numba kernels --------------------------------------------------------

@numba.njit(cache=True, inline="always")
def reduced_rows(A, i, B, j, mode, p):
    acc = 0.0
    d = A.shape[1]
    if mode == EUCLIDEAN:
        for t in range(d):
            diff = A[i, t] - B[j, t]
            acc += diff * diff
    elif mode == MANHATTAN:
        for t in range(d):
            acc += abs(A[i, t] - B[j, t])
    else:
        for t in range(d):
            acc += abs(A[i, t] - B[j, t]) ** p
    return acc


@numba.njit(cache=True, inline="always")
def root(r, mode, p):
    if mode == MANHATTAN:
        return r
    if mode == EUCLIDEAN:
        return math.sqrt(r)
    return r ** (1.0 / p)


@numba.njit(cache=True, inline="always")
def term(x, mode, p):
    """Contribution of one non-negative coordinate gap to a reduced distance."""
    if mode == EUCLIDEAN:
        return x * x
    if mode == MANHATTAN:
        return x
    return x ** p


# numpy's vectorised pow may differ from libm in the last bit, so the
# many-point helpers run through the same compiled arithmetic as the kernels
@numba.njit(cache=True)
def _reduced_to_many(x, Y, mode, p):
    out = np.empty(Y.shape[0])
    for j in range(Y.shape[0]):
        out[j] = reduced_rows(x, 0, Y, j, mode, p)
    return out


@numba.njit(cache=True)
def _root_many(r, mode, p):
    out = np.empty(r.shape[0])
    for j in range(r.shape[0]):
        out[j] = root(r[j], mode, p)
    return out
