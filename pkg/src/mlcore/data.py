"""Datasets: validation, CSV input/output, and seeded generation.

A dataset ("data matrix") is a 2-D float64 numpy array with one point per
row.  :func:`as_data_matrix` validates an array and returns a read-only
view; nothing else in the library mutates data it is given.
"""

import math
import os

import numpy as np

from .errors import DataFormatError, InvalidParameter

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class SeededRng:
    """SplitMix64 generator (Steele, Lea and Flood; public-domain
    reference code by Sebastiano Vigna).

    The state is a 64-bit counter advanced by the golden-ratio gamma; each
    output is a fixed mixing function of the counter.  Because outputs
    depend only on ``seed`` and their position in the stream, bulk draws
    are vectorized and the sequence is identical on every platform.

    Doubles use the top 53 bits, so :meth:`random` lies in ``[0, 1)``.
    A generator belongs to one owner; do not share it between threads.
    """

    def __init__(self, seed=0):
        seed = int(seed)
        if seed < 0 or seed > _MASK64:
            raise InvalidParameter("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self._counter = 0

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, position={self._counter})"

    def next_u64(self, size):
        """Next ``size`` raw 64-bit outputs as a uint64 array."""
        size = int(size)
        if size < 0:
            raise InvalidParameter("size must be non-negative")
        steps = np.arange(self._counter + 1, self._counter + 1 + size, dtype=np.uint64)
        self._counter += size
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + steps * _GOLDEN_GAMMA
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))

    def random(self, size=None):
        """Uniform doubles on ``[0, 1)``; a float when ``size`` is None."""
        n = 1 if size is None else int(np.prod(size))
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        if size is None:
            return float(u[0])
        return u.reshape(size)

    def integers(self, high, size=None):
        """Uniform integers on ``[0, high)`` (multiply-shift reduction)."""
        high = int(high)
        if high < 1:
            raise InvalidParameter("high must be >= 1")
        n = 1 if size is None else int(np.prod(size))
        u = self.random(n)
        out = np.minimum((u * high).astype(np.int64), high - 1)
        if size is None:
            return int(out[0])
        return out.reshape(size)

    def choice_weighted(self, weights):
        """Index drawn with probability proportional to ``weights``."""
        w = np.asarray(weights, dtype=np.float64)
        total = math.fsum(w)
        if not total > 0.0:
            raise InvalidParameter("weights must have a positive sum")
        cdf = np.cumsum(w)
        target = self.random() * cdf[-1]
        idx = int(np.searchsorted(cdf, target, side="right"))
        idx = min(idx, w.shape[0] - 1)
        # never land on a zero-weight entry through rounding
        while w[idx] == 0.0 and idx > 0:
            idx -= 1
        while w[idx] == 0.0:
            idx += 1
        return idx


def as_data_matrix(data, name="data"):
    """Validate ``data`` and return it as a read-only float64 matrix.

    One-dimensional input is treated as a single column.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DataFormatError(f"{name} must be 2-D, got {arr.ndim}-D")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataFormatError(f"{name} must have at least one point and one dimension")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise DataFormatError(f"{name} contains a non-finite value", row=int(bad[0]), column=int(bad[1]))
    arr = np.ascontiguousarray(arr).view()
    arr.flags.writeable = False
    return arr


def generate_uniform(n, d, rng):
    """``n x d`` matrix of i.i.d. uniform ``[0, 1)`` values, row-major draw order."""
    n, d = int(n), int(d)
    if n < 1 or d < 1:
        raise InvalidParameter(f"shape must be positive, got {n}x{d}")
    if not isinstance(rng, SeededRng):
        rng = SeededRng(rng)
    return as_data_matrix(rng.random((n, d)))


def load_csv(path, expect_header=False):
    """Read a comma-separated numeric file with one point per row.

    Blank lines are skipped.  Row numbers in errors are 1-based file line
    numbers; column numbers are 1-based.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    rows = []
    width = None
    skip_header = bool(expect_header)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if skip_header:
                skip_header = False
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DataFormatError(
                    f"ragged row: expected {width} columns, found {len(cells)}", row=lineno
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                for col, c in enumerate(cells, start=1):
                    try:
                        float(c)
                    except ValueError:
                        raise DataFormatError(f"non-numeric cell {c.strip()!r}", row=lineno, column=col) from None
            if not all(math.isfinite(v) for v in rows[-1]):
                col = next(i for i, v in enumerate(rows[-1], start=1) if not math.isfinite(v))
                raise DataFormatError("non-finite cell", row=lineno, column=col)
    if not rows:
        raise DataFormatError(f"empty file: {path}")
    return as_data_matrix(np.array(rows, dtype=np.float64))


def format_number(x):
    """Shortest decimal string that round-trips to ``x``; integral values lose ``.0``."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    s = repr(float(x))
    if s.endswith(".0"):
        s = s[:-2]
    return s


def save_csv(data, path):
    """Write a matrix (or vector, as one column) to ``path``.

    Integer arrays are written as integers, floats with shortest
    round-trip digits, so :func:`load_csv` recovers the values exactly.
    """
    arr = np.asarray(data)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataFormatError("refusing to write an empty matrix")
    integral = np.issubdtype(arr.dtype, np.integer)
    if not integral:
        arr = arr.astype(np.float64)
    lines = []
    if integral:
        for row in arr.tolist():
            lines.append(",".join(str(v) for v in row))
    else:
        for row in arr.tolist():
            lines.append(",".join(format_number(v) for v in row))
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
