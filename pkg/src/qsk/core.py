"""Stream and universe primitives: exact ranks, stream distance, dyadic helpers.

Elements live in the integer universe [1, U].  The exact oracle here is the
reference answer for differential tests and the `verify` command; it is not
part of the sketch itself.
"""

from bisect import bisect_right
from fractions import Fraction
from math import log2

import numpy as np


class DomainError(ValueError):
    """An argument falls outside its documented domain."""


class ContractViolation(AssertionError):
    """A documented precondition or internal invariant does not hold."""


def check_element(x, U):
    if not (1 <= x <= U):
        raise DomainError(f"element {x} outside universe [1, {U}]")
    return x


class Stream:
    """An ordered sequence of universe elements in [1, U]."""

    __slots__ = ("U", "elements")

    def __init__(self, U, elements=()):
        self.U = int(U)
        self.elements = []
        for x in elements:
            self.append(x)

    def append(self, x):
        self.elements.append(check_element(int(x), self.U))

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


class ExactOracle:
    """Exact multiset of stream elements, answering true ranks.

    Keys are kept sorted so a rank query is a binary search over a prefix-sum
    table; this scales to the million-element differential runs.
    """

    __slots__ = ("U", "counts", "total", "_keys", "_prefix", "_dirty")

    def __init__(self, U, elements=()):
        self.U = int(U)
        self.counts = {}
        self.total = 0
        self._keys = None
        self._prefix = None
        self._dirty = True
        for x in elements:
            self.add(x)

    def add(self, x, multiplicity=1):
        x = check_element(int(x), self.U)
        self.counts[x] = self.counts.get(x, 0) + multiplicity
        self.total += multiplicity
        self._dirty = True

    def _refresh(self):
        if self._dirty:
            self._keys = np.fromiter(sorted(self.counts), dtype=np.int64,
                                     count=len(self.counts))
            cnts = np.fromiter((self.counts[k] for k in self._keys),
                               dtype=np.int64, count=len(self._keys))
            self._prefix = np.cumsum(cnts)
            self._dirty = False

    def rank(self, x):
        return exact_rank(self, x)

    def rank_many(self, xs):
        """Vectorized ranks for an array of query points."""
        self._refresh()
        xs = np.asarray(xs, dtype=np.int64)
        if np.any(xs < 1) or np.any(xs > self.U):
            raise DomainError("query point outside universe")
        if len(self._keys) == 0:
            return np.zeros(len(xs), dtype=np.int64)
        idx = np.searchsorted(self._keys, xs, side="right")
        out = np.zeros(len(xs), dtype=np.int64)
        nz = idx > 0
        out[nz] = self._prefix[idx[nz] - 1]
        return out


def exact_rank(oracle, x):
    """Number of stream elements <= x, exactly."""
    check_element(x, oracle.U)
    oracle._refresh()
    if len(oracle._keys) == 0:
        return 0
    i = np.searchsorted(oracle._keys, x, side="right")
    return int(oracle._prefix[i - 1]) if i > 0 else 0


def stream_distance(a, b):
    """Max over x of |rank_a(x) - rank_b(x)| for equal-length streams.

    The maximum is attained at an element value of one of the streams, so we
    sweep the merged sorted element sets instead of iterating the universe.
    """
    if len(a) != len(b):
        raise ContractViolation("stream_distance requires equal lengths")
    xs_a = sorted(a.elements if isinstance(a, Stream) else a)
    xs_b = sorted(b.elements if isinstance(b, Stream) else b)
    points = sorted(set(xs_a) | set(xs_b))
    best = 0
    for x in points:
        ra = bisect_right(xs_a, x)
        rb = bisect_right(xs_b, x)
        best = max(best, abs(ra - rb))
    return best


def cceil(x):
    """Smallest power of two that is at least x (exact, x may be rational).

    For x >= 1 the result is an int; for 0 < x < 1 it is an exact Fraction
    1 / 2**m.  Always x <= cceil(x) <= 2x.
    """
    x = Fraction(x)
    if x <= 0:
        raise DomainError("cceil requires x > 0")
    n, d = x.numerator, x.denominator
    if x >= 1:
        # a power of two >= x iff it is >= ceil(x), since powers here are ints
        q = -(-n // d)
        return 1 << (q - 1).bit_length()
    # x < 1: largest m with 1/2**m >= x, i.e. 2**m <= d/n
    m = (d // n).bit_length() - 1
    return Fraction(1, 1 << m)


def log_star(m):
    """Iterated logarithm: applications of log2 needed to fall below 1.

    The application producing log2(1) = 0 is counted, so log_star(2) == 2 and
    log_star(16) == 4.  Values below 1 need no applications.
    """
    v = float(m)
    if v < 0:
        raise DomainError("log_star requires m >= 0")
    j = 0
    while v >= 1:
        v = log2(v) if v > 0 else -1.0
        j += 1
    return j


def is_power_of_two(v):
    """True for exact integer or dyadic-fraction powers of two."""
    if isinstance(v, Fraction):
        if v.numerator == 1:
            v = v.denominator
        elif v.denominator == 1:
            v = v.numerator
        else:
            return False
    if isinstance(v, float):
        return False
    return v >= 1 and (v & (v - 1)) == 0
