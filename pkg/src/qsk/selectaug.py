"""Select queries answered with genuine stream elements.

Black-box wrapper over any rank-capable sketch: keeps a short sorted list of
real stream elements (anchors) with maintained rank estimates, pruned so the
list stays O(1/eps) long.  A select query picks the first anchor whose
estimate is close enough to the requested rank.
"""

from bisect import bisect_left
from fractions import Fraction

import numpy as np

from .core import DomainError


class SelectAugmented:
    """Wraps a sketch; insertions go through here to keep anchors current."""

    def __init__(self, sketch):
        self.sketch = sketch
        self.eps = Fraction(sketch.eps)
        self.t = 0
        self.xs = []                             # anchors, strictly increasing
        self.rs = np.zeros(0, dtype=np.int64)    # rank estimates, increasing

    def __len__(self):
        return len(self.xs)

    def insert(self, x):
        x = int(x)
        self.sketch.insert(x)
        self.t += 1
        i = bisect_left(self.xs, x)
        # bump estimates of anchors at or above x
        if i < len(self.xs):
            self.rs[i:] += 1
        if i < len(self.xs) and self.xs[i] == x:
            self._prune()
            return
        r = int(self.sketch.rank(x))
        if i > 0:
            r = max(r, int(self.rs[i - 1]) + 1)
        else:
            r = max(r, 1)
        self.xs.insert(i, x)
        self.rs = np.insert(self.rs, i, r)
        self._prune()

    def _prune(self):
        # delete anchor j while r_{j+1} - r_{j-1} <= eps*t (r_0 = 0 sentinel),
        # scanning left to right until a fixpoint
        num, den = self.eps.numerator, self.eps.denominator
        limit_num = num * self.t
        changed = True
        while changed:
            changed = False
            j = 0
            while j + 1 < len(self.xs):
                left = int(self.rs[j - 1]) if j > 0 else 0
                if (int(self.rs[j + 1]) - left) * den <= limit_num:
                    del self.xs[j]
                    self.rs = np.delete(self.rs, j)
                    changed = True
                else:
                    j += 1

    def select(self, r):
        """A genuine stream element whose true rank is near r."""
        if not self.xs:
            raise DomainError("select on an empty stream")
        if not (0 <= r <= self.t):
            raise DomainError(f"rank {r} outside [0, {self.t}]")
        num, den = self.eps.numerator, self.eps.denominator
        # r < 2*eps*t: answer the smallest anchor
        if r * den < 2 * num * self.t:
            return self.xs[0]
        # minimal i with r <= r_i + 2*eps*t, exactly
        thresh = r - Fraction(2 * num * self.t, den)
        lo = int(np.searchsorted(self.rs, -(-thresh.numerator // thresh.denominator)
                                 if thresh > 0 else 0, side="left"))
        if lo >= len(self.xs):
            lo = len(self.xs) - 1
        return self.xs[lo]

    def rank(self, x):
        return self.sketch.rank(x)
