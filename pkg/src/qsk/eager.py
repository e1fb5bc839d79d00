"""Optimized eager q-digest: the single-structure baseline sketch.

A forest of 1/eps dyadic trees over [1, U].  Inserting x increments the
highest non-full node whose interval contains x; every node, including the
infinite unary paths below singleton intervals, respects the capacity, so
rank error is one-sided (overcount only) and at most alpha per ancestor
level of the query point.
"""

from fractions import Fraction
from math import log2

import numpy as np

from .core import ContractViolation, DomainError, check_element
from .params import _next_pow2, _pow2_floor_frac
from .nodes import t0_child_containing, t0_lo, t0_root


class CapacityExceeded(RuntimeError):
    """The digest received more elements than its fixed bound n."""


class EagerQDigest:
    __slots__ = ("eps", "U", "n_bound", "alpha", "h", "t", "w", "chains",
                 "_memo")

    def __init__(self, eps, U, n_bound, alpha=None):
        eps = _pow2_floor_frac(Fraction(eps))
        if not (0 < eps <= 1):
            raise DomainError("eps must be in (0, 1]")
        U = _next_pow2(U)
        if eps * U < 2:
            raise DomainError("eps*U must be at least 2")
        self.eps = eps
        self.U = U
        self.n_bound = int(n_bound)
        self.h = int(log2(eps * U))
        if alpha is None:
            alpha = max(1, int(eps * self.n_bound) // self.h)
        self.alpha = int(alpha)
        self.t = 0
        self.w = {}        # node id -> weight (non-singleton nodes)
        self.chains = {}   # x -> [n_full, partial] on the [x,x] unary path
        self._memo = {}

    def insert(self, x):
        x = int(x)
        check_element(x, self.U)
        if self.t >= self.n_bound:
            raise CapacityExceeded(f"digest is bounded at n = {self.n_bound}")
        A = self.alpha
        ref = self._memo.get(x)
        if ref is None:
            ref = t0_root(x, self.h)
        while ref > 0 and self.w.get(ref, 0) >= A:
            ref = t0_child_containing(ref, x, self.h)
        self._memo[x] = ref
        if ref < 0:
            rec = self.chains.get(x)
            if rec is None:
                rec = self.chains[x] = [0, 0]
            rec[1] += 1
            if rec[1] == A:
                rec[0] += 1
                rec[1] = 0
        else:
            self.w[ref] = self.w.get(ref, 0) + 1
        self.t += 1

    def extend(self, xs):
        for x in xs:
            self.insert(x)

    def rank(self, x):
        """Weight of all nodes whose interval contains a value <= x."""
        x = int(x)
        check_element(x, self.U)
        r = 0
        for nid, wv in self.w.items():
            if t0_lo(nid) <= x:
                r += wv
        A = self.alpha
        for cx, (nf, pw) in self.chains.items():
            if cx <= x:
                r += nf * A + pw
        return r

    def snapshot(self):
        los = [t0_lo(nid) for nid in self.w]
        ws = list(self.w.values())
        A = self.alpha
        for cx, (nf, pw) in self.chains.items():
            los.append(cx)
            ws.append(nf * A + pw)
        if not los:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        los = np.asarray(los, dtype=np.int64)
        ws = np.asarray(ws, dtype=np.int64)
        order = np.argsort(los, kind="stable")
        return los[order], np.cumsum(ws[order])

    def rank_many(self, xs):
        los, pref = self.snapshot()
        xs = np.asarray(xs, dtype=np.int64)
        if len(los) == 0:
            return np.zeros(len(xs), dtype=np.int64)
        idx = np.searchsorted(los, xs, side="right")
        out = np.zeros(len(xs), dtype=np.int64)
        nz = idx > 0
        out[nz] = pref[idx[nz] - 1]
        return out

    def quantile(self, r):
        if not (0 <= r <= self.t):
            raise DomainError(f"rank {r} outside [0, {self.t}]")
        if r == 0:
            return 1
        los, pref = self.snapshot()
        lo, hi = 1, self.U
        while lo < hi:
            mid = (lo + hi) // 2
            idx = np.searchsorted(los, mid, side="right")
            rv = int(pref[idx - 1]) if idx > 0 else 0
            if rv >= r:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def node_count(self):
        return len(self.w) + sum(nf + (1 if pw else 0)
                                 for nf, pw in self.chains.values())

    def full_node_count(self):
        n = sum(1 for wv in self.w.values() if wv == self.alpha)
        return n + sum(nf for nf, _ in self.chains.values())

    def space_bits(self):
        """Length in bits of the canonical encoding (see codec)."""
        from .codec import eager_payload_bits
        return eager_payload_bits(self)

    def check_eager_invariant(self):
        """No node has positive weight under a non-full ancestor."""
        from .nodes import chain_parent_t0, t0_parent
        A = self.alpha

        def climb(p):
            while p is not None:
                if self.w.get(p, 0) != A:
                    raise ContractViolation("eager invariant broken")
                p = t0_parent(p, self.h)

        for nid in self.w:
            climb(t0_parent(nid, self.h))
        for x, (nf, pw) in self.chains.items():
            if nf or pw:
                climb(chain_parent_t0(x, self.h))
