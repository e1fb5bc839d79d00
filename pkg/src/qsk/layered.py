"""The O(1/eps)-word layered quantile sketch.

A sketch is a stack of recursive digest layers T_0..T_k.  Inserts land in
the last layer; every n_i-th element the contents of layer i are merged one
layer down (move, compress, round), and when the stream outgrows the current
bound n0 the whole structure doubles its capacities.  Layers 0..k-1 only
ever hold nodes that are completely full or completely empty, which is what
makes the 2-bits-per-node encoding of codec.py possible.

Query regimes: below 1/eps elements an explicit buffer answers exactly;
between 1/eps and n_star a replicated structure (same parameters, every
element inserted eps*n_star times) is authoritative; beyond n_star the main
structure answers directly.
"""

import os
from fractions import Fraction

import numpy as np
from sortedcontainers import SortedList

from .core import ContractViolation, DomainError, check_element
from .params import ParamSet, derive_params, n_star as n_star_of
from .nodes import (
    chain_parent_t0, is_t0, t0_child_containing, t0_children, t0_id,
    t0_interval, t0_lo, t0_parent, t0_root, up_depth, up_id, up_layer,
    up_slot,
)

_BIG = 1 << 62
_MAX_COMPRESS_PASSES = 256


class _Layer:
    """Weights of one layer: scattered nodes plus per-value chain records."""

    __slots__ = ("w", "chains", "total")

    def __init__(self):
        self.w = {}        # node id -> weight
        self.chains = {}   # x -> [n_full, partial]
        self.total = 0

    def chain_weight(self, alpha):
        return sum(nf * alpha + pw for nf, pw in self.chains.values())

    def is_empty(self):
        return self.total == 0


def round_partials(partials, alpha, allow_discard=False):
    """Left-to-right rounding sweep over disjoint partial nodes.

    ``partials`` is a list of (sort_key, weight); returns (decisions,
    discarded) where decisions[i] is True when partial i becomes full.
    Total kept weight is always (sum // alpha) * alpha; the remainder is an
    error unless ``allow_discard``.
    """
    total = sum(w for _, w in partials)
    r_count, excess = divmod(total, alpha)
    if excess and not allow_discard:
        raise ContractViolation(
            f"partial weight {total} not a multiple of capacity {alpha}")
    decisions = []
    c = 0
    m = 1
    for _, w in partials:
        c += w
        if m <= r_count and c >= m * alpha:
            decisions.append(True)
            m += 1
        else:
            decisions.append(False)
    return decisions, excess


def compress_weights(weights, parent, alpha, order=None):
    """Reference compress on an explicit node -> weight map.

    Repeated deepest-first passes; each positive node moves the maximum
    transferable amount into its (non-full) parent, until no move is
    possible.  ``parent`` maps a node to its parent or None; ``order`` sorts
    nodes ancestors-first.  Mirrors the in-sketch engine for small traces.
    """
    if order is None:
        order = lambda v: v
    w = dict(weights)
    while True:
        moved = False
        for v in sorted(w, key=order, reverse=True):
            if w.get(v, 0) <= 0:
                continue
            p = parent(v)
            if p is None:
                continue
            room = alpha - w.get(p, 0)
            if room > 0:
                mv = min(w[v], room)
                w[v] -= mv
                w[p] = w.get(p, 0) + mv
                moved = True
        if not moved:
            return {v: wv for v, wv in w.items() if wv}


class LayeredCore:
    """The bare layered structure (no query-regime wrappers).

    ``mult`` scales the base capacities derived at n0 = n_star; doubling the
    structure is just ``mult *= 2`` followed by a re-settle of layer 0.
    """

    def __init__(self, params: ParamSet):
        if params.n0 != params.n_star:
            params = params.with_n0(params.n_star)
        self.params = params
        self.K = params.k
        self.U = params.U
        self.h = list(params.h_i)
        self.h0 = params.h_i[0]
        self.base_n = [int(v) for v in params.n_i]
        self.base_alpha = [int(v) for v in params.alpha_i]
        self.base_n0 = int(params.n0)
        self.mult = 1
        self.t = 0
        self.layers = [_Layer() for _ in range(self.K + 1)]
        self.frontiers = [None] * self.K   # frontiers[i] = exposure of layer i
        self._init_frontiers()
        self.epoch = 0
        self._memo = {}

    # -- parameter accessors -------------------------------------------------

    def alpha(self, i):
        return self.base_alpha[i] * self.mult

    def n(self, i):
        return self.base_n[i] * self.mult

    @property
    def n0(self):
        return self.base_n0 * self.mult

    # -- geometry -------------------------------------------------------------

    def _init_frontiers(self):
        w0 = 1 << self.h0
        roots = [(lo, lo + w0 - 1, t0_id(0, lo))
                 for lo in range(1, self.U + 1, w0)]
        self.frontiers[0] = SortedList(roots)
        for m in range(1, self.K):
            self._rebuild_roots(m)

    def _rebuild_roots(self, m):
        """Frontier of an empty layer m: the roots of T_m."""
        prev = self.frontiers[m - 1]
        step = 1 << self.h[m]
        sz = len(prev)
        ents = []
        for s0 in range(0, sz, step):
            lo = prev[s0][0]
            hi = prev[min(s0 + step, sz) - 1][1]
            ents.append((lo, hi, up_id(m, 0, s0)))
        self.frontiers[m] = SortedList(ents)

    def _front_index(self, fl, x):
        return fl.bisect_right((x, _BIG, _BIG)) - 1

    def lo_of(self, ref):
        if ref < 0:
            return -ref
        if is_t0(ref):
            return t0_lo(ref)
        return self.frontiers[up_layer(ref) - 1][up_slot(ref)][0]

    def interval_of(self, ref):
        if ref < 0:
            return -ref, -ref
        if is_t0(ref):
            return t0_interval(ref, self.h0)
        j, d, s0 = up_layer(ref), up_depth(ref), up_slot(ref)
        fl = self.frontiers[j - 1]
        end = min(s0 + (1 << (self.h[j] - d)), len(fl)) - 1
        return fl[s0][0], fl[end][1]

    def children_entries(self, ref):
        """Children of a node as (lo, hi, ref) frontier-style entries."""
        if is_t0(ref):
            return t0_children(ref, self.h0)
        j, d, s0 = up_layer(ref), up_depth(ref), up_slot(ref)
        fl = self.frontiers[j - 1]
        m = len(fl)
        hj = self.h[j]
        if d == hj - 1:
            return [tuple(fl[s]) for s in (s0, s0 + 1) if s < m]
        cw = 1 << (hj - d - 1)
        out = []
        for cs in (s0, s0 + cw):
            if cs < m:
                lo = fl[cs][0]
                hi = fl[min(cs + cw, m) - 1][1]
                out.append((lo, hi, up_id(j, d + 1, cs)))
        return out

    def _child_containing(self, ref, x):
        if is_t0(ref):
            return t0_child_containing(ref, x, self.h0)
        j, d, s0 = up_layer(ref), up_depth(ref), up_slot(ref)
        fl = self.frontiers[j - 1]
        s = self._front_index(fl, x)
        if d == self.h[j] - 1:
            return fl[s][2]
        cw = 1 << (self.h[j] - d - 1)
        return up_id(j, d + 1, (s >> (self.h[j] - d - 1)) << (self.h[j] - d - 1))

    def parent_of(self, li, ref):
        """Parent of ``ref`` within the geometry of layer li."""
        while True:
            if ref < 0:
                x = -ref
                if li == 0:
                    return chain_parent_t0(x, self.h0)
                fl = self.frontiers[li - 1]
                s = self._front_index(fl, x)
                if fl[s][2] == ref:
                    return up_id(li, self.h[li] - 1, s & ~1)
                li -= 1
                continue
            if not is_t0(ref) and up_layer(ref) == li:
                d = up_depth(ref)
                if d == 0:
                    return None
                shift = self.h[li] - d + 1
                return up_id(li, d - 1, (up_slot(ref) >> shift) << shift)
            if li == 0:
                return t0_parent(ref, self.h0)
            fl = self.frontiers[li - 1]
            s = self._front_index(fl, self.lo_of(ref))
            if fl[s][2] == ref:
                return up_id(li, self.h[li] - 1, s & ~1)
            li -= 1

    def _topo_key(self, ref):
        """Sort key placing ancestors strictly before descendants."""
        if ref < 0:
            return (2, 0, -ref)
        if is_t0(ref):
            return (1, t0_depth(ref), t0_lo(ref))
        return (-up_layer(ref), up_depth(ref), up_slot(ref))

    # -- insertion -------------------------------------------------------------

    def _find_exposed(self, li, x):
        """Ref of the highest non-full node of layer li containing x."""
        layer = self.layers[li]
        A = self.alpha(li)
        if li == 0:
            ref = t0_root(x, self.h0)
        else:
            fl = self.frontiers[li - 1]
            s = self._front_index(fl, x)
            hl = self.h[li]
            for d in range(hl):
                s0 = (s >> (hl - d)) << (hl - d)
                nid = up_id(li, d, s0)
                if layer.w.get(nid, 0) < A:
                    return nid
            ref = fl[s][2]
        while ref > 0 and layer.w.get(ref, 0) >= A:
            ref = self._child_containing(ref, x)
        return ref

    def _exposed_k(self, x):
        ref = self._memo.get(x)
        if ref is not None:
            if ref < 0:
                return ref
            layer = self.layers[self.K]
            A = self.alpha(self.K)
            if layer.w.get(ref, 0) < A:
                return ref
            while ref > 0 and layer.w.get(ref, 0) >= A:
                ref = self._child_containing(ref, x)
        else:
            ref = self._find_exposed(self.K, x)
        self._memo[x] = ref
        return ref

    def insert_units(self, x, units):
        """Insert ``units`` copies of x, firing merges and doublings exactly
        as the same number of unit inserts would."""
        check_element(x, self.U)
        K = self.K
        layer = self.layers[K]
        while units > 0:
            A = self.alpha(K)
            nk = self.n(K)
            to_event = nk - (self.t % nk)
            ref = self._exposed_k(x)
            if ref < 0:
                rec = layer.chains.get(x)
                if rec is None:
                    rec = layer.chains[x] = [0, 0]
                space = A - rec[1]
            else:
                cur = layer.w.get(ref, 0)
                space = A - cur
            take = min(units, space, to_event)
            if ref < 0:
                rec[1] += take
                if rec[1] == A:
                    rec[0] += 1
                    rec[1] = 0
            else:
                layer.w[ref] = cur + take
            layer.total += take
            self.t += take
            units -= take
            if self.t % nk == 0:
                self._cascade()
                if self.t == self.n0:
                    self.double()

    # -- merge cascade ----------------------------------------------------------

    def _cascade(self):
        t = self.t
        j = None
        for i in range(self.K, 0, -1):
            if t % self.n(i) == 0:
                j = i
            else:
                break
        if j is None:
            return
        for i in range(self.K, j - 1, -1):
            self.merge(i, edit_frontier=(i == j))
        for m in range(j, self.K):
            self._rebuild_roots(m)
        self.epoch += 1
        self._memo.clear()

    def merge(self, i, edit_frontier=True, allow_discard=False, sink=None):
        """Merge layer i into layer i-1 (move, compress, round), clear i."""
        src = self.layers[i]
        inc_scat = {}
        inc_chain = {}
        fl = self.frontiers[i - 1]
        a_src = self.alpha(i)
        h_i = self.h[i]
        for nid, wv in src.w.items():
            if not is_t0(nid) and up_layer(nid) == i:
                ent = fl[up_slot(nid)]   # leftmost base descendant's slot
                tgt = ent[2]
                if tgt < 0:
                    x = -tgt
                    inc_chain[x] = inc_chain.get(x, 0) + wv
                    continue
                nid = tgt
            inc_scat[nid] = inc_scat.get(nid, 0) + wv
        for x, (nf, pw) in src.chains.items():
            add = nf * a_src + pw
            inc_chain[x] = inc_chain.get(x, 0) + add
        src.w = {}
        src.chains = {}
        src.total = 0
        return self._settle(i - 1, inc_scat, inc_chain,
                            edit_frontier=edit_frontier,
                            allow_discard=allow_discard, sink=sink)

    def _settle(self, li, inc_scat, inc_chain, edit_frontier,
                allow_discard=False, sink=None):
        """Compress then round incoming weight into layer li."""
        layer = self.layers[li]
        A = self.alpha(li)
        T = {}
        for nid, wv in inc_scat.items():
            if wv:
                if nid in layer.w:
                    raise ContractViolation("incoming weight on occupied node")
                if wv > A:
                    raise ContractViolation("incoming weight exceeds capacity")
                T[nid] = wv
        CH = {}
        for x, add in inc_chain.items():
            if not add:
                continue
            rec = layer.chains.pop(x, None)
            base = rec[0] * A + rec[1] if rec else 0
            CH[x] = base + add
            layer.total -= base
        incoming_total = sum(T.values()) + sum(CH.values())

        # Compress: repeated deepest-first passes, each node moving the
        # maximum transferable amount into its parent, until fixpoint.
        passes = 0
        while True:
            moved = False
            work = sorted(
                [r for r, w in T.items() if w > 0] +
                [-x for x, w in CH.items() if w > 0],
                key=self._topo_key, reverse=True)
            for ref in work:
                wv = CH[-ref] if ref < 0 else T.get(ref, 0)
                if wv <= 0:
                    continue
                p = self.parent_of(li, ref)
                if p is None:
                    continue
                room = A - layer.w.get(p, 0) - T.get(p, 0)
                if room > 0:
                    mv = min(wv, room)
                    if ref < 0:
                        CH[-ref] -= mv
                    else:
                        T[ref] -= mv
                    T[p] = T.get(p, 0) + mv
                    moved = True
            passes += 1
            if not moved:
                break
            if passes > _MAX_COMPRESS_PASSES:
                raise ContractViolation("compress did not converge")

        # Round the leftover partials, left to right.
        partials = []
        for ref, wv in T.items():
            if 0 < wv < A:
                partials.append((self.lo_of(ref), ref, wv))
        for x, wv in CH.items():
            rem = wv % A
            if rem:
                partials.append((x, -x, rem))
        partials.sort()
        decisions, excess = round_partials(
            [(lo, w) for lo, _, w in partials], A, allow_discard)
        discarded = 0
        if excess:
            # attribute discarded units to zeroed partials, rightmost first
            left = excess
            for (lo, ref, wv), full in zip(reversed(partials),
                                           list(reversed(decisions))):
                if left == 0:
                    break
                if not full:
                    take = min(wv, left)
                    sink.append((lo, take))
                    left -= take
            if left:
                sink.append((partials[-1][0], left))
                left = 0
            discarded = excess

        new_fulls = []
        for ref, wv in T.items():
            if wv == A:
                layer.w[ref] = A
                new_fulls.append(ref)
        for (lo, ref, wv), full in zip(partials, decisions):
            if full:
                if ref < 0:
                    CH[-ref] += A - wv
                else:
                    layer.w[ref] = A
                    new_fulls.append(ref)
            else:
                if ref < 0:
                    CH[-ref] -= wv
        for x, wv in CH.items():
            assert wv % A == 0
            if wv:
                layer.chains[x] = [wv // A, 0]
        layer.total += incoming_total - discarded
        self.t -= discarded

        if edit_frontier and new_fulls:
            self._apply_frontier_edits(li, new_fulls)
        return new_fulls

    def _apply_frontier_edits(self, li, new_fulls):
        fl = self.frontiers[li]
        for ref in sorted(new_fulls, key=self._topo_key):
            lo, hi = self.interval_of(ref)
            fl.remove((lo, hi, ref))
            for ent in self.children_entries(ref):
                fl.add(ent)

    def _root_entries(self, li):
        if li == 0:
            w0 = 1 << self.h0
            return [(lo, lo + w0 - 1, t0_id(0, lo))
                    for lo in range(1, self.U + 1, w0)]
        prev = self.frontiers[li - 1]
        step = 1 << self.h[li]
        sz = len(prev)
        out = []
        for s0 in range(0, sz, step):
            out.append((prev[s0][0], prev[min(s0 + step, sz) - 1][1],
                        up_id(li, 0, s0)))
        return out

    def recompute_frontier(self, li):
        """Exposure of layer li from scratch (roots pushed through fulls)."""
        layer = self.layers[li]
        A = self.alpha(li)
        out = []
        stack = list(reversed(self._root_entries(li)))
        while stack:
            ent = stack.pop()
            ref = ent[2]
            if ref > 0 and layer.w.get(ref, 0) >= A:
                stack.extend(reversed(self.children_entries(ref)))
            else:
                out.append(ent)
        self.frontiers[li] = SortedList(out)

    def double(self, allow_discard=False, sink=None):
        """Double n0 (hence every n_i, alpha_i); re-settle layer 0."""
        for i in range(1, self.K + 1):
            if not self.layers[i].is_empty():
                raise ContractViolation("doubling with a populated upper layer")
        old_a = self.alpha(0)
        self.mult *= 2
        layer0 = self.layers[0]
        inc_scat = layer0.w
        inc_chain = {x: nf * old_a + pw
                     for x, (nf, pw) in layer0.chains.items()}
        layer0.w = {}
        layer0.chains = {}
        layer0.total = 0
        self._settle(0, inc_scat, inc_chain, edit_frontier=False,
                     allow_discard=allow_discard, sink=sink)
        self.recompute_frontier(0)
        for m in range(1, self.K):
            self._rebuild_roots(m)
        self.epoch += 1
        self._memo.clear()

    # -- queries ----------------------------------------------------------------

    def rank(self, x):
        """Total weight of nodes whose interval reaches x or below (Rank)."""
        r = 0
        for li, layer in enumerate(self.layers):
            A = self.alpha(li)
            for nid, wv in layer.w.items():
                if self.lo_of(nid) <= x:
                    r += wv
            for cx, (nf, pw) in layer.chains.items():
                if cx <= x:
                    r += nf * A + pw
        return r

    def snapshot(self):
        """Per-structure sorted (lo, cumulative weight) arrays for bulk ranks."""
        los = []
        ws = []
        for li, layer in enumerate(self.layers):
            A = self.alpha(li)
            for nid, wv in layer.w.items():
                los.append(self.lo_of(nid))
                ws.append(wv)
            for cx, (nf, pw) in layer.chains.items():
                los.append(cx)
                ws.append(nf * A + pw)
        if not los:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        los = np.asarray(los, dtype=np.int64)
        ws = np.asarray(ws, dtype=np.int64)
        order = np.argsort(los, kind="stable")
        los = los[order]
        pref = np.cumsum(ws[order])
        return los, pref

    @staticmethod
    def rank_from_snapshot(snap, xs):
        los, pref = snap
        xs = np.asarray(xs, dtype=np.int64)
        if len(los) == 0:
            return np.zeros(len(xs), dtype=np.int64)
        idx = np.searchsorted(los, xs, side="right")
        out = np.zeros(len(xs), dtype=np.int64)
        nz = idx > 0
        out[nz] = pref[idx[nz] - 1]
        return out

    def exposed_entries(self, li):
        """Exposure of layer li, sorted: (lo, hi, ref) triples."""
        if li < self.K:
            return list(self.frontiers[li])
        layer = self.layers[li]
        A = self.alpha(li)
        out = []
        stack = list(reversed(self._root_entries(li)))
        while stack:
            ent = stack.pop()
            ref = ent[2]
            if ref > 0 and layer.w.get(ref, 0) >= A:
                stack.extend(reversed(self.children_entries(ref)))
            else:
                out.append(ent)
        return out

    # -- merge-combination helpers (partial mergeability) ------------------------

    def flush_to_layer0(self, sink):
        """Run every layer merge early (discarding round excess into sink)."""
        for i in range(self.K, 0, -1):
            self.merge(i, edit_frontier=False, allow_discard=True, sink=sink)
        self.epoch += 1
        self._memo.clear()

    def place_units(self, x, units):
        """Eagerly place units at/below the highest non-full layer-0 node
        containing x; no batching events.  Used only while combining two
        flushed structures."""
        layer = self.layers[0]
        A = self.alpha(0)
        while units > 0:
            ref = self._find_exposed(0, x)
            if ref < 0:
                rec = layer.chains.get(-ref)
                if rec is None:
                    rec = layer.chains[-ref] = [0, 0]
                space = A - rec[1]
                take = min(units, space)
                rec[1] += take
                if rec[1] == A:
                    rec[0] += 1
                    rec[1] = 0
            else:
                cur = layer.w.get(ref, 0)
                take = min(units, A - cur)
                layer.w[ref] = cur + take
            layer.total += take
            self.t += take
            units -= take

    def resettle_layer0(self, sink):
        """Compress + round the whole of layer 0 (after combination)."""
        layer0 = self.layers[0]
        A = self.alpha(0)
        inc_scat = layer0.w
        inc_chain = {x: nf * A + pw for x, (nf, pw) in layer0.chains.items()}
        layer0.w = {}
        layer0.chains = {}
        layer0.total = 0
        self._settle(0, inc_scat, inc_chain, edit_frontier=False,
                     allow_discard=True, sink=sink)

    def finish_combine(self):
        self.recompute_frontier(0)
        for m in range(1, self.K):
            self._rebuild_roots(m)
        self.epoch += 1
        self._memo.clear()

    def total_weight(self):
        return sum(layer.total for layer in self.layers)


def merge_cores(a, b):
    """Partial merge of two flushable cores with identical parameters.

    Returns the merged core (a, mutated) and the list of placeholder units
    (value, count) that must be re-inserted by the caller.
    """
    if a.params.eps != b.params.eps or a.params.U != b.params.U:
        raise ContractViolation("merging sketches with different parameters")
    sink = []
    a.flush_to_layer0(sink_a := [])
    b.flush_to_layer0(sink_b := [])
    sink.extend(sink_a)
    sink.extend(sink_b)
    if b.mult > a.mult:
        a, b = b, a
    # eagerly re-place b's layer-0 weight into a, top-down
    items = []
    layer_b = b.layers[0]
    for nid, wv in layer_b.w.items():
        items.append((b._topo_key(nid), b.lo_of(nid), wv))
    ab = b.alpha(0)
    for x, (nf, pw) in layer_b.chains.items():
        items.append(((2, 0, x), x, nf * ab + pw))
    items.sort()
    for _, lo, wv in items:
        a.place_units(lo, wv)
    a.resettle_layer0(sink)
    while a.t >= a.n0:
        a.double(allow_discard=True, sink=sink)
    a.finish_combine()
    return a, sink


class QuantileSketch:
    """Composite sketch with exact, replicated, and main query regimes."""

    def __init__(self, eps, U, debug_invariants=None):
        self.U_user = int(U)
        base = derive_params(Fraction(eps), U, 1)
        self.params = base.with_n0(n_star_of(base.eps, base.U))
        self.eps = self.params.eps
        self.inv_eps = int(1 / self.eps)
        self.n_star = self.params.n_star
        self.aux_factor = int(self.eps * self.n_star)
        self.core = LayeredCore(self.params)
        self.aux = LayeredCore(self.params)
        self.buffer = []
        self.t = 0
        if debug_invariants is None:
            debug_invariants = os.environ.get("QSK_DEBUG_INVARIANTS") == "1"
        self.debug_invariants = debug_invariants

    # -- updates ---------------------------------------------------------------

    def insert(self, x):
        x = int(x)
        check_element(x, self.U_user)
        self.t += 1
        self.core.insert_units(x, 1)
        if self.aux is not None:
            self.aux.insert_units(x, self.aux_factor)
            if self.t >= self.n_star:
                self.aux = None
        if self.buffer is not None:
            self.buffer.append(x)
            if self.t >= self.inv_eps:
                self.buffer = None
        if self.debug_invariants:
            from .invariants import check_after_insert
            check_after_insert(self, x)

    def extend(self, xs):
        for x in xs:
            self.insert(x)

    # -- queries ---------------------------------------------------------------

    def _regime(self):
        if self.t < self.inv_eps:
            return "exact"
        if self.t < self.n_star:
            return "replicated"
        return "main"

    def rank(self, x):
        x = int(x)
        check_element(x, self.U_user)
        reg = self._regime()
        if reg == "exact":
            return sum(1 for v in self.buffer if v <= x)
        if reg == "replicated":
            return self.aux.rank(x) // self.aux_factor
        return self.core.rank(x)

    def rank_many(self, xs):
        xs = np.asarray(xs, dtype=np.int64)
        reg = self._regime()
        if reg == "exact":
            buf = np.sort(np.asarray(self.buffer, dtype=np.int64))
            return np.searchsorted(buf, xs, side="right").astype(np.int64)
        if reg == "replicated":
            snap = self.aux.snapshot()
            return LayeredCore.rank_from_snapshot(snap, xs) // self.aux_factor
        snap = self.core.snapshot()
        return LayeredCore.rank_from_snapshot(snap, xs)

    def quantile(self, r):
        """Smallest x with rank(x) >= r."""
        if not (0 <= r <= self.t):
            raise DomainError(f"rank {r} outside [0, {self.t}]")
        if r == 0:
            return 1
        reg = self._regime()
        if reg == "exact":
            buf = sorted(self.buffer)
            return buf[r - 1]
        if reg == "replicated":
            snap = self.aux.snapshot()
            scale = self.aux_factor
        else:
            snap = self.core.snapshot()
            scale = 1
        lo, hi = 1, self.U_user
        while lo < hi:
            mid = (lo + hi) // 2
            rv = int(LayeredCore.rank_from_snapshot(snap, [mid])[0]) // scale
            if rv >= r:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def exposed_nodes(self, i):
        """Exposure of layer i of the main structure, with interval labels."""
        return self.core.exposed_entries(i)

    # -- merging ---------------------------------------------------------------

    @staticmethod
    def merge(a, b):
        """Combine two sketches over the same (eps, U); consumes both."""
        if a.params.eps != b.params.eps or a.params.U != b.params.U:
            raise ContractViolation("merging sketches with different parameters")
        if b.t > a.t:
            a, b = b, a
        if b.t == 0:
            return a
        if b.t < b.inv_eps:
            for x in b.buffer:
                a.insert(x)
            return a
        total = a.t + b.t
        merged_core, ph = merge_cores(a.core, b.core)
        a.core = merged_core
        for val, cnt in ph:
            a.core.insert_units(val, cnt)
        if total >= a.n_star:
            a.aux = None
        else:
            merged_aux, pha = merge_cores(a.aux, b.aux)
            a.aux = merged_aux
            for val, cnt in pha:
                a.aux.insert_units(val, cnt)
        a.buffer = None
        a.t = total
        if a.core.t != total:
            raise ContractViolation("weight not conserved by merge")
        return a
