"""Structural invariant scans, enabled via QSK_DEBUG_INVARIANTS=1.

Fast O(1)-ish spot checks run after every insert; full structural scans run
after every merge-bearing insert and periodically in between, so a violation
is caught at (or within a few operations of) the step that introduced it.
"""

from .core import ContractViolation


def scan_core(core, probes=(), full=True):
    """Raise ContractViolation on any broken structural invariant."""
    # conservation
    total = core.total_weight()
    if total != core.t:
        raise ContractViolation(f"weight {total} != t {core.t}")
    for li, layer in enumerate(core.layers):
        A = core.alpha(li)
        recount = sum(layer.w.values()) + layer.chain_weight(A)
        if recount != layer.total:
            raise ContractViolation(f"layer {li} total drifted")
        for nid, wv in layer.w.items():
            if wv <= 0 or wv > A:
                raise ContractViolation(f"layer {li} weight {wv} outside (0, {A}]")
            if li < core.K and wv != A:
                raise ContractViolation(f"layer {li} partial node {nid}")
        for x, (nf, pw) in layer.chains.items():
            if nf < 0 or pw < 0 or pw >= A:
                raise ContractViolation(f"layer {li} chain {x} malformed")
            if li < core.K and pw:
                raise ContractViolation(f"layer {li} partial chain {x}")
    if not full:
        return
    # upward closure: every weighted node's parent is full (or a root)
    for li, layer in enumerate(core.layers):
        A = core.alpha(li)
        for nid in layer.w:
            p = core.parent_of(li, nid)
            if p is not None and layer.w.get(p, 0) != A:
                raise ContractViolation(
                    f"layer {li}: weighted node under non-full parent")
        for x, (nf, pw) in layer.chains.items():
            if nf or pw:
                p = core.parent_of(li, -x)
                if p is not None and layer.w.get(p, 0) != A:
                    raise ContractViolation(
                        f"layer {li}: chain {x} under non-full parent")
    # exposure lists: disjoint, sorted, covering [1, U]
    for li in range(core.K):
        ents = list(core.frontiers[li])
        if len(ents) > core.params.U_i[li + 1]:
            raise ContractViolation(
                f"|V_{li}| = {len(ents)} exceeds U_{li + 1}")
        _check_cover(ents, core.U, li)
    _check_cover(core.exposed_entries(core.K), core.U, core.K)
    # frontier lists agree with a from-scratch recomputation
    for li in range(core.K):
        saved = core.frontiers[li]
        core.recompute_frontier(li)
        if list(saved) != list(core.frontiers[li]):
            core.frontiers[li] = saved
            raise ContractViolation(f"frontier {li} out of sync")
        core.frontiers[li] = saved
    if probes:
        bad_node_bound(core, probes)


def _check_cover(ents, U, li):
    prev_hi = 0
    for lo, hi, _ in ents:
        if lo != prev_hi + 1:
            raise ContractViolation(
                f"layer {li} exposure gap/overlap at {lo} (prev hi {prev_hi})")
        if hi < lo:
            raise ContractViolation(f"layer {li} empty exposure interval")
        prev_hi = hi
    if prev_hi != U:
        raise ContractViolation(f"layer {li} exposure stops at {prev_hi} != U")


def bad_node_bound(core, probes):
    """Sum of weights of non-singleton nodes containing x stays <= gamma_0*n0."""
    limit = core.params.gamma_i[0] * core.n0
    for x in probes:
        bad = 0
        for li, layer in enumerate(core.layers):
            for nid, wv in layer.w.items():
                lo, hi = core.interval_of(nid)
                if lo <= x <= hi and lo != hi:
                    bad += wv
            # chain nodes are singletons, never bad
        if bad > limit:
            raise ContractViolation(
                f"bad-node weight {bad} exceeds gamma_0*n0 = {limit} at x={x}")


class _AuditState:
    __slots__ = ("ops", "next_full")

    def __init__(self):
        self.ops = 0
        self.next_full = 1


_AUDITS = {}


def check_after_insert(sketch, x):
    """Per-insert hook: cheap checks always, full scans adaptively."""
    st = _AUDITS.setdefault(id(sketch), _AuditState())
    st.ops += 1
    core = sketch.core
    if core.total_weight() != core.t:
        raise ContractViolation("conservation broken after insert")
    if st.ops >= st.next_full:
        probes = (x, 1, core.U)
        scan_core(core, probes=probes, full=True)
        if sketch.aux is not None:
            scan_core(sketch.aux, probes=probes, full=True)
        # rescan interval grows with structure size to keep runs feasible
        ents = sum(len(l.w) + len(l.chains) for l in core.layers)
        st.next_full = st.ops + max(1, ents // 64)
