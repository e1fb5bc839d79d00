"""Packed node identities and dyadic-forest arithmetic.

Every tree node anywhere in the layered structure is named by a single int:

* concrete nodes of the base forest over [1, U]: bit0 = 1, then 6 bits of
  depth, then ``lo - 1`` (the interval's left endpoint);
* upper nodes of a recursive layer j >= 1: bit0 = 0, then 3 bits of layer,
  6 bits of depth, then the leftmost base-slot index.

Nodes of a layer that sit at or below its base level reuse the identity of
the node they correspond to one layer down, so moving weight between layers
is a key-preserving transfer.  Runs of nodes on the infinite unary paths
below a singleton interval [x, x] are not materialized at all; they live in
per-value chain records (count of full positions plus one partial).
"""

T0_DEPTH_BITS = 6
UP_LAYER_BITS = 3
UP_DEPTH_BITS = 6


def t0_id(d, lo):
    return ((lo - 1) << 7) | (d << 1) | 1


def is_t0(nid):
    return nid & 1


def t0_depth(nid):
    return (nid >> 1) & 0x3F


def t0_lo(nid):
    return (nid >> 7) + 1


def up_id(layer, d, slot):
    return (slot << 10) | (d << 4) | (layer << 1)


def up_layer(nid):
    return (nid >> 1) & 0x7


def up_depth(nid):
    return (nid >> 4) & 0x3F


def up_slot(nid):
    return nid >> 10


def t0_root(x, h0):
    """Root id of the base-forest tree containing value x."""
    lo = (((x - 1) >> h0) << h0) + 1
    return t0_id(0, lo)


def t0_interval(nid, h0):
    d = t0_depth(nid)
    lo = t0_lo(nid)
    return lo, lo + (1 << (h0 - d)) - 1


def t0_parent(nid, h0):
    d = t0_depth(nid)
    if d == 0:
        return None
    shift = h0 - d + 1
    plo = (((t0_lo(nid) - 1) >> shift) << shift) + 1
    return t0_id(d - 1, plo)


def t0_children(nid, h0):
    """Children as (lo, hi, ref) entries; singletons become chain refs (-x)."""
    d = t0_depth(nid)
    lo = t0_lo(nid)
    w = 1 << (h0 - d)
    half = w >> 1
    if w == 2:
        return [(lo, lo, -lo), (lo + 1, lo + 1, -(lo + 1))]
    return [(lo, lo + half - 1, t0_id(d + 1, lo)),
            (lo + half, lo + w - 1, t0_id(d + 1, lo + half))]


def t0_child_containing(nid, x, h0):
    d = t0_depth(nid)
    lo = t0_lo(nid)
    w = 1 << (h0 - d)
    if w == 2:
        return -x
    half = w >> 1
    return t0_id(d + 1, lo) if x < lo + half else t0_id(d + 1, lo + half)


def chain_parent_t0(x, h0):
    """Base-forest parent of the chain top [x, x] (the width-2 node above)."""
    plo = x - ((x - 1) & 1)
    return t0_id(h0 - 1, plo)
