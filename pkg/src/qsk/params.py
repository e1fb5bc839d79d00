"""Per-layer numeric parameters of the layered sketch, derived exactly.

Everything here is integer or dyadic-rational arithmetic (``fractions.Fraction``
with power-of-two denominators); there is no floating point in the derivation,
so the divisibility invariants the layer machinery relies on hold exactly.

The derivation occasionally has to inflate the universe: for a handful of
small ``eps*U`` values the layer-1 recurrence bottoms out below a usable tree
depth, and widening the universe (which costs only a constant factor of space)
restores it.  ``ParamSet.inflated`` records when that happened.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import log2

from .core import DomainError, cceil, is_power_of_two, log_star

# Floor on eps*U before any parameters are derived.  Below this the recursion
# has no room at all; see derive_params.
MIN_EPS_U = 1 << 8

# Explicit constants backing the asymptotic parameter facts (g)-(j) on the
# supported grid eps in [2^-10, 2^-2], U in [2^8, 2^40].  Chosen as the
# smallest powers of two that the exact recurrences never exceed (measured
# over the full grid; see tests/test_params.py).
FACT_G_CONST = 512        # U_k <= FACT_G_CONST / eps
FACT_H_CONST = 256        # sum U_1..U_k <= FACT_H_CONST * log2(eps*U) / eps
FACT_I_CONST = 8192       # n_star <= FACT_I_CONST * (log2(eps*U))**2 / eps
FACT_J_CONST = 16         # alpha_{k-1} <= FACT_J_CONST * n0 / n_star


@dataclass(frozen=True)
class ParamSet:
    """All numeric parameters of the layered sketch for one (eps, U, n0)."""

    eps: Fraction
    U: int                      # effective (possibly inflated) universe size
    n0: int
    k: int
    eps_i: tuple                # Fraction per layer, 0..k
    U_i: tuple                  # int per layer
    n_i: tuple                  # int (or Fraction if n0 < n_star) per layer
    alpha_i: tuple              # int (or Fraction) per layer
    h_i: tuple                  # int per layer, depth of the base level
    gamma_i: tuple              # Fraction per layer, tail sums of eps_i
    n_star: int
    U_requested: int = 0        # universe size before rounding/inflation
    inflated: bool = False

    @property
    def num_layers(self):
        return self.k + 1

    def with_n0(self, n0):
        """Same (eps, U) parameters re-derived for a different n0."""
        return derive_params(self.eps, self.U, n0, _u_requested=self.U_requested,
                             _inflated=self.inflated)

    def dump_lines(self):
        """Machine-readable key=value lines describing the full set."""
        out = [
            f"eps={self.eps}",
            f"U={self.U}",
            f"U_requested={self.U_requested}",
            f"inflated={int(self.inflated)}",
            f"n0={self.n0}",
            f"k={self.k}",
            f"n_star={self.n_star}",
        ]
        for i in range(self.num_layers):
            out.append(
                f"layer{i}: eps_i={self.eps_i[i]} U_i={self.U_i[i]} "
                f"n_i={self.n_i[i]} alpha_i={self.alpha_i[i]} "
                f"h_i={self.h_i[i]} gamma_i={self.gamma_i[i]}"
            )
        return out


def _pow2_floor_frac(x):
    """Largest power-of-two Fraction <= x, for 0 < x <= 1."""
    x = Fraction(x)
    c = cceil(x)
    if c == x:
        return x
    return Fraction(c, 2)


def _next_pow2(v):
    v = int(v)
    return 1 << max(0, (v - 1).bit_length())


def _derive_once(eps, U, n0):
    """One pass of the layer recurrences; may yield an invalid set."""
    k = max(1, log_star(eps * U))
    eps_i = [eps / 8] + [eps / (1 << (k - i + 4)) for i in range(1, k + 1)]
    U_i = [U]
    h_i = []
    n_i = [Fraction(n0)]
    alpha_i = []
    ok = True
    for i in range(k + 1):
        prod = eps_i[i] * U_i[i]
        if prod < 2 or not is_power_of_two(prod):
            ok = False
            break
        h = int(log2(prod))
        h_i.append(h)
        alpha_i.append(eps_i[i] * n_i[i] / cceil(h + 1))
        if i < k:
            U_i.append(int(cceil(Fraction(1, 1) / eps_i[i] + n_i[i] / alpha_i[i])))
            n_i.append(alpha_i[i] / eps_i[i + 1])
    if not ok:
        return None
    gamma = []
    acc = Fraction(0)
    for i in range(k, -1, -1):
        acc += eps_i[i]
        gamma.append(acc)
    gamma.reverse()
    n_star_val = Fraction(n0) / alpha_i[k]
    return k, eps_i, U_i, n_i, alpha_i, h_i, gamma, n_star_val


def _as_int_if_whole(v):
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v)
    return v


def derive_params(eps, U, n0, _u_requested=None, _inflated=None):
    """Derive the full ParamSet from (eps, U, n0).

    eps is rounded down and U, n0 up to powers of two.  If the recurrences
    leave any layer with eps_i*U_i < 2 (possible for a few small eps*U
    values), U is doubled until every layer has a positive base depth; the
    result is flagged ``inflated``.
    """
    eps = Fraction(eps)
    if not (0 < eps <= Fraction(1, 2)):
        raise DomainError("eps must be in (0, 1/2]")
    if U < 2:
        raise DomainError("U must be at least 2")
    if n0 < 1:
        raise DomainError("n0 must be at least 1")
    u_req = _u_requested if _u_requested is not None else int(U)
    eps = _pow2_floor_frac(eps)
    U_eff = _next_pow2(U)
    n0 = _next_pow2(n0)
    inflated = bool(_inflated) if _inflated is not None else False
    if eps * U_eff < MIN_EPS_U:
        U_eff = int(cceil(Fraction(MIN_EPS_U) / eps))
        inflated = True
    res = _derive_once(eps, U_eff, n0)
    while res is None:
        U_eff *= 2
        inflated = True
        res = _derive_once(eps, U_eff, n0)
    k, eps_i, U_i, n_i, alpha_i, h_i, gamma, n_star_val = res
    return ParamSet(
        eps=eps,
        U=U_eff,
        n0=n0,
        k=k,
        eps_i=tuple(eps_i),
        U_i=tuple(U_i),
        n_i=tuple(_as_int_if_whole(v) for v in n_i),
        alpha_i=tuple(_as_int_if_whole(v) for v in alpha_i),
        h_i=tuple(h_i),
        gamma_i=tuple(gamma),
        n_star=int(n_star_val),
        U_requested=u_req,
        inflated=inflated,
    )


def n_star(eps, U):
    """Threshold stream length above which every capacity is >= 1.

    Closed form: product of cceil(h_i + 1) over layers, divided by eps_0.
    Independent of n0, since alpha_k scales linearly in n0.
    """
    p = derive_params(eps, U, 1)
    prod = 1
    for h in p.h_i:
        prod *= cceil(h + 1)
    val = Fraction(prod) / p.eps_i[0]
    assert val.denominator == 1
    return int(val)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def validate_params(p):
    """Evaluate every parameter fact; returns a list of named check results.

    Failures are report entries, never exceptions, so a tampered ParamSet can
    be probed.  Asymptotic facts are instantiated with the explicit constants
    pinned at module top.
    """
    checks = []

    def add(name, passed, detail=""):
        checks.append(CheckResult(name, bool(passed), detail))

    pow_ok, witness = True, ""
    for label, seq in (("eps_i", p.eps_i), ("U_i", p.U_i),
                       ("n_i", p.n_i), ("alpha_i", p.alpha_i)):
        for i, v in enumerate(seq):
            if not is_power_of_two(v):
                pow_ok, witness = False, f"{label}[{i}]={v}"
                break
        if not pow_ok:
            break
    if pow_ok and not (is_power_of_two(p.eps) and is_power_of_two(p.U)
                       and is_power_of_two(p.n0)):
        pow_ok, witness = False, "global eps/U/n0"
    add("a_powers_of_two", pow_ok, witness)

    bad = next((i for i in range(p.num_layers)
                if p.eps_i[i] * p.U_i[i] < 2), None)
    add("b_eps_U_at_least_2", bad is None, "" if bad is None else f"layer {bad}")

    bad = next((i for i in range(p.k)
                if Fraction(p.n_i[i]) % Fraction(p.n_i[i + 1]) != 0), None)
    add("c_n_divides", bad is None, "" if bad is None else f"layer {bad}")

    bad = next((i for i in range(p.k)
                if Fraction(p.alpha_i[i + 1]) != Fraction(p.alpha_i[i]) / cceil(p.h_i[i + 1] + 1)),
               None)
    add("d_alpha_recurrence", bad is None, "" if bad is None else f"layer {bad}")

    if p.n0 >= p.n_star:
        bad = next((i for i in range(p.num_layers)
                    if Fraction(p.n_i[i]).denominator != 1
                    or Fraction(p.alpha_i[i]).denominator != 1
                    or p.n_i[i] < 1 or p.alpha_i[i] < 1), None)
        add("e_integral_capacities", bad is None,
            "" if bad is None else f"layer {bad}")
    else:
        add("e_integral_capacities", True, "vacuous: n0 < n_star")

    f_ok = p.gamma_i[0] <= p.eps / 4 and all(
        p.gamma_i[i] <= p.eps / 8 for i in range(1, p.num_layers))
    add("f_gamma_bounds", f_ok,
        "" if f_ok else f"gamma_0={p.gamma_i[0]} eps={p.eps}")

    add("g_last_universe", p.U_i[p.k] <= FACT_G_CONST / p.eps,
        f"U_k={p.U_i[p.k]}")

    total_u = sum(p.U_i[1:])
    bound_h = FACT_H_CONST * log2(p.eps * p.U) / p.eps
    add("h_total_universe", total_u <= bound_h,
        f"sum={total_u} bound={bound_h:.0f}")

    lo_ok = p.n_star >= 1 / p.eps
    hi_ok = p.n_star <= FACT_I_CONST * (log2(p.eps * p.U) ** 2) / p.eps
    add("i_n_star_range", lo_ok and hi_ok, f"n_star={p.n_star}")

    add("j_alpha_km1", Fraction(p.alpha_i[p.k - 1]) <= FACT_J_CONST * Fraction(p.n0, p.n_star),
        f"alpha_km1={p.alpha_i[p.k - 1]}")

    bad = next((i for i in range(1, p.num_layers)
                if Fraction(p.n_i[i]) % Fraction(p.alpha_i[i - 1]) != 0), None)
    add("round_integrality", bad is None,
        "" if bad is None else f"layer {bad}")

    return checks
