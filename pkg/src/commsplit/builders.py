"""Recursive constructions of commutator product formulas.

Two-operator formulas approximate ``exp([A,B] t^(k+1))`` from exponentials of
``A t`` (slot 1, ``tpow=1``) and ``B t^k`` (slot 0, ``tpow=k``).  Nested
formulas are fully flattened over slots ``0..k`` (``A_0`` innermost).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

from .formula_ir import (
    ExpTerm,
    ProductFormula,
    concat,
    invert,
    make_formula,
    scale,
    simplify,
    time_scale,
)

A_SLOT, B_SLOT = 1, 0


class ConstructionUnverified(RuntimeError):
    """A formula whose coefficients could not be confirmed by an order scan."""


def _two_p(p) -> int:
    """``2p`` as an exact integer; ``p`` must be a positive multiple of 1/2."""
    p2 = Fraction(p).limit_denominator(1000) * 2
    if p2.denominator != 1 or abs(float(p2) - 2 * float(p)) > 1e-12 or p2 < 1:
        raise ValueError(f"order parameter must be a positive multiple of 1/2, got {p}")
    return int(p2)


@dataclass(frozen=True)
class OddSchedule:
    p: int
    k: int
    r_p: float
    beta_p: float
    gamma_p: float

    def root_residual(self) -> float:
        m = 2 * self.p + self.k + 1
        return abs(4 * self.gamma_p**m - 2 * self.beta_p**m)


@dataclass(frozen=True)
class EvenSchedule:
    p: float
    k: int
    s_p: float
    mu_p: float
    nu_p: float

    def root_residual(self) -> float:
        m = 2 * self.p + self.k + 1
        return abs(4 * self.nu_p**m - self.mu_p**m)


def coeff_odd(p: int, k: int) -> OddSchedule:
    """Step sizes for the odd-k six-copy recursion at order parameter ``p``."""
    if p < 1 or int(p) != p:
        raise ValueError(f"p must be a positive integer, got {p}")
    if k < 1 or k % 2 == 0:
        raise ValueError(f"k must be an odd positive integer, got {k}")
    e = 2.0 ** ((k + 1) / (2 * p + k + 1))
    r = e / (4 * (2 - e))
    return OddSchedule(int(p), k, r, (2 * r) ** (1 / (k + 1)), (0.25 + r) ** (1 / (k + 1)))


def coeff_even(p, k: int) -> EvenSchedule:
    """Step sizes for the five-copy recursion; ``p`` may be a half-integer."""
    p2 = _two_p(p)
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    e = 4.0 ** ((k + 1) / (p2 + k + 1))
    s = e / (4 * (4 - e))
    return EvenSchedule(p2 / 2, k, s, (4 * s) ** (1 / (k + 1)), (0.25 + s) ** (1 / (k + 1)))


def _arg_scale(f: ProductFormula, lam: float, k: int) -> ProductFormula:
    """``U(A lam t, B (lam t)^k)`` for a two-slot formula."""
    return scale(f, {A_SLOT: lam, B_SLOT: lam**k})


def build_odd(p: int, k: int) -> ProductFormula:
    """Group commutator refined ``p-1`` times by the six-copy odd-k recursion.

    ``4 * 6**(p-1)`` terms; symmetric for odd ``p``, antisymmetric for even ``p``.
    """
    if p < 1 or int(p) != p:
        raise ValueError(f"p must be a positive integer, got {p}")
    if k < 1 or k % 2 == 0:
        raise ValueError(f"k must be an odd positive integer, got {k}")
    u = make_formula(
        [(A_SLOT, 1.0, 1), (B_SLOT, 1.0, k), (A_SLOT, -1.0, 1), (B_SLOT, -1.0, k)],
        k=k, p2=2, nu=k + 2, symmetry="symmetric",
    )
    for q in range(1, int(p)):
        sched = coeff_odd(q, k)
        g, b = sched.gamma_p, sched.beta_p
        plus_g = _arg_scale(u, g, k)
        minus_g = _arg_scale(u, -g, k)
        inv_b = invert(_arg_scale(u, b, k))
        inv_mb = invert(_arg_scale(u, -b, k))
        nu = 2 * (q + 1) + 1 if k == 1 else 2 * (q + 1) + k + 1
        flipped = "antisymmetric" if u.symmetry == "symmetric" else "symmetric"
        u = concat(plus_g, minus_g, inv_b, inv_mb, plus_g, minus_g, nu=nu, p2=2 * (q + 1), symmetry=flipped)
    return u


def build_odd_symmetrized(p: int) -> ProductFormula:
    """``U_p(A t/sqrt2, B t/sqrt2) U_p(-A t/sqrt2, -B t/sqrt2)`` for ``k=1``: order ``2p+2``."""
    u = build_odd(p, 1)
    h = 1 / math.sqrt(2)
    return concat(
        scale(u, {A_SLOT: h, B_SLOT: h}),
        scale(u, {A_SLOT: -h, B_SLOT: -h}),
        nu=2 * p + 2, p2=2 * p, symmetry="none",
    )


def even_base(k: int) -> ProductFormula:
    xi = 2.0 ** (-1 / (1 + k))
    return make_formula(
        [(A_SLOT, xi, 1), (B_SLOT, xi**k, k), (A_SLOT, -2 * xi, 1), (B_SLOT, -(xi**k), k), (A_SLOT, xi, 1)],
        k=k, p2=2, nu=k + 3,
    )


def build_even(p: int, k: int, merge: bool = True) -> ProductFormula:
    """Five-term base refined ``p-1`` times by ``V(nu)^2 V(-A mu) V(nu)^2``.

    With ``merge=False`` adjacent same-operator exponentials are kept apart and
    the result has exactly ``5**p`` terms.
    """
    if p < 1 or int(p) != p:
        raise ValueError(f"p must be a positive integer, got {p}")
    if k < 2 or k % 2:
        raise ValueError(f"k must be an even integer >= 2, got {k}")
    v = even_base(k)
    for q in range(1, int(p)):
        sched = coeff_even(q, k)
        outer = scale(v, {A_SLOT: sched.nu_p, B_SLOT: sched.nu_p**k})
        middle = scale(v, {A_SLOT: -sched.mu_p, B_SLOT: sched.mu_p**k})
        v = concat(outer, outer, middle, outer, outer, nu=2 * (q + 1) + k + 1, p2=2 * (q + 1))
        if merge:
            v = simplify(v)
    return v


def even_raw_count(p: int) -> int:
    return 5**p


def build_nested(p: int, k: int) -> ProductFormula:
    """Flattened formula for ``exp(Z_k t^(k+1))`` from alternating odd/even recursions.

    The outer level is ``build_odd(p, q)`` or ``build_even(p, q)`` in ``A_q`` and
    ``Z_{q-1}``; each ``exp(c Z_{q-1} t^q)`` is replaced by the level ``q-1``
    formula at time ``|c|^(1/q) t`` (signed root for odd ``q``; for even ``q``
    a negative ``c`` takes the inverse).  Level 1 is the symmetrized group
    commutator formula.
    """
    if p < 1 or int(p) != p:
        raise ValueError(f"p must be a positive integer, got {p}")
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    sub = build_odd_symmetrized(p)
    for q in range(2, k + 1):
        outer = build_odd(p, q) if q % 2 else build_even(p, q, merge=False)
        terms: list[ExpTerm] = []
        for t in outer.terms:
            if t.slot == A_SLOT:
                terms.append(ExpTerm(q, t.coeff, 1))
                continue
            mag = abs(t.coeff) ** (1 / q)
            if q % 2:
                piece = time_scale(sub, math.copysign(mag, t.coeff))
            elif t.coeff > 0:
                piece = time_scale(sub, mag)
            else:
                piece = invert(time_scale(sub, mag))
            terms.extend(piece.terms)
        sub = ProductFormula(k=q, p2=2 * p, terms=tuple(terms), nu=min(outer.nu, sub.nu + 1))
    return sub


def nested_count(p: int, k: int) -> int:
    """Term count of ``build_nested(p, k)`` from the count recurrence."""
    n = 8 * 6 ** (p - 1)
    for q in range(2, k + 1):
        n = 5 ** (p - 1) * (3 + 2 * n) if q % 2 == 0 else 2 * 6 ** (p - 1) * (1 + n)
    return n


def _gc_terms(k: int) -> tuple[ExpTerm, ...]:
    terms: tuple[ExpTerm, ...] = (ExpTerm(0, 1.0, 1),)
    for q in range(1, k + 1):
        inverse = tuple(ExpTerm(t.slot, -t.coeff, 1) for t in reversed(terms))
        terms = (ExpTerm(q, 1.0, 1),) + terms + (ExpTerm(q, -1.0, 1),) + inverse
    return terms


def build_gc_base(k: int) -> ProductFormula:
    """Group-commutator tower: ``e^{A_k t} G_{k-1} e^{-A_k t} G_{k-1}^{-1}``, ``3*2^k-2`` terms."""
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    return ProductFormula(k=k, p2=1, terms=_gc_terms(k), nu=k + 2)


def gc_count(k: int) -> int:
    return 3 * 2**k - 2


def refine_generic(w: ProductFormula) -> ProductFormula:
    """One application of ``W(nu t)^2 W(mu t)^{-1} W(nu t)^2``; raises the order by one.

    The schedule is taken at the current order parameter ``p = (nu - k - 1)/2``.
    """
    sched = coeff_even(Fraction(w.nu - w.k - 1, 2), w.k)
    outer = time_scale(w, sched.nu_p)
    middle = invert(time_scale(w, sched.mu_p))
    return concat(outer, outer, middle, outer, outer, nu=w.nu + 1, p2=w.p2 + 1)


def build_nestgc(p2: int, k: int) -> ProductFormula:
    """Group-commutator tower refined ``p2-1`` times; ``5**(p2-1) * (3*2^k-2)`` terms."""
    if p2 < 1:
        raise ValueError(f"p2 must be >= 1, got {p2}")
    w = build_gc_base(k)
    for _ in range(p2 - 1):
        w = refine_generic(w)
    return w


BGC_PATTERN = (-1.0, -1.0, 1.0, 1.0, 1.0, -1.0, -1.0, 1.0)


def bgc_base() -> ProductFormula:
    """The eight-exponential sequence for ``exp(i[A,[A,B]] t^3)``.

    Slots hold ``iA`` (slot 1) and ``iB`` (slot 0), so the sequence reads
    ``e^{-iAt} e^{-iBt} e^{iAt} e^{iBt} e^{iAt} e^{-iBt} e^{-iAt} e^{iBt}``; in
    terms of the slot matrices the target is ``exp(-[M1,[M1,M0]] t^3)``.
    """
    slots = (A_SLOT, B_SLOT) * 4
    return ProductFormula(
        k=2, p2=1, terms=tuple(ExpTerm(s, c, 1) for s, c in zip(slots, BGC_PATTERN)),
        nu=4, target_slots=(A_SLOT, A_SLOT, B_SLOT), target_sign=-1,
    )


def build_bgc(p2: int, pauli_bonus: bool = False) -> ProductFormula:
    """BGC sequence refined by the generic five-copy recursion.

    Generic operators: the base has order 4 (``p2=1``) and each refinement adds
    one.  When ``[A,[B,[B,A]]] = 0`` (Pauli operators) the base is already order
    5; ``pauli_bonus=True`` labels it ``p2=2`` and starts refining from there,
    saving one five-fold expansion.
    """
    if p2 < 1:
        raise ValueError(f"p2 must be >= 1, got {p2}")
    w = bgc_base()
    if pauli_bonus:
        if p2 < 2:
            raise ValueError("with the Pauli bonus the lowest order is p2=2")
        w = replace(w, nu=5, p2=2)
    while w.p2 < p2:
        w = refine_generic(w)
    return w


def jk_schedule(nu: int, k: int) -> tuple[float, float]:
    """``(alpha, beta)`` with ``2 a^(k+1) - b^(k+1) = 1`` and ``2 a^nu - b^nu = 0``."""
    alpha = (1 / (2 - 2 ** ((k + 1) / nu))) ** (1 / (k + 1))
    return alpha, 2 ** (1 / nu) * alpha


def build_jk(p2: int, k: int, verify: bool = True, seed: int = 7) -> ProductFormula:
    """Experimental three-copy comparator ``W(a t) W(b t)^{-1} W(a t)``.

    A reconstruction of the ternary scheme the five-copy recursion is compared
    against: ``3**(p2-1) * (3*2^k-2)`` terms.  With ``verify=True`` the result
    is order-scanned on random anti-Hermitian operators and rejected with
    ``ConstructionUnverified`` if the fitted order falls short by more than 0.5.
    """
    if p2 < 1:
        raise ValueError(f"p2 must be >= 1, got {p2}")
    w = build_gc_base(k)
    for _ in range(p2 - 1):
        alpha, beta = jk_schedule(w.nu, k)
        outer = time_scale(w, alpha)
        w = concat(outer, invert(time_scale(w, beta)), outer, nu=w.nu + 1, p2=w.p2 + 1)
    if verify:
        from .evaluator import verify_order

        slope = verify_order(w, seed=seed)
        if slope < w.nu - 0.5:
            raise ConstructionUnverified(
                f"JK formula p2={p2}, k={k}: fitted order {slope:.2f} below claimed {w.nu}"
            )
    return w


FAMILIES = ("odd", "odd-sym", "even", "nestf", "gc", "nestgc", "bgc", "jk")


def build_family(family: str, p2: int, k: int, **kwargs) -> ProductFormula:
    """Dispatch by family name with the order parameter given as ``p2 = 2p``.

    ``odd``, ``odd-sym``, ``even`` and ``nestf`` take integer ``p`` so ``p2``
    must be even; ``gc`` ignores ``p2``.
    """
    if family in ("odd", "odd-sym", "even", "nestf"):
        if p2 % 2 or p2 < 2:
            raise ValueError(f"family {family!r} needs an even p2 >= 2, got {p2}")
        p = p2 // 2
        if family == "odd":
            return build_odd(p, k)
        if family == "odd-sym":
            if k != 1:
                raise ValueError("the symmetrized odd family exists only for k=1")
            return build_odd_symmetrized(p)
        if family == "even":
            return build_even(p, k, **kwargs)
        return build_nested(p, k)
    if family == "gc":
        return build_gc_base(k)
    if family == "nestgc":
        return build_nestgc(p2, k)
    if family == "bgc":
        return build_bgc(p2, **kwargs)
    if family == "jk":
        return build_jk(p2, k, **kwargs)
    raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
