"""Product formulas as ordered lists of elementary exponentials.

A formula is a sequence of terms ``(slot, coeff, tpow)``; term ``q`` stands for
``exp(coeff * t**tpow * M[slot])`` and the first term is the leftmost factor.
Everything here is exact list manipulation: no matrices are touched.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

SYMMETRIES = ("symmetric", "antisymmetric", "none")


class FormulaParseError(ValueError):
    """Malformed formula document.

    ``position`` is a character offset for JSON syntax errors and a JSON path
    (e.g. ``"terms[3].tpow"``) for schema errors.
    """

    def __init__(self, message: str, position: int | str | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at {position})"
        super().__init__(message)


@dataclass(frozen=True)
class ExpTerm:
    slot: int
    coeff: float
    tpow: int = 1

    def __post_init__(self):
        if not isinstance(self.slot, int) or self.slot < 0:
            raise ValueError(f"slot must be a non-negative integer, got {self.slot!r}")
        if not isinstance(self.tpow, int) or self.tpow < 1:
            raise ValueError(f"tpow must be a positive integer, got {self.tpow!r}")
        if not math.isfinite(self.coeff):
            raise ValueError(f"coefficient must be finite, got {self.coeff!r}")


@dataclass(frozen=True)
class ProductFormula:
    """An ordered product of elementary exponentials approximating ``exp(Z t^(k+1))``.

    ``p2`` is twice the order parameter so half-integer orders stay exact, ``nu``
    the claimed error order (error is ``O(t^nu)``).  By default the target
    commutator nests the slots in descending order, ``[A_m,[...,[A_1,A_0]]]``;
    ``target_slots`` overrides that (outermost first) for formulas such as the
    BGC sequence that reuse an operator, and ``target_sign`` flips ``Z``.
    """

    k: int
    p2: int
    terms: tuple[ExpTerm, ...]
    nu: int
    symmetry: str = "none"
    target_slots: tuple[int, ...] | None = None
    target_sign: int = 1

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.target_slots is not None:
            object.__setattr__(self, "target_slots", tuple(self.target_slots))
        if not self.terms:
            raise ValueError("a product formula needs at least one term")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.p2 < 1:
            raise ValueError(f"p2 must be >= 1, got {self.p2}")
        if self.symmetry not in SYMMETRIES:
            raise ValueError(f"unknown symmetry tag {self.symmetry!r}")
        if self.nu <= self.k + 1:
            raise ValueError(f"claimed order nu={self.nu} must exceed k+1={self.k + 1}")
        if self.target_sign not in (1, -1):
            raise ValueError("target_sign must be +1 or -1")

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def slots(self) -> tuple[int, ...]:
        return tuple(sorted({term.slot for term in self.terms}))

    @property
    def nesting(self) -> tuple[int, ...]:
        """Slots of the target commutator, outermost first."""
        if self.target_slots is not None:
            return self.target_slots
        return tuple(reversed(self.slots))


@dataclass(frozen=True)
class FormulaStats:
    n_terms: int
    q_mean: float
    q_max: float
    slot_sums: dict = field(default_factory=dict)

    @property
    def nq(self) -> float:
        """N * Q, the quantity the error bounds depend on."""
        return self.n_terms * self.q_mean


def make_formula(terms: Iterable[ExpTerm | tuple], **kwargs) -> ProductFormula:
    """Build a formula from ``ExpTerm`` objects or ``(slot, coeff, tpow)`` tuples."""
    built = tuple(t if isinstance(t, ExpTerm) else ExpTerm(int(t[0]), float(t[1]), int(t[2])) for t in terms)
    return ProductFormula(terms=built, **kwargs)


def scale(
    formula: ProductFormula,
    slot_factors: Mapping[int, float],
    symmetry: str | None = None,
) -> ProductFormula:
    """Multiply every coefficient by the factor of its slot.

    Scaling slot A by ``g`` and slot B by ``g**k`` realizes the argument
    substitution ``U(A g t, B (g t)^k)``.  The symmetry tag survives only when
    all factors share one magnitude, unless ``symmetry`` is given explicitly.
    """
    missing = [s for s in formula.slots if s not in slot_factors]
    if missing:
        raise ValueError(f"no scale factor for slot(s) {missing}")
    factors = {s: float(slot_factors[s]) for s in formula.slots}
    if not all(math.isfinite(f) for f in factors.values()):
        raise ValueError("scale factors must be finite")
    terms = tuple(ExpTerm(t.slot, t.coeff * factors[t.slot], t.tpow) for t in formula.terms)
    if symmetry is None:
        mags = {abs(f) for f in factors.values()}
        symmetry = formula.symmetry if len(mags) == 1 else "none"
    return replace(formula, terms=terms, symmetry=symmetry)


def time_scale(formula: ProductFormula, lam: float) -> ProductFormula:
    """The formula evaluated at ``lam * t``: each coefficient gains ``lam**tpow``."""
    terms = tuple(ExpTerm(t.slot, t.coeff * lam**t.tpow, t.tpow) for t in formula.terms)
    return replace(formula, terms=terms)


def invert(formula: ProductFormula) -> ProductFormula:
    """Exact inverse: reverse the term order and negate every coefficient."""
    terms = tuple(ExpTerm(t.slot, -t.coeff, t.tpow) for t in reversed(formula.terms))
    return replace(formula, terms=terms)


def concat(*formulas: ProductFormula, **overrides) -> ProductFormula:
    """Product of formulas, left to right.

    The result is tagged ``none`` with ``nu`` the smallest of the inputs;
    keyword overrides (``nu``, ``p2``, ``symmetry``, ...) replace those defaults.
    """
    if not formulas:
        raise ValueError("concat needs at least one formula")
    first = formulas[0]
    for other in formulas[1:]:
        if other.k != first.k:
            raise ValueError(f"cannot concatenate formulas with k={first.k} and k={other.k}")
        if other.nesting != first.nesting or other.target_sign != first.target_sign:
            raise ValueError("cannot concatenate formulas with different targets")
    terms = tuple(t for f in formulas for t in f.terms)
    fields = dict(terms=terms, symmetry="none", nu=min(f.nu for f in formulas))
    fields.update(overrides)
    return replace(first, **fields)


def power(formula: ProductFormula, n: int) -> ProductFormula:
    """``formula`` repeated ``n`` times (no merging)."""
    if n < 1:
        raise ValueError("power must be >= 1")
    return replace(formula, terms=formula.terms * n)


def simplify(formula: ProductFormula, tol: float = 0.0) -> ProductFormula:
    """Merge adjacent terms on the same operator and drop negligible ones.

    Only neighbours are merged, so the operator product is unchanged.  Dropping a
    term can make two further terms adjacent; those are merged as well, which
    makes the operation idempotent.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    stack: list[ExpTerm] = []
    for term in formula.terms:
        if stack and stack[-1].slot == term.slot and stack[-1].tpow == term.tpow:
            merged = stack.pop()
            coeff = merged.coeff + term.coeff
            if abs(coeff) > tol:
                stack.append(ExpTerm(term.slot, coeff, term.tpow))
        elif abs(term.coeff) > tol:
            stack.append(term)
    if not stack:
        raise ValueError("formula simplifies to the identity")
    return replace(formula, terms=tuple(stack))


def stats(formula: ProductFormula) -> FormulaStats:
    mags = [abs(t.coeff) for t in formula.terms]
    sums: dict[tuple[int, int], list[float]] = defaultdict(list)
    for t in formula.terms:
        sums[(t.slot, t.tpow)].append(t.coeff)
    slot_sums = {key: math.fsum(vals) for key, vals in sorted(sums.items())}
    n = len(mags)
    return FormulaStats(n_terms=n, q_mean=math.fsum(mags) / n, q_max=max(mags), slot_sums=slot_sums)


def relabel(formula: ProductFormula, mapping: Mapping[int, int]) -> ProductFormula:
    """Rename slots; slots missing from ``mapping`` keep their index."""
    terms = tuple(ExpTerm(mapping.get(t.slot, t.slot), t.coeff, t.tpow) for t in formula.terms)
    target = formula.target_slots
    if target is not None:
        target = tuple(mapping.get(s, s) for s in target)
    return replace(formula, terms=terms, target_slots=target)


# --- serialization ---------------------------------------------------------

def _coeff_str(c: float) -> str:
    # 17 significant digits round-trip any double exactly
    return format(c, ".16e")


def to_document(formula: ProductFormula) -> dict:
    doc = {
        "k": formula.k,
        "p2": formula.p2,
        "symmetry": formula.symmetry,
        "nu": formula.nu,
        "terms": [{"slot": t.slot, "coeff": _coeff_str(t.coeff), "tpow": t.tpow} for t in formula.terms],
    }
    if formula.target_slots is not None or formula.target_sign != 1:
        doc["target"] = {"slots": list(formula.nesting), "sign": formula.target_sign}
    return doc


def serialize(formula: ProductFormula) -> bytes:
    return (json.dumps(to_document(formula), indent=1) + "\n").encode("utf-8")


def _require_int(doc: Mapping, key: str, path: str, minimum: int) -> int:
    if key not in doc:
        raise FormulaParseError(f"missing field {key!r}", path or "$")
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise FormulaParseError(f"field {key!r} must be an integer", f"{path}{key}")
    if value < minimum:
        raise FormulaParseError(f"field {key!r} must be >= {minimum}, got {value}", f"{path}{key}")
    return value


def from_document(doc) -> ProductFormula:
    if not isinstance(doc, dict):
        raise FormulaParseError("formula document must be a JSON object", "$")
    k = _require_int(doc, "k", "", 1)
    p2 = _require_int(doc, "p2", "", 1)
    nu = _require_int(doc, "nu", "", 1)
    symmetry = doc.get("symmetry", "none")
    if symmetry not in SYMMETRIES:
        raise FormulaParseError(f"unknown symmetry {symmetry!r}", "symmetry")
    raw_terms = doc.get("terms")
    if not isinstance(raw_terms, list) or not raw_terms:
        raise FormulaParseError("'terms' must be a non-empty list", "terms")
    terms = []
    for i, raw in enumerate(raw_terms):
        path = f"terms[{i}]."
        if not isinstance(raw, dict):
            raise FormulaParseError("term must be an object", f"terms[{i}]")
        slot = _require_int(raw, "slot", path, 0)
        tpow = _require_int(raw, "tpow", path, 1)
        coeff_raw = raw.get("coeff")
        if not isinstance(coeff_raw, str):
            raise FormulaParseError("coefficient must be a decimal string", f"{path}coeff")
        try:
            coeff = float(coeff_raw)
        except ValueError:
            raise FormulaParseError(f"bad coefficient {coeff_raw!r}", f"{path}coeff") from None
        if not math.isfinite(coeff):
            raise FormulaParseError("coefficient must be finite", f"{path}coeff")
        terms.append(ExpTerm(slot, coeff, tpow))
    target_slots, target_sign = None, 1
    if "target" in doc:
        target = doc["target"]
        if not isinstance(target, dict) or not isinstance(target.get("slots"), list):
            raise FormulaParseError("'target' must hold a 'slots' list", "target")
        target_slots = tuple(int(s) for s in target["slots"])
        target_sign = target.get("sign", 1)
        if target_sign not in (1, -1):
            raise FormulaParseError("target sign must be +1 or -1", "target.sign")
    used = sorted({t.slot for t in terms})
    if used != list(range(len(used))):
        raise FormulaParseError(f"slots {used} are not a contiguous range from 0", "terms")
    try:
        return ProductFormula(
            k=k, p2=p2, terms=tuple(terms), symmetry=symmetry, nu=nu,
            target_slots=target_slots, target_sign=target_sign,
        )
    except ValueError as exc:
        raise FormulaParseError(str(exc), "$") from None


def deserialize(data: bytes | str) -> ProductFormula:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FormulaParseError(exc.msg, exc.pos) from None
    return from_document(doc)


def same_terms(a: Sequence[ExpTerm], b: Sequence[ExpTerm], tol: float = 0.0) -> bool:
    """Termwise equality of two term lists up to ``tol`` on the coefficients."""
    if len(a) != len(b):
        return False
    return all(
        x.slot == y.slot and x.tpow == y.tpow and abs(x.coeff - y.coeff) <= tol for x, y in zip(a, b)
    )
