"""Numerical evaluation of product formulas: errors, fitted orders, segmented runs."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .formula_ir import ProductFormula
from .linalg import OperatorSet, expm, is_anti_hermitian, is_hermitian, nested_z, random_anti_hermitian, spectral_norm

FIT_WINDOW = (1e-12, 1e-2)
MIN_USABLE = 4
MIN_POINTS = 8
MAX_GRID_RATIO = math.sqrt(10.0)
# above this many segments, double-precision rounding in the step matrix is
# amplified past typical error budgets, so the product is formed in mpmath
MP_SEGMENT_THRESHOLD = 2**20


class InsufficientDataError(ValueError):
    """Too few scan rows inside the fit window."""


class _SlotExp:
    """``expm(s M)`` for a fixed matrix, via one eigendecomposition when ``M`` is normal.

    The factor is formed as ``I + V (e^{s w} - 1) V^H`` so that the slight
    non-unitarity of ``V`` is scaled by ``s``; otherwise it adds a coherent
    error per term that dominates long products at small ``t``.
    """

    def __init__(self, m: np.ndarray):
        self.m = m
        self.kind = "general"
        if is_anti_hermitian(m):
            w, v = np.linalg.eigh(-1j * m)
            self.kind, self.w, self.v = "anti", w, v
        elif is_hermitian(m):
            w, v = np.linalg.eigh(m)
            self.kind, self.w, self.v = "herm", w, v

    def __call__(self, s: float) -> np.ndarray:
        if self.kind == "general":
            return expm(s * self.m)
        d = np.expm1(1j * s * self.w) if self.kind == "anti" else np.expm1(s * self.w)
        out = (self.v * d) @ self.v.conj().T
        out[np.diag_indices_from(out)] += 1.0
        return out


def _slot_exps(ops: OperatorSet) -> dict[int, _SlotExp]:
    cache = ops._cache.get("slot_exps")
    if cache is None:
        cache = {s: _SlotExp(m) for s, m in ops.ops.items()}
        ops._cache["slot_exps"] = cache
    return cache


def _check_slots(formula: ProductFormula, ops: OperatorSet) -> None:
    missing = sorted(set(formula.slots) - set(ops.ops))
    if missing:
        raise KeyError(f"operator set has no slot(s) {missing}")


def evaluate(formula: ProductFormula, ops: OperatorSet, t: float) -> np.ndarray:
    """Left-to-right product of ``expm(coeff * t**tpow * M[slot])``."""
    _check_slots(formula, ops)
    exps = _slot_exps(ops)
    out = np.eye(ops.dim, dtype=complex)
    for term in formula.terms:
        out = out @ exps[term.slot](term.coeff * t**term.tpow)
    return out


def exact_target(ops: OperatorSet, t: float, slots=None, sign: int = 1, tpow: int | None = None) -> np.ndarray:
    """``expm(sign * Z * t^tpow)`` with ``Z`` the nested commutator over ``slots``.

    ``tpow`` defaults to the nesting depth plus one, which is ``k+1`` for
    flattened nested formulas.
    """
    z = nested_z(ops, slots)
    if tpow is None:
        tpow = (len(slots) if slots is not None else max(ops.ops) + 1)
    return expm(sign * z * t**tpow)


def formula_target(formula: ProductFormula, ops: OperatorSet, t: float) -> np.ndarray:
    """The exponential ``formula`` approximates: ``exp(sign * Z * t^(k+1))``."""
    return exact_target(ops, t, formula.nesting, formula.target_sign, formula.k + 1)


def error_at(formula: ProductFormula, ops: OperatorSet, t: float) -> float:
    return spectral_norm(evaluate(formula, ops, t) - formula_target(formula, ops, t))


def default_grid(tmin: float = 1e-3, tmax: float = 1.0, points: int = 31) -> np.ndarray:
    return np.geomspace(tmin, tmax, points)


def check_grid(t_grid) -> np.ndarray:
    """Validate a geometric grid of at least 8 points with steps of at most half a decade."""
    g = np.sort(np.asarray(t_grid, dtype=float))
    if g.size < MIN_POINTS:
        raise ValueError(f"t grid needs at least {MIN_POINTS} points, got {g.size}")
    if g[0] <= 0:
        raise ValueError("t grid must be positive")
    ratios = g[1:] / g[:-1]
    if not np.allclose(ratios, ratios[0], rtol=1e-6):
        raise ValueError("t grid is not geometric")
    if ratios[0] > MAX_GRID_RATIO * (1 + 1e-9):
        raise ValueError(f"t grid ratio {ratios[0]:.3g} exceeds sqrt(10)")
    return g


@dataclass
class ScanResult:
    rows: list[tuple[float, float]]
    fitted_slope: float
    fit_window: tuple[float, float]
    points: int
    formula_id: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key in sorted(self.formula_id):
            buf.write(f"# {key}={self.formula_id[key]}\n")
        buf.write("t,error\n")
        for t, e in self.rows:
            buf.write(f"{t:.12e},{e:.12e}\n")
        lo, hi = self.fit_window
        buf.write(f"# slope={self.fitted_slope:.6f} window=[{lo:.0e},{hi:.0e}] points={self.points}\n")
        return buf.getvalue()


def fit_slope(rows, window=FIT_WINDOW) -> tuple[float, int]:
    """OLS slope of log error against log t over rows whose error lies in ``window``."""
    lo, hi = window
    usable = [(t, e) for t, e in rows if lo <= e <= hi]
    if len(usable) < MIN_USABLE:
        raise InsufficientDataError(
            f"only {len(usable)} of {len(rows)} rows have error in [{lo:.0e}, {hi:.0e}]; need {MIN_USABLE}"
        )
    x = np.log([t for t, _ in usable])
    y = np.log([e for _, e in usable])
    slope = float(np.polyfit(x, y, 1)[0])
    return slope, len(usable)


def formula_id(formula: ProductFormula) -> dict:
    return {"k": formula.k, "p2": formula.p2, "nu": formula.nu, "n_terms": len(formula), "symmetry": formula.symmetry}


def order_scan(formula: ProductFormula, ops: OperatorSet, t_grid=None, window=FIT_WINDOW) -> ScanResult:
    """Errors over a geometric grid and the fitted convergence order."""
    grid = check_grid(default_grid() if t_grid is None else t_grid)
    rows = [(float(t), error_at(formula, ops, float(t))) for t in grid]
    slope, used = fit_slope(rows, window)
    return ScanResult(rows, slope, tuple(window), used, formula_id(formula))


def pauli_xz_ops(formula: ProductFormula, factor: complex = -1j) -> OperatorSet:
    """``(factor*sigma_x, factor*sigma_z)`` on slots (1, 0)."""
    from .linalg import SIGMA_X, SIGMA_Z

    if formula.slots != (0, 1):
        raise ValueError("Pauli operator set needs a two-slot formula")
    return OperatorSet({1: factor * SIGMA_X, 0: factor * SIGMA_Z})


def random_ops(n_slots: int, dim: int, rng: np.random.Generator, norm: float = 1.0) -> OperatorSet:
    """Random anti-Hermitian operators with spectral norm ``norm`` on slots ``0..n_slots-1``."""
    return OperatorSet.from_list([random_anti_hermitian(dim, rng, norm) for _ in range(n_slots)])


def verify_order(formula: ProductFormula, seed: int = 7, dim: int = 4) -> float:
    """Fitted order on a seeded random anti-Hermitian operator set."""
    ops = random_ops(max(formula.slots) + 1, dim, np.random.default_rng(seed))
    return order_scan(formula, ops, default_grid(1e-3, 1.0, 41)).fitted_slope


def _mp_matrix(a: np.ndarray) -> mpmath.matrix:
    return mpmath.matrix([[mpmath.mpc(complex(x)) for x in row] for row in a])


def _mp_to_numpy(m: mpmath.matrix) -> np.ndarray:
    return np.array([[complex(m[i, j]) for j in range(m.cols)] for i in range(m.rows)], dtype=complex)


def _mp_power(m, r: int):
    result = mpmath.eye(m.rows)
    base = m
    while r:
        if r & 1:
            result = result * base
        r >>= 1
        if r:
            base = base * base
    return result


def segment_evolve(formula: ProductFormula, ops: OperatorSet, t: float, r: int, high_precision: bool | None = None) -> np.ndarray:
    """``evaluate(F, ops, t / r^(1/(k+1)))`` raised to the ``r``-th power.

    For very large ``r`` the step matrix and its power are formed in extended
    precision (``high_precision=None`` decides by ``r``) so that rounding does
    not accumulate into the measured error.
    """
    r = int(r)
    if r < 1:
        raise ValueError("r must be a positive integer")
    dt = t / r ** (1.0 / (formula.k + 1))
    if high_precision is None:
        high_precision = r > MP_SEGMENT_THRESHOLD
    if not high_precision:
        return np.linalg.matrix_power(evaluate(formula, ops, dt), r)
    _check_slots(formula, ops)
    dps = 20 + int(math.ceil(math.log10(r)))
    with mpmath.workdps(dps):
        mats = {s: _mp_matrix(m) for s, m in ops.ops.items()}
        mdt = mpmath.mpf(t) / mpmath.mpf(r) ** (mpmath.mpf(1) / (formula.k + 1))
        step = mpmath.eye(ops.dim)
        for term in formula.terms:
            step = step * mpmath.expm(mpmath.mpf(term.coeff) * mdt**term.tpow * mats[term.slot])
        return _mp_to_numpy(_mp_power(step, r))


def segment_error(formula: ProductFormula, ops: OperatorSet, t: float, r: int, **kw) -> float:
    return spectral_norm(segment_evolve(formula, ops, t, r, **kw) - formula_target(formula, ops, t))
