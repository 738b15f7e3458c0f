"""Worked applications: quantum search, single-qubit control, anticommutators, the toric code.

Each demo returns a result object carrying the measured quantities, the
expected behaviour and a pass/fail verdict per check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import builders, planner
from .evaluator import error_at, evaluate, segment_evolve
from .formula_ir import ProductFormula, stats
from .linalg import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    OperatorSet,
    anticommutator,
    basis_projector,
    commutator,
    dilate_anticomm,
    expm,
    kron,
    plus_projector,
    plus_state,
    random_hermitian,
    spectral_norm,
)


@dataclass
class Check:
    name: str
    measured: float
    expected: str
    passed: bool


@dataclass
class DemoResult:
    name: str
    values: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, measured: float, expected: str, passed: bool) -> None:
        self.checks.append(Check(name, float(measured), expected, bool(passed)))

    def lines(self) -> list[str]:
        out = [f"{self.name}:"]
        for key in sorted(self.values):
            out.append(f"  {key} = {self.values[key]}")
        for c in self.checks:
            out.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: measured {c.measured:.6g}, expected {c.expected}")
        return out


def odd_k1_formula(p2: int) -> ProductFormula:
    """Two-operator ``k=1`` formula of order ``p2+2``: plain recursion for odd ``p2``, symmetrized for even."""
    if p2 < 1:
        raise ValueError("p2 must be >= 1")
    if p2 % 2:
        return builders.build_odd((p2 + 1) // 2, 1)
    return builders.build_odd_symmetrized(p2 // 2)


# quantum search ------------------------------------------------------------


def grover_time(n: int) -> float:
    """``T = phi n / sqrt(n-1)`` with ``tan(phi) = sqrt(n-1)``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return math.atan(math.sqrt(n - 1)) * n / math.sqrt(n - 1)


def grover_ops_full(n: int, marked: int = 0) -> OperatorSet:
    """Slots ``iW`` (1) and ``-iP`` (0) with ``W = |w><w|``, ``P = |+><+|``; their commutator is ``[W,P]``."""
    return OperatorSet({1: 1j * basis_projector(n, marked), 0: -1j * plus_projector(n)})


def grover_ops_reduced(n: int) -> tuple[OperatorSet, np.ndarray]:
    """The same operators on the invariant plane spanned by ``|w>`` and the uniform state.

    Basis ``(|w>, |w_perp>)``; returns the operators and ``|+>`` in that basis.
    """
    plus = np.array([1 / math.sqrt(n), math.sqrt((n - 1) / n)], dtype=complex)
    w = np.diag([1.0, 0.0]).astype(complex)
    return OperatorSet({1: 1j * w, 0: -1j * np.outer(plus, plus.conj())}), plus


def demo_grover(n: int, segments: str | int = "auto", epsilon: float = 1e-3, p_max: int = 5, marked: int = 0) -> DemoResult:
    """Search by evolving ``|+>`` under ``exp([W,P] T)``.

    The exact evolution is done in the full space.  The product-formula run
    uses the nested ``k=1`` family at the planner's optimal order, simulated on
    the two-dimensional invariant plane (the full space is only needed to
    confirm that plane is invariant, which the tests do).
    """
    res = DemoResult(f"grover n={n}")
    big_t = grover_time(n)
    t = math.sqrt(big_t)
    full = grover_ops_full(n, marked)
    psi = expm(commutator(full[1], full[0]) * big_t) @ plus_state(n)
    fid_exact = abs(psi[marked]) ** 2
    res.values.update(n=n, T=big_t, sqrt_n=math.sqrt(n), t=t, exact_fidelity=fid_exact)
    res.check("exact fidelity", fid_exact, ">= 1 - 1e-9", fid_exact >= 1 - 1e-9)

    lam = 2.0
    if segments == "auto":
        choice = planner.optimal_p(1, lam, t, epsilon, p_max, "nestf")
        formula = builders.build_nested(choice.p2 // 2, 1)
        r = choice.plan.r
    else:
        formula = builders.build_nested(1, 1)
        r = int(segments)
    ops2, plus2 = grover_ops_reduced(n)
    phi = segment_evolve(formula, ops2, t, r) @ plus2
    fid = abs(phi[0]) ** 2
    n_exp = len(formula) * r
    res.values.update(r=r, p2=formula.p2, n_terms=len(formula), n_exp=n_exp, fidelity=fid, epsilon=epsilon)
    res.check("product-formula fidelity", fid, ">= 0.99", fid >= 0.99)
    return res


# single-qubit control -------------------------------------------------------


def control_ops(b0: float, omega0: float) -> tuple[np.ndarray, np.ndarray]:
    """``A = B0 sigma_z`` and ``B = B0 sigma_z + omega0/(2 B0) (sigma_z + sigma_x)``."""
    if b0 <= 0 or omega0 <= 0:
        raise ValueError("fields must be positive")
    a = b0 * SIGMA_Z
    b = b0 * SIGMA_Z + omega0 / (2 * b0) * (SIGMA_Z + SIGMA_X)
    return a, b


def control_error(b0: float, omega0: float, t: float, p2: int) -> float:
    """Distance between the pulse sequence and ``exp(-i omega0 sigma_y t^2)``."""
    a, b = control_ops(b0, omega0)
    ops = OperatorSet({1: -1j * a, 0: -1j * b})
    f = odd_k1_formula(p2)
    return spectral_norm(evaluate(f, ops, t) - expm(-1j * omega0 * SIGMA_Y * t**2))


def demo_control(b0: float = 1.0, omega0: float = 0.5, t: float = 0.05, p2: int = 2) -> DemoResult:
    res = DemoResult(f"control B0={b0} omega0={omega0} t={t} p2={p2}")
    a, b = control_ops(b0, omega0)
    comm_err = spectral_norm(commutator(a, b) - 1j * omega0 * SIGMA_Y)
    res.check("[A,B] = i omega0 sigma_y", comm_err, "<= 1e-13", comm_err <= 1e-13)
    e1 = control_error(b0, omega0, t, p2)
    e2 = control_error(b0, omega0, t / 2, p2)
    nu = p2 + 2
    res.values.update(error=e1, error_half_t=e2, order=nu, n_terms=len(odd_k1_formula(p2)))
    ratio = e1 / e2 if e2 > 0 else float("inf")
    res.check("error ratio t -> t/2", ratio, f"about 2^{nu} = {2**nu}", abs(math.log2(ratio) - nu) <= 0.35)
    e_next = control_error(b0, omega0, t, p2 + 1)
    res.values["error_next_order"] = e_next
    res.check("next order reduces error", e_next, f"< {e1:.3e}", e_next < e1)
    return res


# anticommutators ------------------------------------------------------------


def anticomm_ops(a: np.ndarray, b: np.ndarray) -> OperatorSet:
    """Anti-Hermitian slots ``-i A(x)sigma_y`` (1) and ``i B(x)sigma_x`` (0).

    Their commutator is ``-i {A,B} (x) sigma_z``, so with the ancilla in ``|0>``
    the target ``exp([.,.] t^2)`` acts as ``exp(-i {A,B} t^2)``.
    """
    ay, bx = dilate_anticomm(a, b)
    return OperatorSet({1: -1j * ay, 0: 1j * bx})


def anticomm_errors(a, b, t: float, p2: int) -> tuple[float, float]:
    """``(block error, ancilla leakage)`` of the dilated simulation at time ``t``."""
    f = odd_k1_formula(p2)
    u = evaluate(f, anticomm_ops(a, b), t)
    block = u[0::2, 0::2]
    target = expm(-1j * anticommutator(a, b) * t**2)
    return spectral_norm(block - target), spectral_norm(u[1::2, 0::2])


def demo_anticomm(dim: int = 4, t: float = 0.1, p2: int = 2, seed: int = 0) -> DemoResult:
    res = DemoResult(f"anticommutator dim={dim} t={t} p2={p2}")
    rng = np.random.default_rng(seed)
    a = random_hermitian(dim, rng)
    b = random_hermitian(dim, rng)
    ay, bx = dilate_anticomm(a, b)
    ident = spectral_norm(commutator(ay, bx) + 1j * np.kron(anticommutator(a, b), SIGMA_Z))
    res.check("dilation identity", ident, "<= 1e-13", ident <= 1e-13)
    e1, leak1 = anticomm_errors(a, b, t, p2)
    e2, _ = anticomm_errors(a, b, t / 2, p2)
    nu = p2 + 2
    res.values.update(error=e1, error_half_t=e2, leakage=leak1, order=nu)
    ratio = e1 / e2
    res.check("error ratio t -> t/2", ratio, f"about 2^{nu} = {2**nu}", abs(math.log2(ratio) - nu) <= 0.5)
    res.check("ancilla stays in |0>", leak1, f"<= error {e1:.3e}", leak1 <= e1 + 1e-15)
    e0, _ = anticomm_errors(a, b, 0.0, p2)
    res.check("t=0 gives identity", e0, "<= 1e-15", e0 <= 1e-15)
    return res


# toric code -----------------------------------------------------------------


def toric_lattice(lx: int = 2, ly: int = 2) -> tuple[list[tuple[int, ...]], list[tuple[int, ...]]]:
    """Vertex and plaquette qubit sets on an ``lx x ly`` torus with one qubit per edge.

    Horizontal edge ``(x,y)`` is qubit ``y*lx + x``; vertical edge ``(x,y)`` is
    ``lx*ly + y*lx + x``.  Only the 2x2 torus is supported (dimension 256).
    """
    if (lx, ly) != (2, 2):
        raise ValueError("only the 2x2 torus is supported at dense-matrix scale")
    h = lambda x, y: (y % ly) * lx + (x % lx)  # noqa: E731
    v = lambda x, y: lx * ly + (y % ly) * lx + (x % lx)  # noqa: E731
    vertices = [tuple(sorted({h(x, y), h(x - 1, y), v(x, y), v(x, y - 1)})) for y in range(ly) for x in range(lx)]
    plaquettes = [tuple(sorted({h(x, y), h(x, y + 1), v(x, y), v(x + 1, y)})) for y in range(ly) for x in range(lx)]
    return vertices, plaquettes


def pauli_string(label: str, qubits, n: int) -> np.ndarray:
    chars = ["i"] * n
    for q in qubits:
        chars[q] = label
    return kron(*({"i": np.eye(2), "x": SIGMA_X, "z": SIGMA_Z}[c] for c in chars))


def toric_hamiltonian(j: float, lx: int = 2, ly: int = 2) -> tuple[np.ndarray, list[tuple[str, tuple[int, ...]]]]:
    vertices, plaquettes = toric_lattice(lx, ly)
    n = 2 * lx * ly
    factors = [("x", q) for q in vertices] + [("z", q) for q in plaquettes]
    h = -j * sum(pauli_string(lab, q, n) for lab, q in factors)
    return h, factors


def embed(local: np.ndarray, qubits, n: int) -> np.ndarray:
    """Lift an operator on ``qubits`` plus a trailing ancilla to ``n`` qubits plus the ancilla."""
    m = len(qubits)
    rest = [q for q in range(n) if q not in qubits]
    full = np.kron(local, np.eye(2 ** len(rest)))
    # full acts on (qubits..., ancilla, rest...); permute axes to (0..n-1, ancilla)
    order = list(qubits) + [n] + rest
    perm = [order.index(q) for q in range(n + 1)]
    t = full.reshape([2] * (2 * (n + 1)))
    t = t.transpose(perm + [p + n + 1 for p in perm])
    del m
    return t.reshape(2 ** (n + 1), 2 ** (n + 1))


def four_body_ops(label: str, jt: float) -> tuple[OperatorSet, float]:
    """Dilated slots whose nested commutator on the ``|0>`` ancilla block is ``8 i sign(jt) P``.

    Local space: four qubits then the ancilla.  Returns the operators and the
    formula time ``tau`` with ``8 tau^4 = |jt|``, so the target is ``exp(i jt P)``.
    """
    sig = {"x": SIGMA_X, "z": SIGMA_Z}[label]
    single = [kron(*[sig if q == j else np.eye(2) for q in range(4)]) for j in range(4)]
    ops = {0: -1j * np.kron(single[0], SIGMA_X)}
    for j in range(1, 4):
        ops[j] = -1j * np.kron(single[j], SIGMA_Y)
    if jt > 0:
        ops[0] = -ops[0]
    return OperatorSet(ops), (abs(jt) / 8) ** 0.25


def four_body_error(formula: ProductFormula, label: str, jt: float, r: int) -> float:
    """Error of the segmented simulation of ``exp(i jt P)`` on the ``|0>``-ancilla columns."""
    ops, tau = four_body_ops(label, jt)
    u = segment_evolve(formula, ops, tau, r)
    p = kron(*([{"x": SIGMA_X, "z": SIGMA_Z}[label]] * 4))
    target = np.kron(expm(1j * jt * p), basis_projector(2, 0))
    return spectral_norm(u[:, 0::2] - target[:, 0::2])


def calibrate_segments(err_fn, budget: float, r_max: int = 2**24) -> int:
    """Smallest ``r`` with ``err_fn(r) <= budget`` by doubling then bisection."""
    r = 1
    while err_fn(r) > budget:
        r *= 2
        if r > r_max:
            raise planner.InfeasiblePlan(f"no segment count up to {r_max} meets the budget {budget:.3g}")
    lo, hi = r // 2, r
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if err_fn(mid) <= budget:
            hi = mid
        else:
            lo = mid
    return hi


def demo_toric(j: float = 1.0, t: float = 0.5, epsilon: float = 1e-3, lx: int = 2, ly: int = 2, p: int = 2) -> DemoResult:
    """Toric-code evolution from two-body exponentials via the ``k=3`` dilation.

    The rigorous per-factor segment count is reported when it fits in 64 bits;
    the simulation itself uses the smallest segment count whose measured
    per-factor error meets the budget ``epsilon / #factors``.
    """
    res = DemoResult(f"toric {lx}x{ly} J={j} t={t} eps={epsilon}")
    h, factors = toric_hamiltonian(j, lx, ly)
    n = 2 * lx * ly
    mats = [pauli_string(lab, q, n) for lab, q in factors]
    worst = max(spectral_norm(commutator(a, b)) for a in mats for b in mats)
    res.check("stabilizers commute", worst, "== 0", worst == 0.0)
    exact = expm(-1j * h * t)
    prod = np.eye(2**n, dtype=complex)
    for m in mats:
        prod = prod @ expm(1j * j * t * m)
    fact_err = spectral_norm(exact - prod)
    res.check("commuting factorization", fact_err, "<= 1e-12", fact_err <= 1e-12)

    formula = builders.build_nested(p, 3)
    budget = epsilon / len(factors)
    jt = j * t
    ops, tau = four_body_ops("x", jt)
    try:
        rig = planner.plan(formula, 2.0, tau, budget, "nestf", ops)
        res.values["rigorous_r"] = rig.r
    except (planner.CapacityError, planner.InfeasiblePlan) as exc:
        res.values["rigorous_r"] = f"unavailable ({exc})"
    r_by_label = {lab: calibrate_segments(lambda r, lab=lab: four_body_error(formula, lab, jt, r), budget) for lab in ("x", "z")}

    total = np.eye(2 ** (n + 1), dtype=complex)
    per_factor = []
    for lab, qubits in factors:
        lops, ltau = four_body_ops(lab, jt)
        u = segment_evolve(formula, lops, ltau, r_by_label[lab])
        per_factor.append(four_body_error(formula, lab, jt, r_by_label[lab]))
        total = total @ embed(u, qubits, n)
    err = spectral_norm(total[:, 0::2] - np.kron(exact, basis_projector(2, 0))[:, 0::2])
    n_exp = sum(len(formula) * r_by_label[lab] for lab, _ in factors)
    res.values.update(
        factors=len(factors), n_terms=len(formula), nu=formula.nu, tau=tau, budget=budget,
        r_vertex=r_by_label["x"], r_plaquette=r_by_label["z"], max_factor_error=max(per_factor),
        total_error=err, two_body_exponentials=n_exp,
    )
    res.check("total error", err, f"<= {epsilon:g}", err <= epsilon)
    return res


# comparison of nested families ---------------------------------------------


@dataclass
class Curve:
    family: str
    p2: int
    n_terms: int
    points: list[tuple[int, float]]  # (n_exp, error)


def fig3_ops() -> OperatorSet:
    return OperatorSet({1: -1j * SIGMA_X, 0: -1j * SIGMA_Y})


def comparison_curves(families=("nestgc", "jk"), p2s=(2, 3, 4), k: int = 1, r_grid=None) -> tuple[list[Curve], list[str]]:
    """Error against exponential count for ``F(t/r^(1/(k+1)))^r`` at ``t=1``.

    Families whose construction fails verification are skipped with a warning.
    """
    if k != 1:
        raise ValueError("the comparison workload is the k=1 Pauli commutator")
    ops = fig3_ops()
    r_grid = list(r_grid) if r_grid is not None else [2**i for i in range(0, 13)]
    curves, warnings = [], []
    for fam in families:
        for p2 in p2s:
            try:
                if fam == "nestf":
                    if p2 % 2:
                        continue
                    f = builders.build_nested(p2 // 2, k)
                else:
                    f = builders.build_family(fam, p2, k)
            except builders.ConstructionUnverified as exc:
                warnings.append(f"{fam} p2={p2} omitted: {exc}")
                continue
            pts = [(len(f) * r, _segmented_error(f, ops, r)) for r in r_grid]
            curves.append(Curve(fam, p2, len(f), pts))
    return curves, warnings


def _segmented_error(f: ProductFormula, ops: OperatorSet, r: int) -> float:
    from .evaluator import segment_error

    return segment_error(f, ops, 1.0, r, high_precision=False)


def error_at_cost(curve: Curve, n_exp: float) -> float:
    """Log-log interpolation of a curve's error at exponential count ``n_exp``."""
    x = np.log([c for c, _ in curve.points])
    y = np.log([max(e, 1e-300) for _, e in curve.points])
    lx = math.log(n_exp)
    if lx < x[0] or lx > x[-1]:
        raise ValueError("cost outside the curve's range")
    return float(np.exp(np.interp(lx, x, y)))


def compare_at_matched_cost(a: Curve, b: Curve, floor: float = 1e-13) -> list[tuple[float, float, float]]:
    """``(n_exp, error_a, error_b)`` at ``a``'s costs inside ``b``'s range, above the rounding floor."""
    lo, hi = b.points[0][0], b.points[-1][0]
    out = []
    for c, e in a.points:
        if lo <= c <= hi:
            eb = error_at_cost(b, c)
            if max(e, eb) > floor:
                out.append((c, e, eb))
    return out


def curves_csv(curves: list[Curve]) -> str:
    lines = ["# workload=exp([-i sigma_x, -i sigma_y]) t=1", "family,p2,n_terms,n_exp,error"]
    for c in curves:
        for n_exp, err in c.points:
            lines.append(f"{c.family},{c.p2},{c.n_terms},{n_exp},{err:.12e}")
    return "\n".join(lines) + "\n"


def formula_cost_table(formula: ProductFormula) -> dict:
    st = stats(formula)
    return {"n_terms": st.n_terms, "q_mean": st.q_mean, "q_max": st.q_max, "nu": formula.nu}

