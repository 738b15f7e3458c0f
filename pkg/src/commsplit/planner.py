"""Error bounds, step counts and cost model for segmented commutator evolutions.

All closed forms are evaluated as ``exp(sum of logs)`` so large orders and long
times do not overflow; step counts are resolved with mpmath so the minimality
of ``r`` is exact even near ``2^63``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import mpmath

from . import builders
from .formula_ir import ProductFormula, stats

LN2 = math.log(2.0)
R_CAP = 2**63 - 1
_DPS = 50


class AssumptionViolation(ValueError):
    """A hypothesis of the remainder bound fails; ``item`` names it."""

    def __init__(self, item: str, message: str):
        self.item = item
        super().__init__(f"assumption {item}: {message}")


class CapacityError(OverflowError):
    """The required step count does not fit in a signed 64-bit integer."""


class InfeasiblePlan(ValueError):
    """No admissible plan exists for the requested parameters."""


@dataclass(frozen=True)
class BoundInputs:
    """Parameters of the remainder bound.

    ``p2`` is twice the order parameter, so the error order is ``p2 + k + 1``.
    ``q`` is the mean coefficient magnitude and ``lam`` the bound Lambda.
    """

    p2: int
    k: int
    n_terms: int
    q: float
    lam: float
    t: float
    epsilon: float = 1.0

    def __post_init__(self):
        for name in ("p2", "k", "n_terms"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        for name in ("q", "lam", "t", "epsilon"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @property
    def nu(self) -> int:
        return self.p2 + self.k + 1

    @property
    def nq(self) -> float:
        return self.n_terms * self.q

    def at_time(self, t: float) -> "BoundInputs":
        return replace(self, t=t)

    @classmethod
    def from_formula(cls, formula: ProductFormula, lam: float, t: float, epsilon: float = 1.0, use_qmax: bool = False):
        """Inputs for a built formula; the order parameter is read off its claimed order."""
        st = stats(formula)
        p2 = formula.nu - formula.k - 1
        return cls(p2, formula.k, st.n_terms, st.q_max if use_qmax else st.q_mean, lam, t, epsilon)


def _log_x(inp: BoundInputs) -> float:
    """``log(e N Q Lambda t / nu^(1/(k+1)))``."""
    return 1.0 + math.log(inp.n_terms) + math.log(inp.q) + math.log(inp.lam) + math.log(inp.t) - math.log(inp.nu) / (inp.k + 1)


@dataclass(frozen=True)
class AssumptionCheck:
    ok: bool | None
    margin: float | None
    detail: str


@dataclass
class AssumptionReport:
    items: dict[str, AssumptionCheck] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.ok is not False for c in self.items.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.items.items() if c.ok is False]

    def to_dict(self) -> dict:
        return {k: asdict(v) for k, v in sorted(self.items.items())}


def check_assumptions(inp: BoundInputs, ops=None) -> AssumptionReport:
    """Evaluate the bound's hypotheses 1, 3 (only with ``ops``), 4 and 5.

    Margins are positive when the item holds.  Hypothesis 2 holds by
    construction when ``q`` is the formula's mean coefficient magnitude.
    """
    rep = AssumptionReport()
    rep.items["1"] = AssumptionCheck(inp.nu > inp.k + 1, float(inp.nu - inp.k - 1), f"nu={inp.nu} > k+1={inp.k + 1}")
    if ops is not None:
        need = 2 * ops.max_norm()
        rep.items["3"] = AssumptionCheck(inp.lam >= need * (1 - 1e-12), inp.lam - need, f"Lambda={inp.lam:.6g} >= 2 max||A_j||={need:.6g}")
    else:
        rep.items["3"] = AssumptionCheck(None, None, "not checked (no operators supplied)")
    limit = LN2 / inp.nq
    lt = inp.lam * inp.t
    rep.items["4"] = AssumptionCheck(lt <= limit, limit - lt, f"Lambda*t={lt:.6g} <= ln2/(NQ)={limit:.6g}")
    rep.items["5"] = AssumptionCheck(inp.nq >= 1.0, inp.nq - 1.0, f"NQ={inp.nq:.6g} >= 1")
    return rep


def remainder_bound(inp: BoundInputs, check: bool = True, ops=None) -> float:
    """``(e N Q Lambda t / nu^(1/(k+1)))^nu``; raises ``AssumptionViolation`` if a hypothesis fails."""
    if check:
        rep = check_assumptions(inp, ops)
        for item in rep.failed():
            raise AssumptionViolation(item, rep.items[item].detail)
    return math.exp(inp.nu * _log_x(inp))


def _log_r_star(inp: BoundInputs):
    """Log of the right-hand side of the step-count condition, in mpmath."""
    k1 = inp.k + 1
    with mpmath.workdps(_DPS):
        lx = (
            1 + mpmath.log(inp.n_terms) + mpmath.log(inp.q) + mpmath.log(inp.lam) + mpmath.log(inp.t)
            - mpmath.log(inp.nu) / k1
        )
        return (k1 + mpmath.mpf(k1**2) / inp.p2) * lx - mpmath.mpf(k1) / inp.p2 * mpmath.log(inp.epsilon)


def steps_required(inp: BoundInputs) -> int:
    """Smallest integer ``r`` with ``r >= x^(k+1+(k+1)^2/(2p)) / eps^((k+1)/(2p))``."""
    with mpmath.workdps(_DPS):
        lr = _log_r_star(inp)
        if lr > mpmath.log(R_CAP):
            raise CapacityError(f"required steps exp({float(lr):.4g}) exceed 2^63-1")
        r = max(1, int(mpmath.ceil(mpmath.exp(lr))))
        while r > 1 and mpmath.log(r - 1) >= lr:
            r -= 1
        while mpmath.log(r) < lr:
            r += 1
    if r > R_CAP:
        raise CapacityError("required steps exceed 2^63-1")
    return r


def epsilon_threshold(inp: BoundInputs) -> float:
    """Tolerance below which the small-time and ``NQ >= 1`` hypotheses need no check."""
    k1 = inp.k + 1
    log_th = inp.nu * (1.0 - math.log(inp.nu) / k1) + inp.p2 * math.log(LN2) + k1 * math.log(inp.nq * inp.lam * inp.t)
    return math.exp(log_th)


def total_exponentials(inp: BoundInputs) -> int:
    return inp.n_terms * steps_required(inp)


def step_time(t: float, r: int, k: int) -> float:
    return t / r ** (1.0 / (k + 1))


@dataclass
class EvolutionPlan:
    r: int
    step_time: float
    n_exp: int
    bound: float
    assumptions: AssumptionReport
    family: str
    p2: int
    k: int
    nu: int
    n_terms: int
    q: float
    lam: float
    t: float
    epsilon: float
    r_rbd: int
    path: str

    @property
    def total_exponentials(self) -> int:
        return self.n_exp

    @property
    def guaranteed_error(self) -> float:
        return self.bound

    def to_document(self) -> dict:
        return {
            "r": self.r,
            "step_time": self.step_time,
            "n_exp": self.n_exp,
            "bound": self.bound,
            "assumptions": self.assumptions.to_dict(),
            "family": self.family,
            "p2": self.p2,
            "k": self.k,
            "nu": self.nu,
            "n_terms": self.n_terms,
            "q": self.q,
            "lambda": self.lam,
            "t": self.t,
            "epsilon": self.epsilon,
            "r_rbd": self.r_rbd,
            "path": self.path,
        }

    def to_json(self) -> bytes:
        return (json.dumps(self.to_document(), indent=1, sort_keys=True) + "\n").encode("utf-8")


def plan_inputs(inp: BoundInputs, family: str = "custom", ops=None) -> EvolutionPlan:
    """Segment count meeting ``inp.epsilon`` with every hypothesis verified at the step time.

    ``r`` starts from the step-count condition.  Below the tolerance threshold
    the small-time hypothesis follows automatically; above it the hypothesis is
    checked explicitly and ``r`` is raised if needed (a larger ``r`` only
    lowers ``r * bound`` because ``nu > k+1``).
    """
    base = check_assumptions(inp, ops)
    for item in ("1", "3", "5"):
        if base.items[item].ok is False:
            raise InfeasiblePlan(f"assumption {item} fails: {base.items[item].detail}")
    r_rbd = steps_required(inp)
    r = r_rbd
    below = inp.epsilon <= epsilon_threshold(inp)
    path = "threshold" if below else "explicit"
    k1 = inp.k + 1
    with mpmath.workdps(_DPS):
        # r^(1/(k+1)) >= Lambda t N Q / ln2 makes the per-step hypothesis 4 hold
        r_small = int(mpmath.ceil((mpmath.mpf(inp.lam) * inp.t * inp.nq / mpmath.log(2)) ** k1))
    if r_small > R_CAP:
        raise CapacityError("segments needed for the small-time hypothesis exceed 2^63-1")
    while check_assumptions(inp.at_time(step_time(inp.t, max(r, r_small), inp.k))).items["4"].ok is False:
        r_small += 1
    r = max(r, r_small)
    dt = step_time(inp.t, r, inp.k)
    step_inputs = inp.at_time(dt)
    report = check_assumptions(step_inputs, ops)
    if not report.ok:
        raise InfeasiblePlan(f"assumptions {report.failed()} fail at the step time")
    bound = r * remainder_bound(step_inputs, check=False)
    return EvolutionPlan(
        r=r, step_time=dt, n_exp=inp.n_terms * r, bound=bound, assumptions=report, family=family,
        p2=inp.p2, k=inp.k, nu=inp.nu, n_terms=inp.n_terms, q=inp.q, lam=inp.lam, t=inp.t,
        epsilon=inp.epsilon, r_rbd=r_rbd, path=path,
    )


def plan(formula: ProductFormula, lam: float, t: float, epsilon: float, family: str = "custom", ops=None) -> EvolutionPlan:
    return plan_inputs(BoundInputs.from_formula(formula, lam, t, epsilon), family, ops)


# closed-form (N, sum|c|, nu) for formulas too large to build


def nestf_stats(p: int, k: int) -> tuple[int, float, int]:
    """``(N, sum |coeff|, nu)`` of ``build_nested(p, k)`` without flattening it.

    Only the outer two-slot formulas are built; each commutator-slot term with
    coefficient ``c`` contributes the inner formula at time ``|c|^(1/q) t``.
    """
    st = stats(builders.build_odd_symmetrized(p))
    n, s, nu = st.n_terms, st.q_mean * st.n_terms, 2 * p + 2
    for q in range(2, k + 1):
        outer = builders.build_odd(p, q) if q % 2 else builders.build_even(p, q, merge=False)
        a = [abs(t.coeff) for t in outer.terms if t.slot == builders.A_SLOT]
        b = [abs(t.coeff) ** (1 / q) for t in outer.terms if t.slot == builders.B_SLOT]
        n = len(a) + len(b) * n
        s = math.fsum(a) + math.fsum(b) * s
        nu = min(outer.nu, nu + 1)
    return n, s, nu


def nestgc_stats(p2: int, k: int) -> tuple[int, float, int]:
    """``(N, sum |coeff|, nu)`` of ``build_nestgc(p2, k)``."""
    n = builders.gc_count(k)
    s = float(n)
    nu = k + 2
    for _ in range(p2 - 1):
        sched = builders.coeff_even((nu - k - 1) / 2, k)
        s *= 4 * sched.nu_p + sched.mu_p
        n *= 5
        nu += 1
    return n, s, nu


def family_inputs(family: str, p2: int, k: int, lam: float, t: float, epsilon: float) -> BoundInputs:
    """Bound inputs for a nested family at order parameter ``p2`` (``nestf`` needs even ``p2``)."""
    if family == "nestf":
        if p2 % 2:
            raise ValueError("nestf needs an even p2")
        n, s, nu = nestf_stats(p2 // 2, k)
    elif family == "nestgc":
        n, s, nu = nestgc_stats(p2, k)
    else:
        raise ValueError(f"family must be nestf or nestgc, got {family!r}")
    return BoundInputs(nu - k - 1, k, n, s / n, lam, t, epsilon)


@dataclass
class OptimalChoice:
    family: str
    p2: int
    n_exp: int
    plan: EvolutionPlan
    candidates: list[tuple[int, int | None]]


def optimal_p(k: int, lam: float, t: float, epsilon: float, p_max: int = 5, family: str = "nestf") -> OptimalChoice:
    """Exhaustive search over order parameters up to ``p_max`` for the fewest exponentials.

    ``nestf`` scans integer ``p``; ``nestgc`` also scans half-integers.  Ties go
    to the smaller order.  Candidates that are infeasible or overflow are
    recorded with cost ``None``.
    """
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    p2s = range(2, 2 * p_max + 1, 2) if family == "nestf" else range(1, 2 * p_max + 1)
    best: EvolutionPlan | None = None
    best_p2 = 0
    candidates = []
    for p2 in p2s:
        try:
            pl = plan_inputs(family_inputs(family, p2, k, lam, t, epsilon), family)
        except (InfeasiblePlan, CapacityError):
            candidates.append((p2, None))
            continue
        candidates.append((p2, pl.n_exp))
        if best is None or pl.n_exp < best.n_exp:
            best, best_p2 = pl, p2
    if best is None:
        raise InfeasiblePlan(f"no feasible order parameter up to p={p_max}; subdivide t further or relax epsilon")
    return OptimalChoice(family, best_p2, best.n_exp, best, candidates)


def popt_estimate(k: int, lam: float, t: float, epsilon: float, family: str = "nestf", p_max: int = 10) -> float:
    """Order parameter ``p`` balancing ``N^(k+2)`` against ``(Lambda t / eps^(1/(k+1)))^((k+1)^2/(2p))``.

    A diagnostic only: it drops constants and ``Q``.  Solved by bisection on
    ``p`` with ``N`` interpolated log-linearly between the built counts.
    """
    def log_n(p: float) -> float:
        if family == "nestf":
            lo = max(1, math.floor(p))
            f = lambda q: math.log(builders.nested_count(q, k))  # noqa: E731
            return f(lo) + (p - lo) * (f(lo + 1) - f(lo))
        return (2 * p - 1) * math.log(5) + math.log(builders.gc_count(k))

    target = math.log(lam * t) - math.log(epsilon) / (k + 1)

    def g(p: float) -> float:
        return (k + 2) * log_n(p) - (k + 1) ** 2 / (2 * p) * target

    lo, hi = 0.5, float(p_max)
    if g(lo) >= 0:
        return lo
    if g(hi) <= 0:
        return hi
    for _ in range(80):
        mid = (lo + hi) / 2
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def log10_scale_cost(family: str, p2: int, k: int, lam: float, t: float, epsilon: float) -> float:
    """log10 of the asymptotic cost estimate with ``N ~ 6^(pk)`` (nestf) or ``5^(2p) 2^k`` (nestgc)."""
    p = p2 / 2
    if family == "nestf":
        log_n = p * k * math.log(6)
    elif family == "nestgc":
        log_n = 2 * p * math.log(5) + k * math.log(2)
    else:
        raise ValueError(f"unknown family {family!r}")
    nu = p2 + k + 1
    expo = k + 1 + (k + 1) ** 2 / p2
    lx = 1 + log_n + math.log(lam * t) - math.log(nu) / (k + 1)
    return (log_n + expo * lx - (k + 1) / p2 * math.log(epsilon)) / math.log(10)


def cheaper_family(k: int, lam: float, t: float, epsilon: float, p_max: int = 5) -> tuple[str, float, float]:
    """Family with the smaller minimum scale cost over ``p <= p_max``, with both minima."""
    f = min(log10_scale_cost("nestf", p2, k, lam, t, epsilon) for p2 in range(2, 2 * p_max + 1, 2))
    g = min(log10_scale_cost("nestgc", p2, k, lam, t, epsilon) for p2 in range(1, 2 * p_max + 1))
    return ("nestf" if f <= g else "nestgc"), f, g
