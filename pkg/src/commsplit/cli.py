"""Command-line entry point: build, scan, plan, compare and the application demos.

Exit codes: 0 success, 2 scan window failure, 3 infeasible plan, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import builders, demos, planner
from .evaluator import InsufficientDataError, order_scan, pauli_xz_ops, random_ops
from .formula_ir import FormulaParseError, deserialize, serialize, stats

EXIT_OK, EXIT_ERROR, EXIT_SCAN, EXIT_INFEASIBLE = 0, 1, 2, 3
SLOPE_TOLERANCE = 0.25


def write_atomic(path: str, data: bytes | str) -> None:
    """Write via a temporary file in the target directory and rename over ``path``."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def default_seed() -> int:
    return int(os.environ.get("COMMSPLIT_SEED", "0"))


def _emit(path: str | None, data: bytes | str) -> None:
    if path:
        write_atomic(path, data)
    else:
        sys.stdout.write(data.decode("utf-8") if isinstance(data, bytes) else data)


def cmd_build(args) -> int:
    kwargs = {}
    if args.family == "bgc" and args.pauli_bonus:
        kwargs["pauli_bonus"] = True
    if args.family == "even" and args.raw:
        kwargs["merge"] = False
    f = builders.build_family(args.family, args.p2, args.k, **kwargs)
    st = stats(f)
    print(f"N={st.n_terms} q_mean={st.q_mean:.12g} q_max={st.q_max:.12g} nu={f.nu}", file=sys.stderr if not args.out else sys.stdout)
    _emit(args.out, serialize(f))
    return EXIT_OK


def _scan_ops(spec: str, formula, seed: int):
    if spec == "pauli-xz":
        return pauli_xz_ops(formula)
    if spec.startswith("random:"):
        dim = int(spec.split(":", 1)[1])
        return random_ops(max(formula.slots) + 1, dim, np.random.default_rng(seed))
    raise ValueError(f"unknown operator set {spec!r}; use pauli-xz or random:<dim>")


def cmd_scan(args) -> int:
    with open(args.formula, "rb") as fh:
        f = deserialize(fh.read())
    ops = _scan_ops(args.ops, f, args.seed)
    grid = np.geomspace(args.tmin, args.tmax, args.points)
    try:
        res = order_scan(f, ops, grid)
    except InsufficientDataError as exc:
        print(f"scan failed: {exc}", file=sys.stderr)
        return EXIT_SCAN
    res.formula_id.update(ops=args.ops, seed=args.seed)
    _emit(args.out, res.to_csv())
    ok = res.fitted_slope >= f.nu - SLOPE_TOLERANCE
    print(f"slope={res.fitted_slope:.4f} nu={f.nu} {'PASS' if ok else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_ERROR


def cmd_plan(args) -> int:
    if args.optimize:
        if args.family not in ("nestf", "nestgc"):
            raise ValueError("--optimize needs family nestf or nestgc")
        choice = planner.optimal_p(args.k, args.lam, args.t, args.eps, args.p_max, args.family)
        pl = choice.plan
        doc = pl.to_document()
        doc["p2"] = choice.p2
        doc["candidates"] = [[p2, cost] for p2, cost in choice.candidates]
        data = (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode("utf-8")
    else:
        if args.p2 is None:
            raise ValueError("give --p2 or --optimize")
        f = builders.build_family(args.family, args.p2, args.k)
        pl = planner.plan(f, args.lam, args.t, args.eps, args.family)
        doc = pl.to_document()
        doc["p2"] = args.p2
        data = (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode("utf-8")
    print(f"r={pl.r} n_exp={pl.n_exp} bound={pl.bound:.3e} path={pl.path}", file=sys.stderr)
    _emit(args.out, data)
    return EXIT_OK


def _report(res) -> int:
    print("\n".join(res.lines()))
    return EXIT_OK if res.passed else EXIT_ERROR


def cmd_demo_grover(args) -> int:
    segments = args.segments if args.segments == "auto" else int(args.segments)
    code = EXIT_OK
    counts = []
    for n in args.n:
        res = demos.demo_grover(n, segments, args.eps)
        counts.append((n, res.values["n_exp"]))
        code = max(code, _report(res))
    if len(counts) > 1:
        mono = all(b[1] > a[1] for a, b in zip(counts, counts[1:]))
        print(f"[{'PASS' if mono else 'FAIL'}] n_exp increases with sqrt(n): {counts}")
        if not mono:
            code = EXIT_ERROR
    return code


def cmd_demo_control(args) -> int:
    return _report(demos.demo_control(args.b0, args.omega0, args.t, args.p2))


def cmd_demo_anticomm(args) -> int:
    return _report(demos.demo_anticomm(args.dim, args.t, args.p2, args.seed))


def cmd_demo_toric(args) -> int:
    return _report(demos.demo_toric(args.j, args.t, args.eps, args.lx, args.ly, args.p))


def cmd_compare(args) -> int:
    if args.workload != "fig3":
        raise ValueError("only the fig3 workload is available")
    families = tuple(s.strip() for s in args.families.split(",") if s.strip())
    p2s = tuple(int(s) for s in args.p2s.split(","))
    curves, warnings = demos.comparison_curves(families, p2s, args.k)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    _emit(args.out, demos.curves_csv(curves))
    by = {(c.family, c.p2): c for c in curves}
    code = EXIT_OK
    for p2 in p2s:
        a, b = by.get(("nestgc", p2)), by.get(("jk", p2))
        if a is None or b is None:
            continue
        rows = demos.compare_at_matched_cost(a, b)
        wins = all(ea <= eb for _, ea, eb in rows)
        print(f"[{'PASS' if wins else 'FAIL'}] p2={p2}: nestgc error <= jk error at {len(rows)} matched costs", file=sys.stderr)
        if not wins:
            code = EXIT_ERROR
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="commsplit", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build a product formula and write its JSON document")
    b.add_argument("--family", required=True, choices=builders.FAMILIES)
    b.add_argument("--p2", type=int, default=2, help="twice the order parameter p")
    b.add_argument("--k", type=int, default=1)
    b.add_argument("--pauli-bonus", action="store_true", help="bgc only: count the base as p2=2")
    b.add_argument("--raw", action="store_true", help="even only: skip merging of adjacent terms")
    b.add_argument("--out")
    b.set_defaults(func=cmd_build)

    s = sub.add_parser("scan", help="fit the convergence order of a formula")
    s.add_argument("--formula", required=True)
    s.add_argument("--ops", default="pauli-xz")
    s.add_argument("--tmin", type=float, default=1e-3)
    s.add_argument("--tmax", type=float, default=1.0)
    s.add_argument("--points", type=int, default=31)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out")
    s.set_defaults(func=cmd_scan)

    p = sub.add_parser("plan", help="segment count for a target error")
    p.add_argument("--family", default="nestf", choices=builders.FAMILIES)
    p.add_argument("--p2", type=int)
    p.add_argument("--optimize", action="store_true")
    p.add_argument("--p-max", type=int, default=5)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--lambda", dest="lam", type=float, default=2.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)

    g = sub.add_parser("demo-grover")
    g.add_argument("--n", type=int, nargs="+", default=[16, 64, 256])
    g.add_argument("--segments", default="auto")
    g.add_argument("--eps", type=float, default=1e-3)
    g.set_defaults(func=cmd_demo_grover)

    c = sub.add_parser("demo-control")
    c.add_argument("--b0", type=float, default=1.0)
    c.add_argument("--omega0", type=float, default=0.5)
    c.add_argument("--t", type=float, default=0.05)
    c.add_argument("--p2", type=int, default=2)
    c.set_defaults(func=cmd_demo_control)

    a = sub.add_parser("demo-anticomm")
    a.add_argument("--dim", type=int, default=4)
    a.add_argument("--t", type=float, default=0.1)
    a.add_argument("--p2", type=int, default=2)
    a.add_argument("--seed", type=int, default=None)
    a.set_defaults(func=cmd_demo_anticomm)

    tc = sub.add_parser("demo-toric")
    tc.add_argument("--lx", type=int, default=2)
    tc.add_argument("--ly", type=int, default=2)
    tc.add_argument("--j", type=float, default=1.0)
    tc.add_argument("--t", type=float, default=0.5)
    tc.add_argument("--eps", type=float, default=1e-3)
    tc.add_argument("--p", type=int, default=2)
    tc.set_defaults(func=cmd_demo_toric)

    cm = sub.add_parser("compare", help="error against exponential count for nested families")
    cm.add_argument("--families", default="nestgc,jk")
    cm.add_argument("--p2s", default="2,3,4")
    cm.add_argument("--k", type=int, default=1)
    cm.add_argument("--workload", default="fig3")
    cm.add_argument("--out")
    cm.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", 0) is None:
        args.seed = default_seed()
    try:
        return args.func(args)
    except (planner.InfeasiblePlan, planner.CapacityError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InsufficientDataError as exc:
        print(f"scan failed: {exc}", file=sys.stderr)
        return EXIT_SCAN
    except (ValueError, KeyError, OSError, FormulaParseError, builders.ConstructionUnverified) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
