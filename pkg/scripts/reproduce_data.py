"""Write convergence and comparison data to CSV.

Order scans (error against t on Pauli operators) for the odd k=1, even k=2,
BGC and symmetrized formulas, and error against exponential count for nestgc
and the three-copy comparator on the fig3 workload.
Usage: python scripts/reproduce_data.py [outdir]
"""

import os
import sys

from commsplit import builders, demos
from commsplit.evaluator import order_scan, pauli_xz_ops


def scan_table(formulas, factor=-1j):
    lines = ["label,nu,t,error"]
    summary = []
    for label, f in formulas:
        res = order_scan(f, pauli_xz_ops(f, factor))
        lines += [f"{label},{f.nu},{t:.12e},{e:.12e}" for t, e in res.rows]
        summary.append(f"{label}: slope {res.fitted_slope:.3f} (nu {f.nu}, {res.points} points)")
    return "\n".join(lines) + "\n", summary


def main(outdir="data"):
    os.makedirs(outdir, exist_ok=True)
    jobs = {
        "odd_orders.csv": ([(f"p={p}", builders.build_odd(p, 1)) for p in (1, 2, 3)], -1j),
        "even_orders.csv": ([(f"p={p}", builders.build_even(p, 2)) for p in (1, 2, 3)], -1j),
        "bgc_orders.csv": ([(f"p2={p2}", builders.build_bgc(p2)) for p2 in (2, 3, 4, 5)], 1j),
        "symmetrized_orders.csv": ([(f"p={p}", builders.build_odd_symmetrized(p)) for p in (1, 2)], -1j),
    }
    for name, (formulas, factor) in jobs.items():
        text, summary = scan_table(formulas, factor)
        with open(os.path.join(outdir, name), "w") as fh:
            fh.write(text)
        print(name)
        for s in summary:
            print("  " + s)
    curves, warnings = demos.comparison_curves(("nestgc", "jk"), (2, 3, 4))
    for w in warnings:
        print("warning:", w)
    with open(os.path.join(outdir, "compare_nestgc_jk.csv"), "w") as fh:
        fh.write(demos.curves_csv(curves))
    print("compare_nestgc_jk.csv")


if __name__ == "__main__":
    main(*sys.argv[1:])
