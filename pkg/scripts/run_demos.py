"""Run every application demo and print its checks.  Exit status 1 if any check fails."""

import sys

from commsplit import demos, planner


def main():
    results = [demos.demo_grover(n) for n in (16, 64, 256)]
    results += [demos.demo_control(), demos.demo_anticomm(), demos.demo_toric()]
    for res in results:
        print("\n".join(res.lines()))
    fam, f, g = planner.cheaper_family(1, 2.0, 1.0, 1e-6)
    print(f"k=1 scale cost (log10): nestf {f:.2f}, nestgc {g:.2f} -> {fam}")
    fam, f, g = planner.cheaper_family(4, 2.0, 1.0, 1e-6)
    print(f"k=4 scale cost (log10): nestf {f:.2f}, nestgc {g:.2f} -> {fam}")
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
