"""Exhaustion on (-mu n, mu n) with 2n - 1 zeros: central-window C^1 differences
between consecutive and same-parity members, and the norm sandwich.

    python3 scripts/exhaustion_demo.py --periods 4 5 6 --n 2 3 4 5
"""
import argparse
import math

from dualnehari.assembly import exhaustion_sweep
from dualnehari.problem import arctan_reaction, constant_forcing, trig_forcing
from dualnehari.signed import SolverOptions


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--periods", type=float, nargs="+", default=[4, 5, 6],
                    help="mu in units of the forcing period")
    ap.add_argument("--n", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--window", type=float, default=20.0)
    ap.add_argument("--autonomous", action="store_true", help="use p = 0.3 (time-shift alignment)")
    args = ap.parse_args()

    g = arctan_reaction()
    T = 2 * math.pi
    p = constant_forcing(0.3) if args.autonomous else trig_forcing(0.3, [(1.0, 0.5, 0.0)], period=T)
    opts = SolverOptions(min_length=20)
    for m in args.periods:
        mu = m * T
        sols, rep = exhaustion_sweep(mu, args.n, g, p, opts, window=args.window)
        print(f"mu = {m:g} T = {mu:.4f}: h* = {rep.get('h_star', float('nan')):.4f}, "
              f"non-increasing {rep.get('non_increasing')}")
        for d in rep["differences"]:
            print(f"   n {d['n']} -> {d['n_next']}: sup|du| {d['sup_u']:.4g}, sup|d u'| {d['sup_du']:.4g}, "
                  f"shift {d['shift']:.4f}")
        for d in rep["parity_differences"]:
            print(f"   n {d['n']} -> {d['n_next']} (same parity): C1 {d['c1']:.4g}")
        for row in rep.get("sandwich", []):
            print(f"   n {row['n']}: sup|u| {row['sup_norm']:.2f} in [{rep['norm_lower']:.2f}, "
                  f"{rep['norm_upper']:.2f}] {row['ok']}")
        for e in rep["errors"]:
            print(f"   n {e['n']} failed: {e['error']}")


if __name__ == "__main__":
    main()
