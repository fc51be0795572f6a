"""phi^(+/-)(0, len) / len^3 against interval length, next to the limit value
-(margin)^2/24 and the epsilon bracket around it.

    python3 scripts/energy_bracket_sweep.py --eps 0.01 --out bracket.csv
"""
import argparse
import csv
import math

import numpy as np

from dualnehari.problem import arctan_reaction, constant_forcing, margin_for_sign, trig_forcing
from dualnehari.signed import SolverOptions, make_bracket, minimize_signed

FORCINGS = {
    "0": constant_forcing(0.0),
    "0.3": constant_forcing(0.3),
    "0.3+0.5cos t": trig_forcing(0.3, [(1.0, 0.5, 0.0)], period=2 * math.pi),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, default=0.01)
    ap.add_argument("--h", type=float, default=0.05)
    ap.add_argument("--lengths", type=float, nargs="+", default=[5, 10, 15, 20, 30, 40, 60, 80, 120])
    ap.add_argument("--out", default="energy_bracket.csv")
    args = ap.parse_args()

    g = arctan_reaction()
    opts = SolverOptions(h_target=args.h)
    rows = []
    for name, p in FORCINGS.items():
        br = make_bracket(g, p, args.eps)
        for sign in (1, -1):
            lo, hi = br.bounds(sign)
            limit = -margin_for_sign(g, p, sign) ** 2 / 24
            for length in args.lengths:
                r = minimize_signed(0.0, length, sign, g, p, opts)
                ratio = r.phi / length ** 3
                rows.append({"forcing": name, "sign": sign, "length": length, "ratio": ratio, "limit": limit,
                             "lower": lo, "upper": hi, "inside": lo <= ratio <= hi,
                             "active_set": r.active_set_size, "lambda_min": r.lambda_min})
            first = next((row["length"] for row in rows[::-1] if row["forcing"] == name
                          and row["sign"] == sign and not row["inside"]), None)
            print(f"p = {name:13s} sign {sign:+d}: limit {limit:.6f}, bracket [{lo:.5f}, {hi:.5f}], "
                  f"last length outside: {first}")

    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    ratios = np.array([r["ratio"] for r in rows])
    print(f"{len(rows)} rows written to {args.out}; ratio range [{ratios.min():.5f}, {ratios.max():.5f}]")


if __name__ == "__main__":
    main()
