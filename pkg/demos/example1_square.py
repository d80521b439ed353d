"""Quantizing X uniform on [0, 1] when only X**2 matters.

Three quantizers spend the same rate: an ordinary uniform quantizer, the
fixed-rate functional design (cells shrink where the slope 2x is large) and
the variable-rate functional design.  The printed ratios compare the
Monte Carlo distortion with the high-resolution predictions
1/9, 9/125 and e^-2/3 (all times 2^-2R).
"""

import argparse
import math

from dfsq.functions import Square
from dfsq.pipeline import ordinary_distortion, simulate
from dfsq.sources import uniform_source


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=2**18)
    ap.add_argument("--rates", type=int, nargs="+", default=[4, 6, 8, 10])
    args = ap.parse_args()

    g, src = Square(), uniform_source(1)
    print(f"{'R':>3} {'ordinary':>10} {'fixed':>10} {'variable':>10}   (D_emp / D_hr)")
    for R in args.rates:
        scale = 2.0 ** (-2 * R)
        ordv = ordinary_distortion(g, src, R, args.samples).D_emp / (scale / 9)
        fr = simulate(g, src, "fixed", R, args.samples).distortion.D_emp / (9 / 125 * scale)
        vr = simulate(g, src, "variable", R, args.samples)
        vrr = vr.distortion.D_emp / (math.exp(-2) / 3 * scale)
        print(f"{R:>3} {ordv:>10.4f} {fr:>10.4f} {vrr:>10.4f}   K_vr={vr.quantizer.K:g}")
    print("\nAll three ratios approach 1 as the rate grows.  The variable-rate design")
    print("buys more cells (K above 2^R) because its cells are not equiprobable.")


if __name__ == "__main__":
    main()
