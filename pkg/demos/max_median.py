"""How much functional design helps for the maximum and the median.

For each n the script prints the predicted gain over ordinary uniform
quantization (fixed and variable rate) and one Monte Carlo check at the
average rate R_bar.
"""

import argparse
import math

from dfsq.design import DesignProblem, design
from dfsq.functions import Max, Median
from dfsq.pipeline import ordinary_distortion, simulate
from dfsq.sources import uniform_source


def row(g, n, R, samples):
    src = uniform_source(n)
    base = ordinary_distortion(g, src, R, samples).D_emp
    out = [f"{g.name} n={n}"]
    for regime in ("fixed", "variable"):
        res = design(DesignProblem(src, g, regime, R))
        pred = res.predicted(R) / (2.0 ** (-2 * R) / 12)
        emp = simulate(g, src, regime, R, samples, result=res).distortion.D_emp / base
        out += [pred, emp]
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=2**17)
    ap.add_argument("--rate", type=float, default=7)
    args = ap.parse_args()
    print(f"{'function':<12} {'fr pred':>9} {'fr emp':>9} {'vr pred':>9} {'vr emp':>9}"
          "   (distortion / ordinary)")
    for g in [Max(n) for n in (1, 2, 4, 8)] + [Median(n) for n in (3, 5, 7)]:
        name, *vals = row(g, g.n, args.rate, args.samples)
        print(f"{name:<12} " + " ".join(f"{v:>9.4f}" for v in vals))
    print("\nFor the maximum the variable-rate gain follows n e^(1-n): the designer spends")
    print("almost nothing on variables that rarely decide the maximum.")
    print(f"n e^(1-n) at n=4: {4 * math.exp(-3):.4f}")


if __name__ == "__main__":
    main()
