"""Don't-care intervals: g(x) = min(x, 1/2) with X uniform.

Half of the input range maps to the same output, so a variable-rate coder
first sends one bit saying which half X is in, then spends the remaining
rate only on [0, 1/2] where it counts twice.  Distortion then falls as
2^-4R instead of 2^-2R.
"""

import argparse

from dfsq.dontcare import detect, simulate_dontcare
from dfsq.functions import MinClip, sensitivity_profile
from dfsq.sources import uniform_source


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=2**18)
    args = ap.parse_args()
    g, src = MinClip(), uniform_source(1)
    spec = detect(sensitivity_profile(g, src, 0), src)
    print(f"detected intervals {spec.intervals}, P(A)={spec.p_A:.4f}, rho={spec.rho:.3f}, "
          f"H(I)={spec.indicator_entropy:.4f} bits")
    for regime, pred in (("variable", "(1/6) 2^-4R"), ("fixed", "(1/96) 2^-2R")):
        sw = simulate_dontcare(spec, src, g, [4, 5, 6, 7, 8], args.samples, 0, regime)
        print(f"\n{regime} rate: fitted slope {sw.slope:.3f}, constant {sw.constant:.5f} "
              f"(predicted {pred})")
        for r in sw.reports:
            print(f"  R={r.R:g}  K={r.K:g}  D_emp={r.D_emp:.4e}  D_emp/D_hr={r.ratio:.4f}")


if __name__ == "__main__":
    main()
