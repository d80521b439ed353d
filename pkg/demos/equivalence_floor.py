"""Binning only helps when the function really cannot tell the inputs apart.

sep_parabola: g = x1 (3/4 - x1)(1 - x2) gives the same value at x1 and
3/4 - x1, so folding those together costs nothing and distortion keeps
falling at 6 dB per bit.  max(x1, x2) has no such pairs (the scan below
certifies it on a 64 x 64 grid); forcing the mirror fold anyway leaves
a distortion floor that more rate cannot remove.
"""

import argparse

from dfsq.equivalence import (binned_family, distortion_floor_demo, mirror_binned_companders,
                              rate_sweep, sep_parabola_companders)
from dfsq.functions import Max, SepParabola
from dfsq.sources import uniform_source


def show(sweep):
    for R, D in zip(sweep.rates, sweep.D):
        print(f"  R={R:g}  D={D:.4e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=2**17)
    args = ap.parse_args()
    src = uniform_source(2)
    rates = (3, 4, 5, 6)
    demo = distortion_floor_demo(Max(2), src, mirror_binned_companders(2), rates,
                                 samples=args.samples)
    print(f"max: equivalence-free certificate {demo.certificate.equivalence_free}")
    print("max, forced mirror binning:")
    show(demo.binned)
    print("max, regular design:")
    show(demo.regular)
    sp = SepParabola()
    sw = rate_sweep("sep_parabola", binned_family(sep_parabola_companders(sp, src)), sp, src,
                    rates, args.samples, 0, None)
    print("sep_parabola, binned with its own equivalence classes:")
    show(sw)
    print(f"\nplateau: max binned {demo.binned.plateaus}, sep_parabola binned {sw.plateaus}")


if __name__ == "__main__":
    main()
