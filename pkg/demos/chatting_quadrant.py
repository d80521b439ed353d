"""One bit of chat between encoders.

The slope of g in x1 is 1 or L depending on the quadrant.  If encoder 2
tells encoder 1 whether x2 <= 1/2, encoder 1 can place its fine cells
where the slope is L.  Variable rate gains a factor (L^2 + 1) / (2 L); fixed
rate can never gain more than 4 (one extra bit would do as well).
"""

import argparse

from dfsq.chatting import ChatScenario, chat_constants, random_scenarios, simulate_chat
from dfsq.functions import Quadrant
from dfsq.sources import uniform_source


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=2**18)
    ap.add_argument("--rate", type=float, default=8)
    args = ap.parse_args()
    src = uniform_source(2)
    print(f"{'L':>5} {'vr pred':>9} {'vr emp':>9} {'fr pred':>9} {'fr emp':>9}")
    for L in (1, 2, 4, 16):
        sc = ChatScenario(Quadrant(L), src)
        vr, fr = chat_constants(sc, "variable"), chat_constants(sc, "fixed")
        ev = simulate_chat(sc, args.rate, args.samples, 0, "variable")
        ef = simulate_chat(sc, args.rate, args.samples, 0, "fixed")
        print(f"{L:>5} {vr.ratio:>9.3f} {ev.ratio:>9.3f} {fr.ratio:>9.3f} {ef.ratio:>9.3f}")
    worst = max(chat_constants(sc, "fixed").ratio for sc in random_scenarios(20))
    print(f"\nlargest fixed-rate chat gain over 20 random slope grids: {worst:.3f} (bound 4)")


if __name__ == "__main__":
    main()
