"""Section gaps of the unit-speed flow on the flat torus.

For rational slopes the orbit closes after q wraps and the largest gap on
the theta = 0 section stays at 2 pi / q.  For irrational slopes the largest
gap keeps shrinking as wraps grow (three-gap theorem: at most three distinct
gap lengths at any time).

    python scripts/torus_flow_gaps.py --wraps 10 100 1000 4000
"""

import argparse
import math

import numpy as np

from gft.killing import integrate_flow

SLOPES = {
    "3/4": 0.75,
    "1/sqrt2": 1 / math.sqrt(2),
    "golden": (math.sqrt(5) - 1) / 2,
    "sqrt3-1": math.sqrt(3) - 1,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--wraps", type=int, nargs="+", default=[10, 100, 1000, 4000])
    args = ap.parse_args()
    print(f"{'slope':>9} {'wraps':>6} {'closed':>7} {'winding':>8} {'max gap':>11} {'distinct':>8}")
    for name, s in SLOPES.items():
        for w in args.wraps:
            tr = integrate_flow(s, (0.0, 0.0), w)
            distinct = np.unique(np.round(tr.section_gaps, 7)).size if tr.section_gaps.size else 0
            wind = f"{tr.winding[0]}/{tr.winding[1]}" if tr.winding else "-"
            print(f"{name:>9} {w:>6} {str(tr.closed):>7} {wind:>8} {tr.max_gap:>11.4e} {distinct:>8}")


if __name__ == "__main__":
    main()
