"""State counts and verdicts of exhaustive crusader-agreement exploration.

By default this covers the four input patterns on n=4 with p4 silent, at
bound 40, plus the fault-free system at a few shallow bounds. The numbers
show why the fault-free system is only explored shallowly.
"""

import argparse
import time

from asymtrust.fixtures import bca_explore, bca_n4
from asymtrust.properties import check_bca
from asymtrust.sim.explorer import ExplosionGuard, explore
from asymtrust.sim.scenario import Schedule


def show(label, sc, bound, cap):
    t0 = time.perf_counter()
    try:
        res = explore(sc, bound, cap=cap)
    except ExplosionGuard as exc:
        print(f"{label:<28} bound {bound:>3}: gave up, {exc}")
        return
    verdicts = " ".join(f"{r.prop.split('.')[1]}={r.verdict.value}" for r in check_bca(res))
    print(f"{label:<28} bound {bound:>3}: {res.states:>8} states {res.leaves:>7} leaves "
          f"{time.perf_counter() - t0:7.1f}s  {verdicts}", flush=True)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bound", type=int, default=40)
    ap.add_argument("--fault-free", default="6,8,10", help="comma-separated bounds for four correct processes")
    ap.add_argument("--cap", type=int, default=5_000_000)
    args = ap.parse_args()
    for inputs in ((0, 0, 1), (0, 1, 1), (0, 0, 0), (1, 1, 1)):
        show(f"p4 silent, inputs {''.join(map(str, inputs))}", bca_explore(inputs), args.bound, args.cap)
    for b in (int(x) for x in args.fault_free.split(",") if x):
        sc = bca_n4((0, 0, 1, 1), schedule=Schedule.FIFO_ROUND_ROBIN).replace(horizon=b)
        show("fault-free, inputs 0011", sc, b, args.cap)


if __name__ == "__main__":
    main()
