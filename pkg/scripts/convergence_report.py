#!/usr/bin/env python3
"""Print the manufactured-solution refinement ladder as a table."""

import argparse

from axicyl.manufactured import mms_convergence_study


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--n-base", type=int, default=64)
    ap.add_argument("--t-end", type=float, default=0.25)
    args = ap.parse_args()
    rows = mms_convergence_study(levels=args.levels, n_base=args.n_base, t_end=args.t_end)
    print(f"{'n':>5} {'h':>10} {'dt':>10} {'err_Gamma':>11} {'err_omega':>11} {'order':>7}")
    for lv in rows:
        order = "" if lv.order != lv.order else f"{lv.order:.3f}"
        print(
            f"{lv.n:>5} {lv.h:>10.2e} {lv.dt:>10.2e} "
            f"{lv.err_gamma:>11.3e} {lv.err_omega:>11.3e} {order:>7}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
