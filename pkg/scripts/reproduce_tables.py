#!/usr/bin/env python3
#
# Regenerate the headline tables: threshold ratios, Newton load recovery,
# and discrete-vs-continuum voltage convergence.

import argparse

from linestab.specfun import erfi
from linestab.stability import convergence_report, newton_solve_a, ratio_P
from linestab.powerflow import distflow_sensitivity

RATIO_DELTAS = [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5]
NEWTON_LOADS = [0.01, 0.05, 0.1]
SIZES = [10, 10**2, 10**3, 10**4, 10**5]


def ratio_table():
    print("threshold ratio P(delta) = N(N+1) lambda_N^D / lambda_N^L, large-N limit")
    print(f"{'delta':>8} {'ratio':>10}")
    for d in RATIO_DELTAS:
        print(f"{d:>8.2f} {ratio_P(d):>10.4f}")
    print()


def newton_tables():
    for a in NEWTON_LOADS:
        print(f"uniform load recovery at a = {a}")
        print(f"{'n':>8} {'drop cap':>19} {'a0':>19} {'a recovered':>19} {'steps':>6}")
        for n in SIZES:
            v = distflow_sensitivity(a, n)[0]
            trace = newton_solve_a(n, 1.0 - 1.0 / v)
            print(
                f"{n:>8} {v:>19.15f} {trace.a0:>19.15f}"
                f" {trace.a_final:>19.15f} {trace.iterations:>6}"
            )
        print()


def continuum_table(a):
    print(f"discrete root voltage vs continuum limit at a = {a}")
    print(f"{'n':>8} {'v_discrete':>13} {'v_continuum':>13} {'abs err':>12} {'rel err':>12}")
    for rep in convergence_report(a, SIZES):
        print(
            f"{rep.n:>8} {rep.v_discrete:>13.8f} {rep.v_continuum:>13.8f}"
            f" {rep.abs_err:>12.4e} {rep.rel_err:>12.4e}"
        )
    print()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", type=float, default=0.05,
                    help="uniform scaled load for the convergence table")
    args = ap.parse_args()

    ratio_table()
    newton_tables()
    continuum_table(args.a)
    # sanity anchor for the ratio endpoints: 1 at delta -> 0 and
    # (pi/6) erfi(sqrt(ln 2))^2 at delta = 1/2
    import math
    endpoint = (math.pi / 6.0) * erfi(math.sqrt(math.log(2.0))) ** 2
    print(f"ratio endpoint at delta = 0.5: {endpoint:.6f}")


if __name__ == "__main__":
    main()
