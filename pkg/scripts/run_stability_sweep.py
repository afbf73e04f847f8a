#!/usr/bin/env python3
#
# Bracket the stability threshold empirically: simulate each feeder at
# fractions and multiples of the predicted critical rate and tabulate the
# verdicts. Slow at defaults (~2 min); shrink --min-events for a smoke run.

import argparse
import time

from linestab.allocator import FairnessSpec
from linestab.powerflow import NetworkConfig, PowerModel
from linestab.simulator import SimConfig, stability_probe
from linestab.stability import lambda_dist, lambda_lin


def sweep(n, delta, model, multipliers, reps, min_events, seed, alpha):
    net = NetworkConfig(n, 1.0, delta)
    lam = lambda_lin(net) if model is PowerModel.LINDIST else lambda_dist(net)
    base = SimConfig(
        network=net,
        fairness=FairnessSpec(alpha),
        model=model,
        arrival_rate=lam,
        horizon=1.0,
        seed=seed,
        sample_interval=1.0,
    )
    return lam, stability_probe(base, multipliers, replications=reps,
                                min_events=min_events)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[3, 5])
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--multipliers", type=float, nargs="+", default=[0.5, 2.0])
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--min-events", type=float, default=1e5)
    ap.add_argument("--seed", type=int, default=2026)
    args = ap.parse_args()

    hdr = f"{'n':>4} {'model':>9} {'mult':>6} {'rate':>12} {'verdict':>13} {'votes':>7} {'drift':>11} {'peak':>9}"
    print(hdr)
    t0 = time.perf_counter()
    for n in args.n:
        for model in (PowerModel.LINDIST, PowerModel.DISTFLOW):
            lam, rows = sweep(n, args.delta, model, tuple(args.multipliers),
                              args.reps, int(args.min_events), args.seed,
                              args.alpha)
            for row in rows:
                votes = f"{row.stable_votes}s/{row.unstable_votes}u"
                print(
                    f"{n:>4} {model.value:>9} {row.multiplier:>6.2f}"
                    f" {row.arrival_rate:>12.6g} {row.classification.value:>13}"
                    f" {votes:>7} {max(row.drifts):>11.3e}"
                    f" {max(row.max_queues):>9.6g}"
                )
    print(f"total {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
