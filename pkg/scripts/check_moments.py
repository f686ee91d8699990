#!/usr/bin/env python3
"""Side-by-side closed-form vs Monte Carlo moments for one config file."""

import argparse

from uccfn import analytic, simulator
from uccfn.config import load_params

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config")
    ap.add_argument("--trials", type=int, default=50_000)
    ap.add_argument("--model", default="gamma_approx",
                    choices=("exact", "gamma_approx"))
    ap.add_argument("--jobs", type=int, default=2)
    args = ap.parse_args()
    params = load_params(args.config)
    stats = simulator.run_trials(params, args.trials, model=args.model,
                                 n_jobs=args.jobs)
    rows = [
        ("signal+intra", analytic.moments_signal_plus_intra(params),
         stats.moments["signal_plus_intra"]),
        ("inter-cluster", analytic.moments_inter_cluster(params),
         stats.moments["inter_cluster"]),
        ("total", analytic.moments_total_power(params), stats.moments["total"]),
    ]
    print(f"{'component':>14} {'mean(analytic)':>15} {'mean(mc)':>12} "
          f"{'dev':>7} {'var(analytic)':>14} {'var(mc)':>12} {'dev':>7}")
    for name, (am, av), (sm, sv) in rows:
        print(f"{name:>14} {am:15.6e} {sm:12.4e} {abs(am-sm)/sm:7.2%} "
              f"{av:14.6e} {sv:12.4e} {abs(av-sv)/sv:7.2%}")
