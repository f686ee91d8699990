#!/usr/bin/env python3
"""Overlap-modeling comparison at the dense-cluster operating point:
exact Monte Carlo vs the closed-form engine and its two ablations."""

import argparse

from uccfn import cli

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--out", default="out/fig3")
    ap.add_argument("--jobs", type=int, default=2)
    args = ap.parse_args()
    raise SystemExit(cli.main([
        "figure", "fig3", "--trials", str(args.trials), "--out", args.out,
        "--jobs", str(args.jobs), "--theta-step", "1.0",
    ]))
