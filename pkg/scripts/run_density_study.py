#!/usr/bin/env python3
"""Marginal distributions and joint-bound sweeps across RRH densities
(single-antenna, lightly loaded deployment)."""

import argparse

from uccfn import cli

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/density")
    args = ap.parse_args()
    rc = cli.main(["figure", "fig5", "--out", args.out, "--theta-step", "1.0",
                   "--thetap-step", "1.0"])
    rc = rc or cli.main(["sweep", "--theta", "5", "--theta-p", "-55",
                         "--out", args.out])
    rc = rc or cli.main(["sweep", "--theta", "10", "--theta-p", "-52",
                         "--out", args.out + "/alt_point"])
    raise SystemExit(rc)
