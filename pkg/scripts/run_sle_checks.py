#!/usr/bin/env python3
"""SDE-side experiments: martingale flatness, slit-map cross-check and the
conditioned-decomposition comparison (small budgets; raise --samples for
acceptance-scale runs)."""

import argparse

from dimertree.cli import ExperimentConfig, run

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/sle")
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    for kind, options in (
        ("hsle-martingale", {"T": 0.04, "dt": 1e-4, "record_every": 20}),
        ("slit-map-check", {"radius": 64}),
        ("decomposition-test",
         {"quad": [1.0, 1.5], "window": [2.2, 2.4], "dt": 5e-3, "T": 30.0}),
    ):
        cfg = ExperimentConfig(kind=kind, samples=args.samples,
                               seed=args.seed, out=args.out, options=options)
        rc = run(cfg)
        print(kind, "->", "pass" if rc == 0 else "FAIL")
