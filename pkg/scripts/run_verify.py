#!/usr/bin/env python3
"""Assumption checks plus the Monte-Carlo bound/recovery suites on a
generated model.  Writes verify.json under --out."""

import argparse
import json
import sys
import tempfile

from batchcf.cli import run_cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/verify")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=300)
    args = parser.parse_args()
    config = {
        "mode": "verify",
        "model": {"n_users": 20, "n_items": 3500, "n_types": 2, "delta": 0.3,
                  "mu": 0.5, "gamma1": 0.1, "gamma2": 0.9, "nu": 0.4},
        "horizon": 1,
        "delta_tol": 0.2,
        "seeds": [args.seed],
        "verify": {"n_pairs": 20, "items_per_pair": 10000, "trials": args.trials},
    }
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(config, fh)
        path = fh.name
    return run_cli(["verify", "--config", path, "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())
