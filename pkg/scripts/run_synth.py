#!/usr/bin/env python3
"""Run the engine plus both baselines on a static synthetic environment.

Writes trace_{seed}.csv, trace_random_{seed}.csv, trace_static_{seed}.csv
under --out and prints one summary line per seed.
"""

import argparse
import json
import sys
import tempfile

from batchcf.cli import run_cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/synth")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--horizon", type=int, default=400)
    parser.add_argument("--n-users", type=int, default=30)
    parser.add_argument("--n-items", type=int, default=1500)
    args = parser.parse_args()
    config = {
        "mode": "synth",
        "model": {"n_users": args.n_users, "n_items": args.n_items,
                  "n_types": 2, "delta": 0.5, "mu": 0.5,
                  "gamma1": 0.1, "gamma2": 0.9, "nu": 0.4},
        "horizon": args.horizon,
        "seeds": [args.seed],
        "overrides": {"t_static": 30, "delta_t": args.horizon},
    }
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(config, fh)
        path = fh.name
    return run_cli(["synth", "--config", path, "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())
