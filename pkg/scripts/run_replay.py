#!/usr/bin/env python3
"""Ingest a ratings CSV pair, build the binned genre preferences and the
rating-grid replay environment, then run the engine on it.

Writes binned.csv and trace_{seed}.csv under --out.
"""

import argparse
import json
import sys
import tempfile

from batchcf.cli import run_cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--ratings", required=True, help="userId,movieId,rating,timestamp CSV")
    parser.add_argument("--movies", required=True, help="movieId,title,genres CSV")
    parser.add_argument("--out", default="results/replay")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--horizon", type=int, default=500)
    parser.add_argument("--top-n", type=int, default=250)
    parser.add_argument("--top-m", type=int, default=500)
    args = parser.parse_args()
    config = {
        "mode": "replay",
        "model": {"n_users": args.top_n, "n_items": args.top_m, "n_types": 2,
                  "delta": 0.5, "mu": 0.5, "gamma1": 0.1, "gamma2": 0.9, "nu": 0.4},
        "horizon": args.horizon,
        "seeds": [args.seed],
        "overrides": {"t_static": 10, "delta_t": args.horizon},
        "replay": {"min_ratings": 225, "bins": 15, "top_n": args.top_n,
                   "top_m": args.top_m, "avg_low": 2.5, "avg_high": 3.5},
        "paths": {"ratings": args.ratings, "movies": args.movies},
    }
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(config, fh)
        path = fh.name
    return run_cli(["replay", "--config", path, "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())
