#!/usr/bin/env python3
"""Batch-size sweep on a piecewise non-stationary synthetic environment.

Writes sweep.csv (per cell) and sweep_agg.csv (mean and stderr per batch
size) under --out; feed sweep.csv to plots/plot_sweep_bars.py.
"""

import argparse
import json
import sys
import tempfile

from batchcf.cli import run_cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/sweep")
    parser.add_argument("--seeds", type=int, nargs="+", default=list(range(10)))
    parser.add_argument("--jobs", type=int, default=2)
    args = parser.parse_args()
    segments = 6
    seg_len = 100
    horizon = segments * seg_len
    config = {
        "mode": "sweep",
        "model": {"n_users": 40, "n_items": 2000, "n_types": 2, "delta": 0.5,
                  "mu": 0.5, "gamma1": 0.1, "gamma2": 0.9, "nu": 0.4},
        "horizon": horizon,
        "seeds": args.seeds,
        "schedule": {"kind": "piecewise", "segment_lengths": [seg_len] * segments},
        "overrides": {"t_static": 10, "delta_t": horizon, "p_explore": 0.15},
        "sweep": {"delta_t_list": [50, 100, 150, 200, 300, 600]},
    }
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(config, fh)
        path = fh.name
    return run_cli(["sweep", "--config", path, "--out", args.out,
                    "--jobs", str(args.jobs)])


if __name__ == "__main__":
    sys.exit(main())
