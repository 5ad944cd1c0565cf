#!/usr/bin/env python3
"""Bar chart of mean accumulated reward per batch size, with standard-error
whiskers, from a per-cell sweep CSV.

Input: sweep.csv with columns delta_t, seed, acc_reward, reward_likable,
status; rows whose status is not "ok" are skipped.
"""

import argparse
import math
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from plots._common import caption, read_csv_with_fingerprint, require_columns, save_both


def load_sweep(path):
    """-> (fingerprint, [(delta_t, mean, stderr, n)] sorted by delta_t)."""
    fingerprint, header, rows = read_csv_with_fingerprint(path)
    col = require_columns(header, ["delta_t", "acc_reward", "status"], path)
    by_dt = {}
    for row in rows:
        if row[col["status"]] != "ok":
            continue
        by_dt.setdefault(int(row[col["delta_t"]]), []).append(
            float(row[col["acc_reward"]]))
    if not by_dt:
        raise ValueError(f"{path}: no successful sweep cells")
    agg = []
    for dt in sorted(by_dt):
        vals = by_dt[dt]
        mean = sum(vals) / len(vals)
        if len(vals) > 1:
            var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
            stderr = math.sqrt(var / len(vals))
        else:
            stderr = 0.0
        agg.append((dt, mean, stderr, len(vals)))
    return fingerprint, agg


def render(agg, fingerprint=None):
    fig, ax = plt.subplots(figsize=(7, 4))
    xs = range(len(agg))
    ax.bar(xs, [m for _, m, _, _ in agg],
           yerr=[s for _, _, s, _ in agg], capsize=3)
    ax.set_xticks(list(xs))
    ax.set_xticklabels([str(dt) for dt, _, _, _ in agg])
    ax.set_xlabel("batch size")
    ax.set_ylabel("mean accumulated reward")
    caption(fig, fingerprint)
    fig.tight_layout()
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--in", dest="inp", required=True)
    parser.add_argument("--out", required=True, help="output path prefix (writes .png and .svg)")
    args = parser.parse_args(argv)
    fingerprint, agg = load_sweep(args.inp)
    fig = render(agg, fingerprint)
    for p in save_both(fig, args.out):
        print(f"wrote {p}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
