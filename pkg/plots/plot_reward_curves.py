#!/usr/bin/env python3
"""Cumulative accumulated-reward curves from one or more trace CSVs,
overlaid with one label per trace.

Input: trace.csv with columns round, batch, user, phase, item, response,
likable.  The curve at round t is (1/N) * sum of responses up to t.
"""

import argparse
import sys
import warnings

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from plots._common import caption, read_csv_with_fingerprint, require_columns, save_both


def load_trace(path):
    """-> (fingerprint, rounds 1..T, cumulative acc-reward per round)."""
    fingerprint, header, rows = read_csv_with_fingerprint(path)
    col = require_columns(header, ["round", "user", "response"], path)
    rounds = np.array([int(r[col["round"]]) for r in rows])
    responses = np.array([int(r[col["response"]]) for r in rows])
    users = {r[col["user"]] for r in rows}
    n = max(len(users), 1)
    horizon = int(rounds.max(initial=0))
    per_round = np.bincount(rounds, weights=responses, minlength=horizon + 1)[1:]
    return fingerprint, np.arange(1, horizon + 1), np.cumsum(per_round) / n


def render(curves, labels, fingerprint=None):
    """curves: list of (rounds, cumulative) pairs aligned with labels."""
    if len(curves) != len(labels):
        raise ValueError("one label per trace required")
    horizons = [len(r) for r, _ in curves]
    t_min = min(horizons)
    if len(set(horizons)) > 1:
        warnings.warn(f"mismatched horizons {horizons}; truncating to {t_min}")
    fig, ax = plt.subplots(figsize=(7, 4))
    for (rounds, cum), label in zip(curves, labels):
        ax.plot(rounds[:t_min], cum[:t_min], label=label)
    ax.set_xlabel("round")
    ax.set_ylabel("accumulated reward")
    ax.legend()
    caption(fig, fingerprint)
    fig.tight_layout()
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True)
    parser.add_argument("--out", required=True, help="output path prefix (writes .png and .svg)")
    parser.add_argument("--labels", nargs="*", default=None)
    args = parser.parse_args(argv)
    labels = args.labels if args.labels else args.inputs
    loaded = [load_trace(p) for p in args.inputs]
    fig = render([(r, c) for _, r, c in loaded], labels, loaded[0][0])
    for p in save_both(fig, args.out):
        print(f"wrote {p}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
