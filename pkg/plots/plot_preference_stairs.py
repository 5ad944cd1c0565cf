#!/usr/bin/env python3
"""Step plot of per-bin genre like-probabilities for selected users.

Input: binned.csv with columns user, bin, a, r, p_action_only.
"""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from plots._common import caption, read_csv_with_fingerprint, require_columns, save_both


def load_binned(path):
    """-> (fingerprint, {user id: (sorted bins, probabilities)})."""
    fingerprint, header, rows = read_csv_with_fingerprint(path)
    col = require_columns(header, ["user", "bin", "p_action_only"], path)
    per_user = {}
    for row in rows:
        u = int(row[col["user"]])
        per_user.setdefault(u, []).append(
            (int(row[col["bin"]]), float(row[col["p_action_only"]])))
    data = {}
    for u, pts in per_user.items():
        pts.sort()
        data[u] = ([b for b, _ in pts], [p for _, p in pts])
    return fingerprint, data


def render(data, users, fingerprint=None):
    if not users:
        raise ValueError("no users selected")
    missing = [u for u in users if u not in data]
    if missing:
        raise ValueError(f"users {missing} not present in the input")
    fig, ax = plt.subplots(figsize=(7, 4))
    for u in users:
        bins, probs = data[u]
        ax.step(bins, probs, where="post", label=f"user {u}")
    ax.set_xlabel("bin")
    ax.set_ylabel("first-genre like probability")
    ax.set_ylim(-0.05, 1.05)
    ax.legend()
    caption(fig, fingerprint)
    fig.tight_layout()
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--in", dest="inp", required=True)
    parser.add_argument("--out", required=True, help="output path prefix (writes .png and .svg)")
    parser.add_argument("--users", type=int, nargs="*", default=None)
    args = parser.parse_args(argv)
    fingerprint, data = load_binned(args.inp)
    users = args.users if args.users else sorted(data)[:5]
    fig = render(data, users, fingerprint)
    for p in save_both(fig, args.out):
        print(f"wrote {p}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
