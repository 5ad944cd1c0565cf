"""Shared CSV/figure plumbing for the plot scripts."""

import csv

import matplotlib

matplotlib.use("Agg")


def read_csv_with_fingerprint(path):
    """Returns (fingerprint or None, header row, data rows)."""
    fingerprint = None
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if first.startswith("#"):
            for token in first[1:].split():
                if token.startswith("fingerprint="):
                    fingerprint = token.split("=", 1)[1]
        else:
            fh.seek(0)
        reader = csv.reader(fh)
        header = next(reader, None)
        rows = [r for r in reader if r]
    if header is None:
        raise ValueError(f"{path}: no header row")
    return fingerprint, header, rows


def require_columns(header, needed, path):
    missing = [c for c in needed if c not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    return {c: header.index(c) for c in needed}


def caption(fig, fingerprint):
    if fingerprint:
        fig.text(0.99, 0.01, f"fingerprint={fingerprint}",
                 ha="right", va="bottom", fontsize=6, color="gray")


def save_both(fig, out_prefix):
    paths = []
    for ext in ("png", "svg"):
        p = f"{out_prefix}.{ext}"
        fig.savefig(p)
        paths.append(p)
    return paths
