"""Per-round, per-user run records and their CSV form."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

PHASES = ("reference_test", "test", "explore", "exploit", "fallback")
PHASE_CODE = {name: i for i, name in enumerate(PHASES)}

LIKABLE_NA = -1  # likable flag for environments without ground truth


@dataclass
class RunTrace:
    n_users: int
    seed: int
    round: np.ndarray
    batch: np.ndarray
    user: np.ndarray
    phase: np.ndarray  # codes into PHASES
    item: np.ndarray
    response: np.ndarray  # {-1, 0, +1}
    likable: np.ndarray  # {0, 1, LIKABLE_NA}
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.round.shape[0]

    def equals(self, other: "RunTrace") -> bool:
        return (
            self.n_users == other.n_users
            and len(self) == len(other)
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("round", "batch", "user", "phase", "item", "response", "likable")
            )
        )

    def to_csv(self, path, fingerprint: str | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if fingerprint is not None:
                fh.write(f"# fingerprint={fingerprint} seed={self.seed}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["round", "batch", "user", "phase", "item", "response", "likable"])
            for k in range(len(self)):
                lik = self.likable[k]
                writer.writerow([
                    self.round[k], self.batch[k], self.user[k],
                    PHASES[self.phase[k]], self.item[k], self.response[k],
                    "NA" if lik == LIKABLE_NA else lik,
                ])


class TraceBuilder:
    def __init__(self):
        self._rows: list[tuple] = []

    def add(self, t: int, batch: int, user: int, phase: int, item: int,
            response: int, likable: int) -> None:
        self._rows.append((t, batch, user, phase, item, response, likable))

    def build(self, n_users: int, seed: int, meta: dict | None = None) -> RunTrace:
        if self._rows:
            cols = list(zip(*self._rows))
        else:
            cols = [[] for _ in range(7)]
        return RunTrace(
            n_users=n_users,
            seed=seed,
            round=np.asarray(cols[0], dtype=np.int64),
            batch=np.asarray(cols[1], dtype=np.int64),
            user=np.asarray(cols[2], dtype=np.int64),
            phase=np.asarray(cols[3], dtype=np.int8),
            item=np.asarray(cols[4], dtype=np.int64),
            response=np.asarray(cols[5], dtype=np.int8),
            likable=np.asarray(cols[6], dtype=np.int8),
            meta=dict(meta or {}),
        )
