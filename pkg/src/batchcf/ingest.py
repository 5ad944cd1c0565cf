"""Ratings-log parsing, population filtering, timestamp binning, and the
rating-grid replay environment.

The input is a MovieLens-style pair of CSVs: ratings with columns
userId,movieId,rating,timestamp and a movie table with pipe-delimited genres.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .harness import ReplayEnv, SizeError


class ParseError(RuntimeError):
    """Unreadable input or too many malformed rows."""


@dataclass(frozen=True)
class RatingsLog:
    """Parsed rating events plus the item -> genre-tag map.

    (user, item) pairs are unique; duplicates count as malformed on parse.
    """

    users: np.ndarray  # int ids
    items: np.ndarray
    stars: np.ndarray  # float in [0.5, 5]
    timestamps: np.ndarray  # int seconds
    genres: dict = field(default_factory=dict)  # item id -> frozenset of tags
    malformed: int = 0

    def __len__(self) -> int:
        return self.users.shape[0]


@dataclass(frozen=True)
class BinnedPreferences:
    """Per-user, per-bin counts of the two tracked genre tags and the
    induced like-probabilities for the four tag classes.

    The ratio classes are a/(a+r) and r/(a+r); a bin with a = r = 0 gets 1/2
    for both.  The both-tags class is always 1 and the neither class 0.
    """

    users: tuple
    a_counts: np.ndarray  # (n_users, bins)
    r_counts: np.ndarray
    bin_sizes: np.ndarray  # (n_users, bins)

    @property
    def n_bins(self) -> int:
        return self.a_counts.shape[1]

    @property
    def p_first_only(self) -> np.ndarray:
        denom = self.a_counts + self.r_counts
        return np.where(denom > 0, self.a_counts / np.maximum(denom, 1), 0.5)

    @property
    def p_second_only(self) -> np.ndarray:
        denom = self.a_counts + self.r_counts
        return np.where(denom > 0, self.r_counts / np.maximum(denom, 1), 0.5)

    p_both = 1.0
    p_neither = 0.0

    def to_csv(self, path, fingerprint: str | None = None) -> None:
        p = self.p_first_only
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if fingerprint is not None:
                fh.write(f"# fingerprint={fingerprint}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["user", "bin", "a", "r", "p_action_only"])
            for ui, u in enumerate(self.users):
                for b in range(self.n_bins):
                    writer.writerow([u, b, self.a_counts[ui, b],
                                     self.r_counts[ui, b], repr(float(p[ui, b]))])


def _parse_movies(path) -> dict:
    genres: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            try:
                mid = int(row["movieId"])
            except (KeyError, TypeError, ValueError):
                continue
            raw = (row.get("genres") or "").strip()
            tags = frozenset(g for g in raw.split("|") if g and g != "(no genres listed)")
            genres[mid] = tags
    return genres


def load_ratings(ratings_path, movies_path=None, malformed_threshold: float = 0.05) -> RatingsLog:
    """Parse the ratings CSV (and optional movie/genre table).

    Malformed rows (bad types, stars outside [0.5, 5], negative timestamps,
    duplicate (user, item) pairs) are counted and skipped; if they exceed
    `malformed_threshold` as a fraction of data rows the parse fails.
    """
    genres = _parse_movies(movies_path) if movies_path is not None else {}
    users, items, stars, ts = [], [], [], []
    seen: set = set()
    malformed = 0
    total = 0
    try:
        fh = open(ratings_path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {ratings_path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        for row in reader:
            total += 1
            try:
                u = int(row["userId"])
                i = int(row["movieId"])
                s = float(row["rating"])
                t = int(row["timestamp"])
            except (KeyError, TypeError, ValueError):
                malformed += 1
                continue
            if not (0.5 <= s <= 5) or t < 0 or (u, i) in seen:
                malformed += 1
                continue
            seen.add((u, i))
            users.append(u)
            items.append(i)
            stars.append(s)
            ts.append(t)
    if total > 0 and malformed > malformed_threshold * total:
        raise ParseError(f"{malformed}/{total} malformed rows exceeds threshold")
    return RatingsLog(
        users=np.asarray(users, dtype=np.int64),
        items=np.asarray(items, dtype=np.int64),
        stars=np.asarray(stars, dtype=float),
        timestamps=np.asarray(ts, dtype=np.int64),
        genres=genres,
        malformed=malformed,
    )


def filter_population(log: RatingsLog, min_ratings: int = 225,
                      avg_low: float = 2.5, avg_high: float = 3.5) -> RatingsLog:
    """Keep movies whose mean stars lie in [avg_low, avg_high] (closed), then
    users with at least min_ratings surviving entries.

    The movie-then-user pass repeats until nothing changes, since dropping
    users shifts movie means; the fixpoint makes the filter idempotent.
    """
    keep = np.ones(len(log), dtype=bool)
    while True:
        idx = np.flatnonzero(keep)
        if idx.size == 0:
            break
        _, inv = np.unique(log.items[idx], return_inverse=True)
        means = np.bincount(inv, weights=log.stars[idx]) / np.bincount(inv)
        movie_ok = (means >= avg_low) & (means <= avg_high)
        sub_keep = movie_ok[inv]
        idx2 = idx[sub_keep]
        _, uinv = np.unique(log.users[idx2], return_inverse=True)
        user_ok = np.bincount(uinv) >= min_ratings
        idx3 = idx2[user_ok[uinv]]
        if idx3.size == idx.size:
            break
        keep = np.zeros(len(log), dtype=bool)
        keep[idx3] = True
    return RatingsLog(
        users=log.users[keep], items=log.items[keep],
        stars=log.stars[keep], timestamps=log.timestamps[keep],
        genres=log.genres, malformed=log.malformed,
    )


def build_piecewise_preferences(log: RatingsLog, bins: int = 15,
                                genre_pair: tuple = ("Action", "Romance")) -> BinnedPreferences:
    """Sort each user's movies by timestamp and split them into `bins`
    near-equal parts (earlier bins take the remainder), counting the two
    tracked genre tags per bin."""
    first_tag, second_tag = genre_pair
    user_ids = np.unique(log.users)
    a_counts = np.zeros((user_ids.size, bins), dtype=np.int64)
    r_counts = np.zeros_like(a_counts)
    bin_sizes = np.zeros_like(a_counts)
    for ui, u in enumerate(user_ids):
        mask = log.users == u
        if mask.sum() < bins:
            raise ValueError(f"user {u} has {mask.sum()} ratings < {bins} bins")
        order = np.argsort(log.timestamps[mask], kind="stable")
        movies = log.items[mask][order]
        n = movies.size
        base, rem = divmod(n, bins)
        start = 0
        for b in range(bins):
            size = base + (1 if b < rem else 0)
            chunk = movies[start:start + size]
            start += size
            bin_sizes[ui, b] = size
            for mid in chunk:
                tags = log.genres.get(int(mid), frozenset())
                if first_tag in tags:
                    a_counts[ui, b] += 1
                if second_tag in tags:
                    r_counts[ui, b] += 1
    return BinnedPreferences(users=tuple(int(u) for u in user_ids),
                             a_counts=a_counts, r_counts=r_counts, bin_sizes=bin_sizes)


def quantize_ratings(log: RatingsLog) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense grid in {-1, 0, +1}: stars >= 4 -> +1, stars < 3 -> -1, stars in
    [3, 4) and unrated cells -> 0.  Returns (grid, user ids, item ids)."""
    user_ids, uinv = np.unique(log.users, return_inverse=True)
    item_ids, iinv = np.unique(log.items, return_inverse=True)
    grid = np.zeros((user_ids.size, item_ids.size), dtype=np.int8)
    vals = np.where(log.stars >= 4, 1, np.where(log.stars < 3, -1, 0)).astype(np.int8)
    grid[uinv, iinv] = vals
    return grid, user_ids, item_ids


def replay_env(grid: np.ndarray, top_n: int = 250, top_m: int = 500) -> ReplayEnv:
    """Replay environment over the top_n users and top_m items by rating
    count.  Ties break toward the lower index (stable sort on -count)."""
    n, m = grid.shape
    if n < top_n:
        raise SizeError(f"need {top_n} users, grid has {n}")
    if m < top_m:
        raise SizeError(f"need {top_m} items, grid has {m}")
    rated = grid != 0
    top_users = np.argsort(-rated.sum(axis=1), kind="stable")[:top_n]
    top_items = np.argsort(-rated.sum(axis=0), kind="stable")[:top_m]
    top_users.sort()
    top_items.sort()
    return ReplayEnv(grid[np.ix_(top_users, top_items)].copy())


class CalibratedEnv:
    """Synthetic environment whose like-probabilities come from a user's
    binned genre preferences.

    The catalog alternates items of the two tracked single-tag classes; the
    horizon is split evenly over the bins, so a user's probability for a
    first-tag item at round t is their a/(a+r) in the bin covering t.
    """

    kind = "synthetic"

    def __init__(self, binned: BinnedPreferences, n_items: int, horizon: int):
        self.binned = binned
        self.n_users = len(binned.users)
        self.n_items = n_items
        self._horizon = horizon
        self._p_first = binned.p_first_only
        self._p_second = binned.p_second_only

    @property
    def horizon(self) -> int:
        return self._horizon

    def _bin_of(self, t: int) -> int:
        b = (t - 1) * self.binned.n_bins // self._horizon
        return min(b, self.binned.n_bins - 1)

    def prob(self, u: int, i: int, t: int) -> float:
        table = self._p_first if i % 2 == 0 else self._p_second
        return float(table[u, self._bin_of(t)])

    def respond(self, u: int, i: int, t: int, rng: np.random.Generator) -> int:
        return 1 if rng.random() < self.prob(u, i, t) else -1

    def likable(self, u: int, i: int, t: int) -> bool:
        return self.prob(u, i, t) > 0.5
