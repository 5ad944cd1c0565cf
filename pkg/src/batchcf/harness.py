"""Environments, metrics, baselines, sweeps, and Monte-Carlo verification."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .model import (
    PreferenceMatrix,
    VariationSchedule,
    fit_coherence,
    preference_at,
)
from .partition import Partition, ResponseTable, cosine_test
from .recommender import HyperParams, run_collaborative
from .streams import stream
from .trace import LIKABLE_NA, RunTrace, TraceBuilder, PHASE_CODE


class UnsupportedMetricError(RuntimeError):
    """Metric needs ground-truth preferences the environment lacks."""


class SizeError(ValueError):
    """Replay grid smaller than the requested user/item counts."""


class SyntheticEnv:
    """Latent-source environment: responds by sampling the current
    preference row, which follows the variation schedule."""

    kind = "synthetic"

    def __init__(self, prefs: PreferenceMatrix, schedule: VariationSchedule):
        if schedule.n_users != prefs.n_users:
            raise ValueError("schedule and preference matrix disagree on N")
        self.prefs = prefs
        self.schedule = schedule
        self.n_users = prefs.n_users
        self.n_items = prefs.n_items

    @property
    def horizon(self) -> int:
        return self.schedule.horizon

    def prob(self, u: int, i: int, t: int) -> float:
        d = self.prefs.d_shared
        if i < d:
            k = self.schedule.type_at(u, t)
            return float(self.prefs.type_templates[k, i])
        return float(self.prefs.idiosyncratic[u, i - d])

    def respond(self, u: int, i: int, t: int, rng: np.random.Generator) -> int:
        return 1 if rng.random() < self.prob(u, i, t) else -1

    def likable(self, u: int, i: int, t: int) -> bool:
        return self.prob(u, i, t) > 0.5


class ReplayEnv:
    """Rating-grid environment: responses are pure lookups; a missing rating
    responds 0 (the item still counts as consumed by the engine)."""

    kind = "replay"

    def __init__(self, grid: np.ndarray):
        self.grid = grid
        self.n_users, self.n_items = grid.shape

    def respond(self, u: int, i: int, t: int, rng=None) -> int:
        return int(self.grid[u, i])

    def likable(self, u: int, i: int, t: int):
        return None


@dataclass
class SweepCell:
    delta_t: int
    seed: int
    acc_reward: float
    reward_likable: float
    status: str  # "ok" or the error message


@dataclass
class SweepResult:
    cells: list[SweepCell] = field(default_factory=list)

    def aggregate(self) -> list[tuple[int, float, float, int]]:
        """(delta_t, mean acc_reward, stderr, n) per delta_t over ok cells."""
        by_dt: dict[int, list[float]] = {}
        for c in self.cells:
            if c.status == "ok":
                by_dt.setdefault(c.delta_t, []).append(c.acc_reward)
        out = []
        for dt in sorted(by_dt):
            vals = np.asarray(by_dt[dt])
            stderr = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
            out.append((dt, float(vals.mean()), stderr, len(vals)))
        return out

    def to_csv(self, path, fingerprint: str | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if fingerprint is not None:
                fh.write(f"# fingerprint={fingerprint}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["delta_t", "seed", "acc_reward", "reward_likable", "status"])
            for c in self.cells:
                writer.writerow([c.delta_t, c.seed, repr(c.acc_reward),
                                 repr(c.reward_likable), c.status])


def reward_likable(trace: RunTrace, env, t_min: int = 0) -> float:
    """(1/N) * count of likable recommendations over rounds > t_min,
    recomputed from the environment's ground truth."""
    if env.kind != "synthetic":
        raise UnsupportedMetricError("reward_likable needs a synthetic environment")
    keep = trace.round > t_min
    hits = sum(
        env.likable(int(u), int(i), int(t))
        for u, i, t in zip(trace.user[keep], trace.item[keep], trace.round[keep])
    )
    return hits / trace.n_users


def likable_fraction(trace: RunTrace, env, t_min: int = 0) -> float:
    """Per-round likable fraction over rounds > t_min."""
    rounds = np.unique(trace.round[trace.round > t_min])
    if rounds.size == 0:
        return float("nan")
    return reward_likable(trace, env, t_min=t_min) / rounds.size


def acc_reward(trace: RunTrace) -> float:
    """(1/N) * sum of observed responses; replay misses contribute 0."""
    return float(trace.response.sum(dtype=np.int64)) / trace.n_users


def oracle_upper_bound(env, horizon: int) -> float:
    """Best achievable likable count per user given the schedule.

    Per user this is a maximum bipartite matching between rounds and items
    with an edge where the item is likable at that round; for a constant
    schedule it collapses to min(T, likable count).
    """
    if env.kind != "synthetic":
        raise UnsupportedMetricError("oracle needs a synthetic environment")
    prefs, schedule = env.prefs, env.schedule
    total = 0.0
    for u in range(env.n_users):
        types_u = schedule.assignment[u, :horizon]
        if (types_u == types_u[0]).all():
            likable = preference_at(prefs, schedule, u, 1) > 0.5
            total += min(horizon, int(likable.sum()))
            continue
        # boolean (rounds x items) likability, then max matching
        rows = np.stack([
            preference_at(prefs, schedule, u, t) > 0.5 for t in range(1, horizon + 1)
        ])
        graph = csr_matrix(rows)
        match = maximum_bipartite_matching(graph, perm_type="column")
        total += int((match >= 0).sum())
    return total / env.n_users


def baseline_random(env, horizon: int, seed: int) -> RunTrace:
    """Uniform unconsumed recommendation each round for every user."""
    rng = stream(seed, "engine")
    resp_streams = [stream(seed, "resp", u) for u in range(env.n_users)]
    consumed = np.zeros((env.n_users, env.n_items), dtype=bool)
    builder = TraceBuilder()
    code = PHASE_CODE["explore"]
    for t in range(1, horizon + 1):
        for u in range(env.n_users):
            pool = np.flatnonzero(~consumed[u])
            if pool.size == 0:
                raise RuntimeError(f"random baseline exhausted items for user {u}")
            item = int(pool[rng.integers(0, pool.size)])
            consumed[u, item] = True
            r = env.respond(u, item, t, resp_streams[u])
            flag = env.likable(u, item, t)
            builder.add(t, 1, u, code, item, r, LIKABLE_NA if flag is None else int(flag))
    return builder.build(n_users=env.n_users, seed=seed)


def baseline_static(env, horizon: int, seed: int, hyper: HyperParams) -> RunTrace:
    """The engine restricted to a single batch with no variation tests."""
    static = replace(hyper, delta_t=horizon, p_test=0.0)
    return run_collaborative(env, static, horizon, seed)


def _sweep_cell(args) -> SweepCell:
    env, horizon, hyper, dt, seed = args
    try:
        trace = run_collaborative(env, replace(hyper, delta_t=dt), horizon, seed)
        acc = acc_reward(trace)
        lik = reward_likable(trace, env) if env.kind == "synthetic" else float("nan")
        return SweepCell(delta_t=dt, seed=seed, acc_reward=acc,
                         reward_likable=lik, status="ok")
    except Exception as exc:  # a failed cell is recorded, not fatal
        return SweepCell(delta_t=dt, seed=seed, acc_reward=float("nan"),
                         reward_likable=float("nan"), status=f"error: {exc}")


def sweep_batch_size(env, horizon: int, delta_t_list, seeds, hyper: HyperParams,
                     jobs: int = 1) -> SweepResult:
    """Run the engine per (delta_t, seed) cell and collect both reward metrics.

    Cells own their RNG streams, so results are identical for any job count.
    """
    tasks = [(env, horizon, hyper, int(dt), int(s)) for dt in delta_t_list for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_sweep_cell, tasks))
    else:
        cells = [_sweep_cell(t) for t in tasks]
    return SweepResult(cells=cells)


def _three_sigma(p: float, n: int) -> float:
    return 3 * math.sqrt(max(p * (1 - p), 1e-12) / n)


def verify_lemma1(prefs: PreferenceMatrix, types: np.ndarray, delta: float,
                  n_pairs: int, items_per_pair: int, seed: int) -> dict:
    """Exact and Monte-Carlo checks of the same-response probability bounds."""
    gamma1, gamma2 = fit_coherence(prefs, types, delta)
    upper = 2 * gamma1 * delta**2 + 0.5
    lower = 2 * gamma2 * delta**2 + 0.5
    rng = stream(seed, "lemma1")
    n, m = prefs.probs.shape
    types = np.asarray(types)
    same_pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if types[u] == types[v]]
    cross_pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if types[u] != types[v]]
    checks = []

    def sample_pairs(pairs):
        if len(pairs) <= n_pairs:
            return pairs
        idx = rng.choice(len(pairs), size=n_pairs, replace=False)
        return [pairs[k] for k in idx]

    for kind, pairs, bound, is_upper in (
        ("cross", sample_pairs(cross_pairs), upper, True),
        ("same", sample_pairs(same_pairs), lower, False),
    ):
        for u, v in pairs:
            centered = (2 * prefs.probs[u] - 1) @ (2 * prefs.probs[v] - 1)
            exact = float(centered / (2 * m) + 0.5)
            ok_exact = exact <= bound if is_upper else exact >= bound
            checks.append({"name": f"exact_{kind}_{u}_{v}", "observed": exact,
                           "bound": bound, "pass": bool(ok_exact)})
            items = rng.integers(0, m, size=items_per_pair)
            ru = rng.random(items_per_pair) < prefs.probs[u, items]
            rv = rng.random(items_per_pair) < prefs.probs[v, items]
            freq = float((ru == rv).mean())
            tol = _three_sigma(exact, items_per_pair)
            ok_mc = freq <= bound + tol if is_upper else freq >= bound - tol
            checks.append({"name": f"mc_{kind}_{u}_{v}", "observed": freq,
                           "bound": bound, "pass": bool(ok_mc)})
    return {"gamma1": gamma1, "gamma2": gamma2, "checks": checks,
            "pass": all(c["pass"] for c in checks)}


def required_test_length(n_users: int, delta: float, gamma1: float,
                         gamma2: float, delta_tol: float) -> int:
    return math.ceil(
        2 * math.log(3 * n_users**2 / delta_tol)
        / (delta**4 * (gamma2 - gamma1) ** 2)
    )


def verify_lemma2(prefs: PreferenceMatrix, types: np.ndarray, delta: float,
                  delta_tol: float, trials: int, seed: int,
                  test_length: int | None = None,
                  lam: float | None = None) -> dict:
    """Monte-Carlo recovery rate of the cosine test at threshold-midpoint."""
    gamma1, gamma2 = fit_coherence(prefs, types, delta)
    n, m = prefs.probs.shape
    length = test_length if test_length is not None else required_test_length(
        n, delta, gamma1, gamma2, delta_tol)
    if length > m:
        raise ValueError(f"test length {length} exceeds catalog size {m}")
    if lam is None:
        lam = (gamma1 + gamma2) * delta**2 + 0.5
    truth = Partition.from_sets(
        [set(np.flatnonzero(np.asarray(types) == k)) for k in np.unique(types)]
    )
    rng = stream(seed, "lemma2")
    correct = 0
    for _ in range(trials):
        items = rng.choice(m, size=length, replace=False)
        probs = prefs.probs[:, items]
        responses = np.where(rng.random(probs.shape) < probs, 1, -1).astype(np.int8)
        table = ResponseTable(users=tuple(range(n)), items=tuple(int(i) for i in items),
                              responses=responses)
        if cosine_test(table, lam) == truth:
            correct += 1
    rate = correct / trials
    bound = 1 - delta_tol / 3
    tol = _three_sigma(bound, trials)
    return {
        "test_length": length, "lambda": lam, "trials": trials, "rate": rate,
        "bound": bound, "three_sigma": tol, "pass": rate >= bound - tol,
        "gamma1": gamma1, "gamma2": gamma2,
    }


def verification_report_json(reports: dict) -> str:
    return json.dumps(reports, indent=2, default=float)
