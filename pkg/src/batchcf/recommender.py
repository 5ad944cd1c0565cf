"""Batched explore/exploit/test recommendation engine.

The horizon is cut into batches; each batch opens with a reference test that
partitions all users, then alternates single explore/exploit rounds with
occasional variation tests that evict users whose cluster moved.  Ratings
from previous batches never enter scores, but consumed items stay consumed
for the whole horizon.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .partition import Partition, ResponseTable, cosine_test, detect_variation
from .streams import stream
from .trace import LIKABLE_NA, PHASE_CODE, RunTrace, TraceBuilder


class DerivationError(ValueError):
    """Hyperparameters cannot be derived from the supplied constants."""


class KappaError(DerivationError):
    """1 - delta - mu <= 0: batch size and learning time are undefined."""


class StateError(RuntimeError):
    """Engine state does not support the requested operation."""


class ExhaustionError(RuntimeError):
    """No unconsumed item is available for a user or a test."""


@dataclass(frozen=True)
class HyperParams:
    alpha: float
    lam: float
    t_static: int
    delta_t: int
    p_explore: float
    p_test: float
    t_learn: int
    kappa: float
    v1_budget: int = 0
    v2_budget: float = 0.0
    delta_tol: float = 0.1
    nu: float = 0.0

    def __post_init__(self):
        if not (0 <= self.p_explore <= 1 and 0 <= self.p_test <= 1):
            raise DerivationError("p_explore and p_test must lie in [0, 1]")
        if self.t_static < 1:
            raise DerivationError("t_static must be at least 1")
        if self.delta_t < 1:
            raise DerivationError("delta_t must be at least 1")


def batch_size_for(horizon: int, t_static: int, v2: float, nu: float,
                   delta: float, mu: float) -> int:
    """Batch size balancing per-batch learning cost against variation cost."""
    if v2 == 0:
        return horizon
    kappa = t_static * (1 - delta - mu)
    if kappa <= 0:
        raise KappaError("1 - delta - mu <= 0; supply delta_t explicitly")
    ideal = round(math.sqrt(2 * nu * horizon * kappa / (3 * v2)))
    # a batch must at least fit one reference test, so the admissible grid
    # starts at t_static (truncated at the horizon)
    return min(horizon, max(1, t_static, ideal))


def derive_params(n_users: int, delta: float, gamma1: float, gamma2: float,
                  mu: float, nu: float, v1: int, v2: float, horizon: int,
                  delta_tol: float, alpha: float,
                  lam: float | None = None) -> HyperParams:
    """Hyperparameters from the model constants and variation budgets."""
    if gamma2 <= gamma1:
        raise DerivationError(f"need gamma2 > gamma1, got {gamma1} >= {gamma2}")
    if not (0 < delta_tol < 1 and 0 < nu < 1):
        raise DerivationError("delta_tol and nu must lie in (0, 1)")
    if not (0 < alpha <= 4 / 7):
        raise DerivationError("alpha must lie in (0, 4/7]")
    t_static = math.ceil(
        2 * math.log(3 * n_users**2 / delta_tol) / (delta**4 * (gamma2 - gamma1) ** 2)
    )
    if lam is None:
        lam = (gamma1 + gamma2) * delta**2 + 0.5
    headroom = 1 - delta_tol - mu
    if headroom <= 0:
        raise KappaError(
            f"1 - delta - mu = {headroom:.4f} <= 0; supply delta_t explicitly"
        )
    kappa = t_static * headroom
    delta_t = batch_size_for(horizon, t_static, v2, nu, delta_tol, mu)
    p_test = 0.0 if v1 == 0 else min(1.0, math.sqrt(v1 / (horizon * t_static)))
    p_explore = n_users ** (-alpha)
    t_learn = math.ceil(max(1.0, 3 * v2 / (2 * nu * headroom)) * t_static)
    return HyperParams(
        alpha=alpha, lam=lam, t_static=t_static, delta_t=delta_t,
        p_explore=p_explore, p_test=p_test, t_learn=t_learn, kappa=kappa,
        v1_budget=v1, v2_budget=v2, delta_tol=delta_tol, nu=nu,
    )


def override_params(hyper: HyperParams, **fields) -> HyperParams:
    """Replace fields on a derived HyperParams (CLI/protocol overrides)."""
    return replace(hyper, **fields)


class RecommenderState:
    """Mutable per-batch engine state plus the horizon-global consumed sets."""

    def __init__(self, n_users: int, n_items: int):
        self.n_users = n_users
        self.n_items = n_items
        self.consumed = np.zeros((n_users, n_items), dtype=bool)
        self.batch_index = 0
        self.sigma: np.ndarray | None = None
        self.p0: Partition | None = None
        self.active: set[int] = set(range(n_users))
        self.bad: set[int] = set()
        self.batch_ratings = np.zeros((n_users, n_items), dtype=np.int8)
        self._cluster_id: np.ndarray | None = None
        self._pos: np.ndarray | None = None
        self._tot: np.ndarray | None = None
        self._version = 0
        self._score_cache: dict[int, tuple[int, np.ndarray]] = {}

    def start_batch(self, sigma: np.ndarray, batch_index: int) -> None:
        self.batch_index = batch_index
        self.sigma = np.asarray(sigma)
        self.batch_ratings[:] = 0
        self.p0 = None
        self.active = set(range(self.n_users))
        self.bad = set()
        self._cluster_id = None
        self._pos = self._tot = None
        self._bump()

    def set_reference_partition(self, p0: Partition) -> None:
        if p0.universe != frozenset(range(self.n_users)):
            raise StateError("reference partition must cover all users")
        self.p0 = p0
        n_c = len(p0.clusters)
        self._cluster_id = np.empty(self.n_users, dtype=int)
        for ci, cluster in enumerate(p0.clusters):
            for u in cluster:
                self._cluster_id[u] = ci
        self._pos = np.zeros((n_c, self.n_items), dtype=np.int32)
        self._tot = np.zeros((n_c, self.n_items), dtype=np.int32)
        for u in self.active:
            ci = self._cluster_id[u]
            row = self.batch_ratings[u]
            self._pos[ci] += row == 1
            self._tot[ci] += row != 0
        self._bump()

    def record_rating(self, u: int, i: int, response: int) -> None:
        """Mark (u, i) consumed; a zero response (replay miss) leaves no rating."""
        self.consumed[u, i] = True
        if response == 0:
            return
        self.batch_ratings[u, i] = response
        if self.p0 is not None and u in self.active:
            ci = self._cluster_id[u]
            if response == 1:
                self._pos[ci, i] += 1
            self._tot[ci, i] += 1
            self._bump()

    def evict(self, users) -> None:
        """Move users from the active set to the bad set, dropping their
        ratings from every neighborhood count."""
        for u in users:
            if u not in self.active:
                continue
            self.active.discard(u)
            self.bad.add(u)
            if self.p0 is not None:
                ci = self._cluster_id[u]
                row = self.batch_ratings[u]
                self._pos[ci] -= row == 1
                self._tot[ci] -= row != 0
        self._bump()

    def cluster_scores(self, ci: int) -> np.ndarray:
        cached = self._score_cache.get(ci)
        if cached is not None and cached[0] == self._version:
            return cached[1]
        tot = self._tot[ci]
        scores = np.where(tot > 0, self._pos[ci] / np.maximum(tot, 1), 0.5)
        self._score_cache[ci] = (self._version, scores)
        return scores

    def cluster_index(self, u: int) -> int:
        if self.p0 is None:
            raise StateError("no reference partition set")
        if self._cluster_id is None or not (0 <= u < self.n_users):
            raise StateError(f"user {u} not covered by the reference partition")
        return int(self._cluster_id[u])

    def _bump(self) -> None:
        self._version += 1
        self._score_cache.clear()


def score(u: int, i: int, state: RecommenderState) -> float:
    """Empirical like-probability of item i in u's active neighborhood, or
    exactly 1/2 when no neighbor has rated it this batch."""
    if not (0 <= i < state.n_items):
        raise IndexError(f"item {i} out of range")
    return float(state.cluster_scores(state.cluster_index(u))[i])


def exploit_choice(u: int, state: RecommenderState) -> int:
    """Unconsumed item maximizing the neighborhood score; ties go to the
    earliest item in the batch ordering sigma."""
    avail = ~state.consumed[u]
    if not avail.any():
        raise ExhaustionError(f"user {u} has consumed every item")
    scores = state.cluster_scores(state.cluster_index(u))
    in_sigma = np.where(avail[state.sigma], scores[state.sigma], -1.0)
    return int(state.sigma[int(np.argmax(in_sigma))])


def explore_choice(u: int, state: RecommenderState, rng: np.random.Generator) -> int:
    pool = np.flatnonzero(~state.consumed[u])
    if pool.size == 0:
        raise ExhaustionError(f"user {u} has consumed every item")
    return int(pool[rng.integers(0, pool.size)])


def _likable_flag(env, u: int, i: int, t: int) -> int:
    flag = env.likable(u, i, t)
    return LIKABLE_NA if flag is None else int(flag)


def _test_rounds(state, env, rng, resp_streams, builder, t0, n_rounds, users, phase):
    """Recommend n_rounds shared random items (fresh for every tested user) to
    `users`; bad users get fallback exploitation in the same rounds."""
    users = sorted(users)
    joint_fresh = np.flatnonzero(~state.consumed[users].any(axis=0))
    if joint_fresh.size < n_rounds:
        raise ExhaustionError(
            f"only {joint_fresh.size} jointly fresh items for a {n_rounds}-round test"
        )
    items = rng.choice(joint_fresh, size=n_rounds, replace=False)
    responses = np.empty((len(users), n_rounds), dtype=np.int8)
    code = PHASE_CODE[phase]
    fb_code = PHASE_CODE["fallback"]
    for j, item in enumerate(items):
        t = t0 + j
        item = int(item)
        for idx, u in enumerate(users):
            r = env.respond(u, item, t, resp_streams[u])
            responses[idx, j] = r
            state.record_rating(u, item, r)
            builder.add(t, state.batch_index, u, code, item, r, _likable_flag(env, u, item, t))
        for u in sorted(state.bad):
            fb_item = exploit_choice(u, state)
            r = env.respond(u, fb_item, t, resp_streams[u])
            state.record_rating(u, fb_item, r)
            builder.add(t, state.batch_index, u, fb_code, fb_item, r,
                        _likable_flag(env, u, fb_item, t))
    return ResponseTable(users=tuple(users), items=tuple(int(i) for i in items),
                         responses=responses)


def run_reference_test(state, env, hyper, rng, resp_streams, builder, t0, batch_end):
    """Batch-opening test over all users; sets the reference partition."""
    n_rounds = min(hyper.t_static, batch_end - t0 + 1)
    table = _test_rounds(state, env, rng, resp_streams, builder, t0, n_rounds,
                         range(state.n_users), "reference_test")
    state.set_reference_partition(cosine_test(table, hyper.lam))
    return t0 + n_rounds


def run_test_phase(state, env, hyper, rng, resp_streams, builder, t0):
    """Variation test: partition the active users afresh and evict movers.
    Consumes t_static rounds of the batch clock."""
    table = _test_rounds(state, env, rng, resp_streams, builder, t0,
                         hyper.t_static, state.active, "test")
    p = cosine_test(table, hyper.lam)
    moved = detect_variation(p, state.p0)
    state.evict(moved)
    return p, t0 + hyper.t_static


def _check_invariants(state: RecommenderState) -> None:
    assert state.active.isdisjoint(state.bad)
    assert state.active | state.bad == set(range(state.n_users))
    rated = state.batch_ratings != 0
    assert not (rated & ~state.consumed).any(), "batch rating on unconsumed item"


def run_batch(state, env, hyper, horizon, rng, resp_streams, builder,
              t_start, batch_index, validate=False):
    """One batch: reference test, then explore/exploit rounds interleaved
    with Bernoulli(p_test) variation tests.  Returns the next round index."""
    batch_end = min(horizon, t_start + hyper.delta_t - 1)
    state.start_batch(sigma=rng.permutation(state.n_items), batch_index=batch_index)
    t = run_reference_test(state, env, hyper, rng, resp_streams, builder, t_start, batch_end)
    ex_code, xp_code, fb_code = (PHASE_CODE[p] for p in ("explore", "exploit", "fallback"))
    while t <= batch_end:
        theta = rng.random() < hyper.p_test
        if theta and t + hyper.t_static - 1 <= batch_end:
            _, t = run_test_phase(state, env, hyper, rng, resp_streams, builder, t)
        else:
            explore_round = rng.random() < hyper.p_explore
            if explore_round:
                choices = [(u, explore_choice(u, state, rng), ex_code)
                           for u in range(state.n_users)]
            else:
                choices = [(u, exploit_choice(u, state),
                            xp_code if u in state.active else fb_code)
                           for u in range(state.n_users)]
            for u, item, code in choices:
                r = env.respond(u, item, t, resp_streams[u])
                state.record_rating(u, item, r)
                builder.add(t, batch_index, u, code, item, r, _likable_flag(env, u, item, t))
            t += 1
        if validate:
            _check_invariants(state)
    return batch_end + 1


def run_collaborative(env, hyper: HyperParams, horizon: int, seed: int,
                      validate: bool = False) -> RunTrace:
    """Full run over `horizon` rounds in ceil(horizon / delta_t) batches.

    Per-batch state (partition, ratings, ordering) resets at batch starts;
    consumed item sets persist for the whole horizon.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    n, m = env.n_users, env.n_items
    n_batches = math.ceil(horizon / hyper.delta_t)
    expected_use = horizon + hyper.t_static * (1 + hyper.p_test * horizon)
    if m < expected_use:
        warnings.warn(
            f"catalog of {m} items may exhaust: expected consumption ~{expected_use:.0f}",
            stacklevel=2,
        )
    rng = stream(seed, "engine")
    resp_streams = [stream(seed, "resp", u) for u in range(n)]
    state = RecommenderState(n, m)
    builder = TraceBuilder()
    t = 1
    for b in range(1, n_batches + 1):
        if t > horizon:
            break
        t = run_batch(state, env, hyper, horizon, rng, resp_streams, builder,
                      t, b, validate=validate)
    return builder.build(n_users=n, seed=seed)
