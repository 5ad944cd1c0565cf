"""Latent-source preference model.

Users belong to one of K types.  A user's like-probability row is the
concatenation of a shared per-type template block (length d) and a fixed
per-user idiosyncratic tail.  Non-stationarity enters only through the type
assignment, which may change over rounds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .streams import stream


class ParameterError(ValueError):
    """A model parameter violates its admissible range."""


class ScheduleError(RuntimeError):
    """No feasible variation schedule found under the given caps."""


@dataclass(frozen=True)
class ModelParams:
    n_users: int
    n_items: int
    n_types: int
    delta: float
    mu: float
    gamma1: float = 0.0
    gamma2: float = 1.0
    nu: float = 0.0
    d_shared: int | None = None  # defaults to n_items (fully shared rows)

    def __post_init__(self):
        if self.d_shared is None:
            object.__setattr__(self, "d_shared", self.n_items)
        checks = [
            (self.n_users > 0, "n_users must be positive"),
            (self.n_items > 0, "n_items must be positive"),
            (0 < self.n_types < self.n_users, "need 0 < n_types < n_users"),
            (0 < self.delta <= 0.5, "delta must lie in (0, 1/2]"),
            (0 <= self.mu <= 1, "mu must lie in [0, 1]"),
            (0 <= self.gamma1 < 1, "gamma1 must lie in [0, 1)"),
            (self.gamma1 <= self.gamma2 <= 1, "need gamma1 <= gamma2 <= 1"),
            (self.n_types > 0 and 0 <= self.nu <= 1 / self.n_types,
             "nu must lie in [0, 1/n_types]"),
            (0 <= self.d_shared <= self.n_items, "d_shared must lie in [0, n_items]"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ParameterError(msg)


@dataclass(frozen=True)
class PreferenceMatrix:
    """Ground-truth like-probabilities plus their template/tail decomposition."""

    probs: np.ndarray  # (N, M) rows for the *initial* type assignment
    type_templates: np.ndarray  # (K, d)
    idiosyncratic: np.ndarray  # (N, M - d)

    @property
    def n_users(self) -> int:
        return self.probs.shape[0]

    @property
    def n_items(self) -> int:
        return self.probs.shape[1]

    @property
    def n_types(self) -> int:
        return self.type_templates.shape[0]

    @property
    def d_shared(self) -> int:
        return self.type_templates.shape[1]


@dataclass(frozen=True)
class VariationSchedule:
    """Per-user type index for every round, shape (N, T)."""

    assignment: np.ndarray

    def __post_init__(self):
        if self.assignment.ndim != 2 or self.assignment.shape[1] < 1:
            raise ParameterError("assignment must be an (N, T) grid with T >= 1")

    @property
    def n_users(self) -> int:
        return self.assignment.shape[0]

    @property
    def horizon(self) -> int:
        return self.assignment.shape[1]

    def type_at(self, u: int, t: int) -> int:
        """Type of user u at round t (1-based, t <= horizon)."""
        return int(self.assignment[u, t - 1])


@dataclass(frozen=True)
class AssumptionReport:
    a1_ok: bool
    a2_ok: bool
    min_cross_type_margin: float
    min_within_type_margin: float
    witnesses: dict = field(default_factory=dict)

    @property
    def a3_ok(self) -> bool:
        return self.min_cross_type_margin >= 0 and self.min_within_type_margin >= 0

    @property
    def all_ok(self) -> bool:
        return self.a1_ok and self.a2_ok and self.a3_ok


def generate_model(params: ModelParams, seed: int) -> tuple[PreferenceMatrix, np.ndarray]:
    """Draw templates and tails; entries are 1/2+delta w.p. mu, else 1/2-delta.

    Initial types are assigned round-robin so every type's occupancy is
    exactly floor/ceil(N/K), which must be at least nu*N.
    """
    n, m, k, d = params.n_users, params.n_items, params.n_types, params.d_shared
    if n // k < params.nu * n:
        raise ParameterError(
            f"round-robin occupancy {n // k} below nu*N = {params.nu * n:.3f}"
        )
    rng = stream(seed, "model")
    hi, lo = 0.5 + params.delta, 0.5 - params.delta
    templates = np.where(rng.random((k, d)) < params.mu, hi, lo)
    tails = np.where(rng.random((n, m - d)) < params.mu, hi, lo)
    types0 = np.arange(n) % k
    probs = np.concatenate([templates[types0], tails], axis=1)
    prefs = PreferenceMatrix(probs=probs, type_templates=templates, idiosyncratic=tails)
    return prefs, types0


def preference_at(prefs: PreferenceMatrix, schedule: VariationSchedule, u: int, t: int) -> np.ndarray:
    """Row of like-probabilities for user u at round t (1-based).

    The shared block follows the user's current type; the idiosyncratic tail
    is fixed for the whole horizon.
    """
    if not (0 <= u < prefs.n_users):
        raise IndexError(f"user {u} out of range")
    if not (1 <= t <= schedule.horizon):
        raise IndexError(f"round {t} outside horizon {schedule.horizon}")
    k = schedule.type_at(u, t)
    return np.concatenate([prefs.type_templates[k], prefs.idiosyncratic[u]])


def sample_rating(prefs: PreferenceMatrix, u: int, i: int, rng: np.random.Generator) -> int:
    """+1 with probability p_ui, else -1."""
    if not (0 <= u < prefs.n_users and 0 <= i < prefs.n_items):
        raise IndexError(f"(u={u}, i={i}) out of range")
    return 1 if rng.random() < prefs.probs[u, i] else -1


def agreement_probability(p_u: np.ndarray, p_v: np.ndarray) -> float:
    """Exact probability that a uniformly random item gets the same rating
    from both users: <2p_u-1, 2p_v-1> / (2M) + 1/2."""
    p_u = np.asarray(p_u, dtype=float)
    p_v = np.asarray(p_v, dtype=float)
    if p_u.shape != p_v.shape or p_u.ndim != 1:
        raise ValueError("rows must be 1-D and of equal length")
    m = p_u.shape[0]
    return float(np.dot(2 * p_u - 1, 2 * p_v - 1) / (2 * m) + 0.5)


def variation_v1(schedule: VariationSchedule) -> int:
    """Maximum per-user switch count over the horizon."""
    diffs = schedule.assignment[:, 1:] != schedule.assignment[:, :-1]
    return int(diffs.sum(axis=1).max(initial=0))


def variation_v2(schedule: VariationSchedule) -> float:
    """Total switch count divided by the number of users."""
    diffs = schedule.assignment[:, 1:] != schedule.assignment[:, :-1]
    return float(diffs.sum()) / schedule.n_users


def check_assumptions(prefs: PreferenceMatrix, types: np.ndarray, params: ModelParams) -> AssumptionReport:
    """Exact evaluation of the gap, likable-fraction, and coherence assumptions."""
    p = prefs.probs
    n, m = p.shape
    witnesses: dict = {}

    a1_margins = np.abs(p - 0.5) - params.delta
    a1_ok = bool((a1_margins >= 0).all())
    if not a1_ok:
        u, i = np.unravel_index(np.argmin(a1_margins), a1_margins.shape)
        witnesses["a1"] = (int(u), int(i))

    likable_counts = (p > 0.5).sum(axis=1)
    a2_ok = bool((likable_counts >= params.mu * m).all())
    if not a2_ok:
        witnesses["a2"] = int(np.argmin(likable_counts))

    centered = 2 * p - 1
    gram = centered @ centered.T
    same = types[:, None] == types[None, :]
    off_diag = ~np.eye(n, dtype=bool)
    cross_mask = (~same) & off_diag
    within_mask = same & off_diag

    bound_lo = 4 * params.gamma1 * params.delta**2 * m
    bound_hi = 4 * params.gamma2 * params.delta**2 * m
    if cross_mask.any():
        cross_margin = float((bound_lo - gram[cross_mask]).min())
        if cross_margin < 0:
            idx = np.argwhere(cross_mask)[np.argmax(gram[cross_mask])]
            witnesses["a3_cross"] = (int(idx[0]), int(idx[1]))
    else:
        cross_margin = math.inf
    if within_mask.any():
        within_margin = float((gram[within_mask] - bound_hi).min())
        if within_margin < 0:
            idx = np.argwhere(within_mask)[np.argmin(gram[within_mask])]
            witnesses["a3_within"] = (int(idx[0]), int(idx[1]))
    else:
        within_margin = math.inf

    return AssumptionReport(
        a1_ok=a1_ok,
        a2_ok=a2_ok,
        min_cross_type_margin=cross_margin,
        min_within_type_margin=within_margin,
        witnesses=witnesses,
    )


def fit_coherence(prefs: PreferenceMatrix, types: np.ndarray, delta: float,
                  slack: float = 1e-9) -> tuple[float, float]:
    """Tightest (gamma1, gamma2) the instance satisfies, padded by `slack`.

    gamma1 bounds every cross-type inner product from above, gamma2 bounds
    every same-type one from below; the pad keeps the bounds strict under
    float rounding.
    """
    p = prefs.probs
    n, m = p.shape
    centered = 2 * p - 1
    gram = centered @ centered.T
    same = types[:, None] == types[None, :]
    off_diag = ~np.eye(n, dtype=bool)
    scale = 4 * delta**2 * m
    cross = gram[(~same) & off_diag]
    within = gram[same & off_diag]
    g1 = max(0.0, float(cross.max()) / scale) + slack if cross.size else slack
    g2 = min(1.0, float(within.min()) / scale - slack) if within.size else 1.0
    return g1, g2


def constant_schedule(types0: np.ndarray, horizon: int) -> VariationSchedule:
    return VariationSchedule(np.tile(np.asarray(types0)[:, None], (1, horizon)))


def piecewise_schedule(n_users: int, n_types: int, segment_lengths: list[int],
                       seed: int) -> VariationSchedule:
    """Aligned segments; at each boundary users are re-dealt round-robin
    after a random shuffle, preserving exact type occupancy."""
    rng = stream(seed, "schedule")
    cols = []
    for s, length in enumerate(segment_lengths):
        if s == 0:
            types = np.arange(n_users) % n_types
        else:
            types = np.empty(n_users, dtype=int)
            types[rng.permutation(n_users)] = np.arange(n_users) % n_types
        cols.append(np.tile(types[:, None], (1, length)))
    return VariationSchedule(np.concatenate(cols, axis=1))


def random_switch_schedule(types0: np.ndarray, horizon: int, n_types: int,
                           v1_cap: int, v2_cap: float, nu: float, seed: int,
                           max_attempts: int = 200) -> VariationSchedule:
    """Switches placed uniformly over (user, round) pairs subject to the
    per-user cap v1, total cap N*v2, and the nu-occupancy floor at all rounds.
    Rejection-samples whole schedules; raises after `max_attempts`."""
    types0 = np.asarray(types0)
    n = types0.shape[0]
    rng = stream(seed, "schedule")
    n_switches = int(math.floor(v2_cap * n))
    floor = nu * n
    for _ in range(max_attempts):
        assignment = np.tile(types0[:, None], (1, horizon))
        if n_switches == 0:
            return VariationSchedule(assignment)
        if horizon < 2:
            raise ScheduleError("cannot place switches on a 1-round horizon")
        slots = rng.integers(0, n * (horizon - 1), size=n_switches)
        users, rounds = np.unravel_index(slots, (n, horizon - 1))
        per_user = np.bincount(users, minlength=n)
        if per_user.max(initial=0) > v1_cap:
            continue
        order = np.argsort(rounds, kind="stable")
        for u, r in zip(users[order], rounds[order]):
            cur = assignment[u, r]
            new = int(rng.integers(0, n_types - 1))
            if new >= cur:
                new += 1
            assignment[u, r + 1:] = new
        occ = np.stack([(assignment == k).sum(axis=0) for k in range(n_types)])
        if occ.min() >= floor:
            return VariationSchedule(assignment)
    raise ScheduleError(
        f"no feasible schedule after {max_attempts} attempts "
        f"(v1={v1_cap}, v2={v2_cap}, nu={nu})"
    )


def model_to_json(params: ModelParams, prefs: PreferenceMatrix,
                  schedule: VariationSchedule) -> str:
    """Lossless snapshot; floats serialize via shortest round-trip decimals."""
    doc = {
        "params": {
            "n_users": params.n_users, "n_items": params.n_items,
            "n_types": params.n_types, "delta": params.delta, "mu": params.mu,
            "gamma1": params.gamma1, "gamma2": params.gamma2, "nu": params.nu,
            "d_shared": params.d_shared,
        },
        "templates": prefs.type_templates.tolist(),
        "idiosyncratic": prefs.idiosyncratic.tolist(),
        "schedule": schedule.assignment.tolist(),
    }
    return json.dumps(doc)


def model_from_json(text: str) -> tuple[ModelParams, PreferenceMatrix, VariationSchedule]:
    doc = json.loads(text)
    params = ModelParams(**doc["params"])
    templates = np.array(doc["templates"], dtype=float).reshape(params.n_types, params.d_shared)
    tails = np.array(doc["idiosyncratic"], dtype=float).reshape(
        params.n_users, params.n_items - params.d_shared)
    schedule = VariationSchedule(np.array(doc["schedule"], dtype=int))
    types0 = schedule.assignment[:, 0]
    probs = np.concatenate([templates[types0], tails], axis=1)
    prefs = PreferenceMatrix(probs=probs, type_templates=templates, idiosyncratic=tails)
    return params, prefs, schedule
