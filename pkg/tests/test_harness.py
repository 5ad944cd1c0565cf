import csv
import math

import numpy as np
import pytest

from batchcf.harness import (
    ReplayEnv,
    SweepResult,
    SyntheticEnv,
    UnsupportedMetricError,
    acc_reward,
    baseline_random,
    baseline_static,
    oracle_upper_bound,
    required_test_length,
    reward_likable,
    sweep_batch_size,
    verify_lemma1,
    verify_lemma2,
)
from batchcf.model import (
    ModelParams,
    PreferenceMatrix,
    VariationSchedule,
    constant_schedule,
    generate_model,
)
from batchcf.recommender import run_collaborative
from batchcf.trace import LIKABLE_NA, TraceBuilder
from tests.test_recommender import anticorr_env, small_hyper


def det_env(rows, schedule=None, horizon=4, templates=None, types=None):
    """Deterministic env from explicit 0/1 probability rows."""
    rows = np.asarray(rows, dtype=float)
    n, m = rows.shape
    if templates is None:
        templates, types = rows, np.arange(n)
    prefs = PreferenceMatrix(probs=np.asarray(templates)[np.asarray(types)],
                             type_templates=np.asarray(templates, dtype=float),
                             idiosyncratic=np.zeros((n, 0)))
    if schedule is None:
        schedule = constant_schedule(np.asarray(types), horizon)
    return SyntheticEnv(prefs, schedule)


def hand_trace(records, n_users, seed=0):
    """records: (round, batch, user, phase, item, response, likable)."""
    b = TraceBuilder()
    for r in records:
        b.add(*r)
    return b.build(n_users=n_users, seed=seed)


class TestMetrics:
    def test_acc_reward_all_plus(self):
        tr = hand_trace([(t, 1, u, 2, t, 1, 1) for t in (1, 2, 3) for u in (0, 1)], 2)
        assert acc_reward(tr) == 3.0

    def test_acc_reward_balanced_is_zero(self):
        tr = hand_trace([(1, 1, 0, 2, 0, 1, 1), (1, 1, 1, 2, 0, -1, 0)], 2)
        assert acc_reward(tr) == 0.0

    def test_acc_reward_replay_miss_contributes_zero(self):
        tr = hand_trace([(1, 1, 0, 2, 0, 0, LIKABLE_NA)], 1)
        assert acc_reward(tr) == 0.0

    def test_reward_likable_hand_count(self):
        env = det_env([[1, 1, 0, 0], [0, 0, 1, 1]])
        # 2 users x 3 rounds; items chosen so exactly 4 are likable
        recs = [(1, 1, 0, 2, 0, 1, 1), (1, 1, 1, 2, 2, 1, 1),
                (2, 1, 0, 2, 1, 1, 1), (2, 1, 1, 2, 0, -1, 0),
                (3, 1, 0, 2, 2, -1, 0), (3, 1, 1, 2, 3, 1, 1)]
        tr = hand_trace(recs, 2)
        assert reward_likable(tr, env) == 2.0

    def test_reward_likable_t_min_cutoff(self):
        env = det_env([[1, 1, 0, 0], [0, 0, 1, 1]])
        recs = [(1, 1, 0, 2, 0, 1, 1), (2, 1, 0, 2, 1, 1, 1)]
        tr = hand_trace(recs, 2)
        assert reward_likable(tr, env, t_min=1) == 0.5

    def test_reward_likable_rejects_replay(self):
        env = ReplayEnv(np.zeros((2, 2), dtype=np.int8))
        tr = hand_trace([(1, 1, 0, 2, 0, 0, LIKABLE_NA)], 2)
        with pytest.raises(UnsupportedMetricError):
            reward_likable(tr, env)


class TestOracle:
    def test_static_small_horizon_is_horizon(self):
        env = anticorr_env(n_users=4, n_items=20, horizon=8)
        # every user has 10 likable items >= T=8
        assert oracle_upper_bound(env, 8) == 8.0

    def test_static_likable_count_caps(self):
        env = det_env([[1, 1, 1, 1, 1, 0], [1, 0, 0, 0, 0, 0]], horizon=8)
        # user 0 has 5 likable items, user 1 has 1; T=8
        assert oracle_upper_bound(env, 8) == 3.0

    def test_piecewise_matching_beats_per_segment_greedy(self):
        templates = np.array([[1.0, 0, 0], [1, 1, 0]])
        assignment = np.array([[0, 0, 1, 1], [0, 0, 0, 0]])
        env = det_env(templates[assignment[:, 0]], templates=templates,
                      types=assignment[:, 0],
                      schedule=VariationSchedule(assignment))
        # user 0 can take item 0 early and item 1 after the switch: 2 hits;
        # user 1 only ever likes item 0: 1 hit
        assert oracle_upper_bound(env, 4) == 1.5

    def test_replay_unsupported(self):
        with pytest.raises(UnsupportedMetricError):
            oracle_upper_bound(ReplayEnv(np.zeros((1, 1), dtype=np.int8)), 1)

    def test_engine_never_beats_oracle(self):
        env = anticorr_env(n_items=80, horizon=20)
        tr = run_collaborative(env, small_hyper(), 20, seed=3)
        assert reward_likable(tr, env) <= oracle_upper_bound(env, 20) + 1e-9


class TestBaselines:
    def test_random_baseline_no_repeats(self):
        env = anticorr_env(n_items=40, horizon=12)
        tr = baseline_random(env, 12, seed=4)
        pairs = list(zip(tr.user.tolist(), tr.item.tolist()))
        assert len(pairs) == len(set(pairs))
        assert len(tr) == 12 * env.n_users

    def test_random_baseline_hit_rate_near_mu(self):
        params = ModelParams(n_users=10, n_items=200, n_types=2, delta=0.5,
                             mu=0.5, nu=0.3, d_shared=0)
        rates = []
        for seed in range(20):
            prefs, types0 = generate_model(params, seed)
            env = SyntheticEnv(prefs, constant_schedule(types0, 20))
            tr = baseline_random(env, 20, seed=seed)
            rates.append(reward_likable(tr, env) / 20)
        assert abs(np.mean(rates) - 0.5) < 0.05

    def test_static_baseline_is_single_batch_reduction(self):
        env = anticorr_env(n_items=80, horizon=20)
        hyper = small_hyper(p_test=0.7, delta_t=5)
        static = baseline_static(env, 20, seed=8, hyper=hyper)
        from dataclasses import replace
        direct = run_collaborative(env, replace(hyper, delta_t=20, p_test=0.0), 20, seed=8)
        assert static.equals(direct)
        assert set(np.unique(static.batch)) == {1}

    def test_random_baseline_deterministic(self):
        env = anticorr_env(n_items=40, horizon=6)
        assert baseline_random(env, 6, seed=1).equals(baseline_random(env, 6, seed=1))


class TestSweep:
    def make_env(self):
        return anticorr_env(n_users=4, n_items=200, horizon=24)

    def test_every_cell_present(self):
        res = sweep_batch_size(self.make_env(), 24, [8, 12, 24], [0, 1], small_hyper())
        keys = {(c.delta_t, c.seed) for c in res.cells}
        assert keys == {(dt, s) for dt in (8, 12, 24) for s in (0, 1)}
        assert all(c.status == "ok" for c in res.cells)

    def test_parallel_matches_serial(self):
        env = self.make_env()
        serial = sweep_batch_size(env, 24, [8, 24], [0, 1], small_hyper(), jobs=1)
        parallel = sweep_batch_size(env, 24, [8, 24], [0, 1], small_hyper(), jobs=2)
        assert [(c.delta_t, c.seed, c.acc_reward) for c in serial.cells] == \
               [(c.delta_t, c.seed, c.acc_reward) for c in parallel.cells]

    def test_failed_cell_recorded_not_fatal(self):
        env = anticorr_env(n_users=4, n_items=10, horizon=24)  # exhausts
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = sweep_batch_size(env, 24, [24], [0], small_hyper())
        assert len(res.cells) == 1
        assert res.cells[0].status.startswith("error:")
        assert math.isnan(res.cells[0].acc_reward)

    def test_aggregate_mean_and_stderr(self):
        res = SweepResult()
        from batchcf.harness import SweepCell
        res.cells = [SweepCell(10, 0, 2.0, 1.0, "ok"), SweepCell(10, 1, 4.0, 1.0, "ok"),
                     SweepCell(20, 0, 5.0, 1.0, "ok"), SweepCell(10, 2, 0.0, 1.0, "error: x")]
        agg = res.aggregate()
        assert agg[0] == (10, 3.0, pytest.approx(1.0), 2)
        assert agg[1] == (20, 5.0, 0.0, 1)

    def test_csv_round_trip(self, tmp_path):
        res = sweep_batch_size(self.make_env(), 24, [24], [0], small_hyper())
        path = tmp_path / "sweep.csv"
        res.to_csv(path, fingerprint="abc123")
        lines = path.read_text().splitlines()
        assert lines[0] == "# fingerprint=abc123"
        header = lines[1].split(",")
        assert header == ["delta_t", "seed", "acc_reward", "reward_likable", "status"]
        row = next(csv.reader([lines[2]]))
        assert float(row[2]) == res.cells[0].acc_reward


class TestVerifySuites:
    def det_model(self):
        template = (np.arange(20) % 2).astype(float)
        templates = np.vstack([template, 1 - template])
        types = np.arange(6) % 2
        prefs = PreferenceMatrix(probs=templates[types], type_templates=templates,
                                 idiosyncratic=np.zeros((6, 0)))
        return prefs, types

    def test_lemma1_deterministic_model_passes(self):
        prefs, types = self.det_model()
        report = verify_lemma1(prefs, types, delta=0.5, n_pairs=5,
                               items_per_pair=2000, seed=0)
        assert report["pass"]
        assert all(set(c) == {"name", "observed", "bound", "pass"}
                   for c in report["checks"])

    def test_lemma2_deterministic_model_recovers_always(self):
        prefs, types = self.det_model()
        report = verify_lemma2(prefs, types, delta=0.5, delta_tol=0.2,
                               trials=50, seed=1, test_length=6)
        assert report["rate"] == 1.0
        assert report["pass"]

    def test_lemma2_degraded_length_reports_without_raising(self):
        prefs, types = self.det_model()
        report = verify_lemma2(prefs, types, delta=0.5, delta_tol=0.2,
                               trials=20, seed=2, test_length=1)
        assert 0.0 <= report["rate"] <= 1.0

    def test_lemma2_single_type_trivially_correct(self):
        template = (np.arange(20) % 2).astype(float)
        prefs = PreferenceMatrix(probs=np.tile(template, (4, 1)),
                                 type_templates=template[None, :],
                                 idiosyncratic=np.zeros((4, 0)))
        report = verify_lemma2(prefs, np.zeros(4, dtype=int), delta=0.5,
                               delta_tol=0.2, trials=20, seed=3, test_length=4)
        assert report["rate"] == 1.0

    def test_required_test_length_reference_value(self):
        assert required_test_length(100, 0.5, 0.25, 0.75, 0.1) == 1615
