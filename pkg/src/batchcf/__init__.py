"""Batched, variation-aware collaborative filtering in latent-source
environments: model generation, the explore/exploit/test engine, experiment
harness, ratings ingestion, and a CLI."""

from .model import (
    ModelParams,
    PreferenceMatrix,
    VariationSchedule,
    agreement_probability,
    check_assumptions,
    constant_schedule,
    generate_model,
    piecewise_schedule,
    preference_at,
    random_switch_schedule,
)
from .partition import Partition, ResponseTable, cosine_test, detect_variation
from .recommender import (
    HyperParams,
    batch_size_for,
    derive_params,
    override_params,
    run_collaborative,
)
from .harness import (
    ReplayEnv,
    SyntheticEnv,
    acc_reward,
    baseline_random,
    baseline_static,
    oracle_upper_bound,
    reward_likable,
    sweep_batch_size,
)
from .trace import RunTrace

__all__ = [
    "ModelParams", "PreferenceMatrix", "VariationSchedule",
    "agreement_probability", "check_assumptions", "constant_schedule",
    "generate_model", "piecewise_schedule", "preference_at",
    "random_switch_schedule", "Partition", "ResponseTable", "cosine_test",
    "detect_variation", "HyperParams", "batch_size_for", "derive_params",
    "override_params", "run_collaborative", "ReplayEnv", "SyntheticEnv",
    "acc_reward", "baseline_random", "baseline_static", "oracle_upper_bound",
    "reward_likable", "sweep_batch_size", "RunTrace",
]

__version__ = "0.1.0"
