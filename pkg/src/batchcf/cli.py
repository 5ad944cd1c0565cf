"""Command-line entry point: config loading, dispatch, artifact emission.

Subcommands: params, synth, replay, sweep, verify.  Configs are JSON; the
--override flag patches dotted keys and wins over the file.  Every output
embeds a sha256 fingerprint of the resolved config plus the seed.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import harness, ingest
from .model import (
    ModelParams,
    constant_schedule,
    generate_model,
    piecewise_schedule,
    random_switch_schedule,
)
from .recommender import derive_params, override_params, run_collaborative


class ConfigError(ValueError):
    """Bad config file, flag, or schema violation (exit code 1)."""


MODES = ("params", "synth", "replay", "sweep", "verify")

DEFAULTS = {
    "mode": None,
    "model": {},
    "horizon": 100,
    "v1": 0,
    "v2": 0.0,
    "delta_tol": 0.1,
    "alpha": 0.5,
    "overrides": {},
    "seeds": [0],
    "schedule": {"kind": "constant"},
    "sweep": {"delta_t_list": []},
    "verify": {"n_pairs": 20, "items_per_pair": 10000, "trials": 300},
    "replay": {"min_ratings": 225, "bins": 15, "top_n": 250, "top_m": 500,
               "avg_low": 2.5, "avg_high": 3.5},
    "paths": {},
}


def _deep_merge(base: dict, patch: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in patch.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _apply_override(config: dict, key: str, raw: str) -> None:
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = config
    parts = key.split(".")
    for p in parts[:-1]:
        nxt = node.get(p)
        if not isinstance(nxt, dict):
            nxt = {}
            node[p] = nxt
        node = nxt
    node[parts[-1]] = value


def load_config(path, overrides, seed_flag=None) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            user_cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"--config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--config {path}: invalid JSON ({exc})") from exc
    if not isinstance(user_cfg, dict):
        raise ConfigError(f"--config {path}: top level must be an object")
    config = _deep_merge(DEFAULTS, user_cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--override {item!r}: expected KEY=VALUE")
        key, _, raw = item.partition("=")
        _apply_override(config, key, raw)
    if seed_flag is not None:
        config["seeds"] = [seed_flag]
    if config["mode"] not in MODES:
        raise ConfigError(f"mode: must be one of {MODES}, got {config['mode']!r}")
    if not config["seeds"]:
        raise ConfigError("seeds: must be nonempty")
    return config


def fingerprint(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _model_params(config: dict) -> ModelParams:
    try:
        return ModelParams(**config["model"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc


def _hyper(config: dict, params: ModelParams):
    hyper = derive_params(
        n_users=params.n_users, delta=params.delta, gamma1=params.gamma1,
        gamma2=params.gamma2, mu=params.mu, nu=params.nu,
        v1=config["v1"], v2=config["v2"], horizon=config["horizon"],
        delta_tol=config["delta_tol"], alpha=config["alpha"],
        lam=config["overrides"].get("lam"),
    )
    extra = {k: v for k, v in config["overrides"].items() if k != "lam"}
    if extra:
        try:
            hyper = override_params(hyper, **extra)
        except TypeError as exc:
            raise ConfigError(f"overrides: {exc}") from exc
    return hyper


def _schedule(config: dict, params: ModelParams, types0, seed: int):
    spec = config["schedule"]
    kind = spec.get("kind", "constant")
    horizon = config["horizon"]
    if kind == "constant":
        return constant_schedule(types0, horizon)
    if kind == "piecewise":
        lengths = spec.get("segment_lengths")
        if not lengths or sum(lengths) != horizon:
            raise ConfigError("schedule.segment_lengths must sum to horizon")
        return piecewise_schedule(params.n_users, params.n_types, lengths, seed)
    if kind == "random":
        return random_switch_schedule(
            types0, horizon, params.n_types, v1_cap=config["v1"],
            v2_cap=config["v2"], nu=params.nu, seed=seed)
    raise ConfigError(f"schedule.kind: unknown kind {kind!r}")


def _hyper_dict(hyper) -> dict:
    return {f: getattr(hyper, f) for f in hyper.__dataclass_fields__}


def _cmd_params(config, out, fp):
    params = _model_params(config)
    hyper = _hyper(config, params)
    doc = {"fingerprint": fp, "seed": config["seeds"][0], "hyper": _hyper_dict(hyper)}
    (out / "params.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"params: delta_t={hyper.delta_t} t_static={hyper.t_static} "
          f"p_explore={hyper.p_explore:.4f} p_test={hyper.p_test:.4f} -> {out / 'params.json'}")
    return 0


def _cmd_synth(config, out, fp):
    params = _model_params(config)
    hyper = _hyper(config, params)
    for seed in config["seeds"]:
        prefs, types0 = generate_model(params, seed)
        schedule = _schedule(config, params, types0, seed)
        env = harness.SyntheticEnv(prefs, schedule)
        trace = run_collaborative(env, hyper, config["horizon"], seed)
        trace.to_csv(out / f"trace_{seed}.csv", fingerprint=fp)
        rnd = harness.baseline_random(env, config["horizon"], seed)
        rnd.to_csv(out / f"trace_random_{seed}.csv", fingerprint=fp)
        static = harness.baseline_static(env, config["horizon"], seed, hyper)
        static.to_csv(out / f"trace_static_{seed}.csv", fingerprint=fp)
        print(f"synth seed={seed}: acc_reward={harness.acc_reward(trace):.3f} "
              f"reward_likable={harness.reward_likable(trace, env):.3f} "
              f"random={harness.acc_reward(rnd):.3f} static={harness.acc_reward(static):.3f}")
    return 0


def _cmd_replay(config, out, fp):
    paths = config["paths"]
    if "ratings" not in paths:
        raise ConfigError("paths.ratings is required in replay mode")
    rcfg = config["replay"]
    log = ingest.load_ratings(paths["ratings"], paths.get("movies"))
    log = ingest.filter_population(log, min_ratings=rcfg["min_ratings"],
                                   avg_low=rcfg["avg_low"], avg_high=rcfg["avg_high"])
    if len(log) == 0:
        raise ConfigError("no ratings survive filter_population")
    binned = ingest.build_piecewise_preferences(log, bins=rcfg["bins"])
    binned.to_csv(out / "binned.csv", fingerprint=fp)
    grid, _, _ = ingest.quantize_ratings(log)
    env = ingest.replay_env(grid, top_n=rcfg["top_n"], top_m=rcfg["top_m"])
    params = _model_params(config)
    hyper = _hyper(config, params)
    for seed in config["seeds"]:
        trace = run_collaborative(env, hyper, config["horizon"], seed)
        trace.to_csv(out / f"trace_{seed}.csv", fingerprint=fp)
        print(f"replay seed={seed}: acc_reward={harness.acc_reward(trace):.3f}")
    return 0


def _cmd_sweep(config, out, fp, jobs):
    params = _model_params(config)
    hyper = _hyper(config, params)
    dt_list = config["sweep"]["delta_t_list"]
    if not dt_list:
        raise ConfigError("sweep.delta_t_list must be nonempty")
    seed0 = config["seeds"][0]
    prefs, types0 = generate_model(params, seed0)
    schedule = _schedule(config, params, types0, seed0)
    env = harness.SyntheticEnv(prefs, schedule)
    result = harness.sweep_batch_size(env, config["horizon"], dt_list,
                                      config["seeds"], hyper, jobs=jobs)
    result.to_csv(out / "sweep.csv", fingerprint=fp)
    with open(out / "sweep_agg.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# fingerprint={fp}\n")
        fh.write("delta_t,mean_acc_reward,stderr,n\n")
        for dt, mean, stderr, n in result.aggregate():
            fh.write(f"{dt},{mean!r},{stderr!r},{n}\n")
    best = max(result.aggregate(), key=lambda row: row[1], default=None)
    print(f"sweep: {len(result.cells)} cells -> {out / 'sweep.csv'}; "
          f"best delta_t={best[0] if best else 'n/a'}")
    return 0


def _cmd_verify(config, out, fp):
    params = _model_params(config)
    vcfg = config["verify"]
    seed = config["seeds"][0]
    prefs, types0 = generate_model(params, seed)
    from .model import check_assumptions
    report = check_assumptions(prefs, np.asarray(types0), params)
    l1 = harness.verify_lemma1(prefs, np.asarray(types0), params.delta,
                               n_pairs=vcfg["n_pairs"],
                               items_per_pair=vcfg["items_per_pair"], seed=seed)
    l2 = harness.verify_lemma2(prefs, np.asarray(types0), params.delta,
                               delta_tol=config["delta_tol"],
                               trials=vcfg["trials"], seed=seed,
                               test_length=vcfg.get("test_length"))
    doc = {
        "fingerprint": fp, "seed": seed,
        "assumptions": {
            "a1_ok": report.a1_ok, "a2_ok": report.a2_ok, "a3_ok": report.a3_ok,
            "min_cross_type_margin": report.min_cross_type_margin,
            "min_within_type_margin": report.min_within_type_margin,
        },
        "lemma1": l1, "lemma2": l2,
        "pass": bool(report.all_ok and l1["pass"] and l2["pass"]),
    }
    (out / "verify.json").write_text(harness.verification_report_json(doc) + "\n")
    print(f"verify: assumptions={'ok' if report.all_ok else 'FAIL'} "
          f"lemma1={'ok' if l1['pass'] else 'FAIL'} "
          f"lemma2 rate={l2['rate']:.3f} -> {out / 'verify.json'}")
    return 0


def run_cli(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="batchcf", description=__doc__)
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=".")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        config = load_config(args.config, args.override, seed_flag=args.seed)
        if config["mode"] != args.mode:
            config["mode"] = args.mode
        fp = fingerprint(config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.mode == "params":
            return _cmd_params(config, out, fp)
        if args.mode == "synth":
            return _cmd_synth(config, out, fp)
        if args.mode == "replay":
            return _cmd_replay(config, out, fp)
        if args.mode == "sweep":
            return _cmd_sweep(config, out, fp, args.jobs)
        return _cmd_verify(config, out, fp)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())
