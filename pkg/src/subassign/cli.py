"""Command-line experiment runner.

    subassign offline --config configs/offline_sweep.json --out out/
    subassign online  --config configs/online_coverage.json
    subassign bandit  --config configs/bandit_ads.json --trials 5 --rounds 100000
    subassign oracle  --config configs/oracle_alice_bob.json
    subassign check   --config configs/check_coverage.json

Exit codes: 0 ok, 1 config error, 2 enumeration cap / resource error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .core import (
    EnumerationTooLargeError,
    GroundSet,
    InvalidInputError,
    ValueOracle,
    check_monotone_submodular,
)
from .environments import (
    AdClickOracle,
    AdModel,
    CoverageInstance,
    DiscountedCoverage,
    WeightedCoverage,
    ad_round,
    ad_rounds_batch,
    alice_bob_model,
    cascade_gen,
    random_ad_model,
    random_coverage,
    separable_ctr_model,
)
from .experts import FULL_INFO
from .offline import GreedyConfig, beta, locally_greedy, tabular_greedy
from .oracle import brute_force_opt, count_assignments
from .tgbandit import BANDIT, BanditBatch, TGBandit, run_bandit, run_full_info

log = logging.getLogger("subassign")

ONE_MINUS_INV_E = 1.0 - 1.0 / math.e
CSV_COLUMNS = ["trial", "round", "reward", "cum_reward", "regret_1m1e", "explored"]
COMMANDS = ("offline", "online", "bandit", "oracle", "check")


class ConfigError(Exception):
    def __init__(self, field: str, msg: str):
        super().__init__(f"config error at '{field}': {msg}")
        self.field = field


def _get(d: dict, key: str, path: str, kind=None, default: Any = ..., check: Callable | None = None):
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}{key}", "missing required field")
        return default
    val = d[key]
    if kind is not None and val is not None and not isinstance(val, kind):
        raise ConfigError(f"{path}{key}", f"expected {getattr(kind, '__name__', kind)}, got {type(val).__name__}")
    if check is not None and val is not None and not check(val):
        raise ConfigError(f"{path}{key}", f"invalid value {val!r}")
    return val


NUM = (int, float)


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return cfg


def validate(cfg: dict, base_dir: str = ".") -> dict:
    """Fill defaults and check field types; returns a normalized copy."""
    out = dict(cfg)
    env = _get(cfg, "environment", "", dict)
    _get(env, "type", "environment.", str,
         check=lambda v: v in ("ad", "alice_bob", "discounted_coverage", "coverage", "separable"))
    if "instance_file" in env:
        p = os.path.join(base_dir, env["instance_file"])
        if not os.path.exists(p):
            raise ConfigError("environment.instance_file", f"file {p} does not exist")
    algo = dict(_get(cfg, "algorithm", "", dict, default={"name": "tabular"}))
    a = "algorithm."
    algo["name"] = _get(algo, "name", a, str, default="tabular",
                        check=lambda v: v in ("tabular", "locally_greedy", "tgbandit"))
    colors = algo["colors"] = _get(algo, "colors", a, list, default=[1])
    if not colors or not all(isinstance(c, int) and c >= 1 for c in colors):
        raise ConfigError("algorithm.colors", "must be a non-empty list of positive integers")
    algo["eval_mode"] = _get(algo, "eval_mode", a, str, default="exact",
                             check=lambda v: v in ("exact", "monte_carlo"))
    algo["n_samples"] = _get(algo, "n_samples", a, int, default=100, check=lambda v: v >= 1)
    algo["position_order"] = _get(algo, "position_order", a, list, default=None)
    algo["explore_prob"] = _get(algo, "explore_prob", a, NUM, default=None, check=lambda v: 0 < v <= 1)
    algo["eta"] = _get(algo, "eta", a, NUM, default=None, check=lambda v: v >= 0)
    algo["max_importance_weight"] = _get(algo, "max_importance_weight", a, NUM, default=None,
                                         check=lambda v: v > 0)
    out["algorithm"] = algo
    out["rounds"] = _get(cfg, "rounds", "", int, default=1000, check=lambda v: v >= 1)
    out["trials"] = _get(cfg, "trials", "", int, default=1, check=lambda v: v >= 1)
    out["seed"] = _get(cfg, "seed", "", int, default=0, check=lambda v: v >= 0)
    out["output"] = _get(cfg, "output", "", str, default="out")
    out["reward_bound"] = _get(cfg, "reward_bound", "", NUM, default=None, check=lambda v: v > 0)
    out["log_every"] = _get(cfg, "log_every", "", int, default=1, check=lambda v: v >= 1)
    out["opt_cap"] = _get(cfg, "opt_cap", "", int, default=10**5, check=lambda v: v >= 1)
    out["workers"] = _get(cfg, "workers", "", int, default=1, check=lambda v: v >= 1)
    out["spot_checks"] = _get(cfg, "spot_checks", "", int, default=None, check=lambda v: v >= 1)
    out["_base_dir"] = base_dir
    return out


# ---------------------------------------------------------------------------
# Environments


@dataclass
class Env:
    gs: GroundSet
    oracle: ValueOracle
    bound: float
    ad_model: AdModel | None = None

    def sample_reward(self, played, rng) -> float:
        if self.ad_model is not None:
            return float(ad_round(self.ad_model, played, rng))
        return float(self.oracle(played))


def _env_rng(trial_seed: int):
    # kept apart from the algorithm's stream, which uses the bare trial seed
    return np.random.default_rng(np.random.SeedSequence([trial_seed, 1]))


def build_environment(cfg: dict, trial_seed: int) -> Env:
    env = cfg["environment"]
    kind = env["type"]
    p = "environment."
    if kind in ("ad", "alice_bob"):
        if kind == "alice_bob":
            model = alice_bob_model(_get(env, "epsilon", p, NUM, default=0.1))
        elif "model" in env:
            model = AdModel.from_dict(env["model"])
        else:
            model = random_ad_model(
                _env_rng(trial_seed),
                K=_get(env, "positions", p, int, default=6, check=lambda v: v >= 1),
                n_ads=_get(env, "n_ads", p, int, default=6, check=lambda v: v >= 1),
                abandon=_get(env, "abandon", p, list, default=[0.0, 0.5]),
                type_weights=_get(env, "type_weights", p, list, default=[0.5, 0.5]),
            )
        return Env(model.ground_set(), AdClickOracle(model), 1.0, model)
    if kind == "discounted_coverage":
        if "instance_file" in env:
            with open(os.path.join(cfg.get("_base_dir", "."), env["instance_file"])) as fh:
                inst = CoverageInstance.from_dict(json.load(fh))
        elif "instance" in env:
            inst = CoverageInstance.from_dict(env["instance"])
        else:
            inst = cascade_gen(
                _get(env, "n_blogs", p, int, default=50, check=lambda v: v >= 1),
                _get(env, "n_elements", p, int, default=200, check=lambda v: v >= 1),
                _get(env, "density", p, NUM, default=0.05, check=lambda v: 0 <= v <= 1),
                _get(env, "weight_dist", p, str, default="uniform"),
                _get(env, "gamma", p, NUM, default=0.8, check=lambda v: 0 < v < 1),
                _get(env, "positions", p, int, default=5, check=lambda v: v >= 1),
                seed=_get(env, "seed", p, int, default=0),
                probabilistic=_get(env, "probabilistic", p, bool, default=False),
            )
        oracle = DiscountedCoverage(inst)
        return Env(inst.ground_set(), oracle, oracle.bound)
    if kind == "coverage":
        sizes = _get(env, "sizes", p, list)
        gs = GroundSet.from_sizes(sizes)
        if "incidence" in env:
            oracle = WeightedCoverage(env["incidence"], _get(env, "weights", p, list))
        else:
            rng = np.random.default_rng(_get(env, "seed", p, int, default=0))
            oracle = random_coverage(
                gs, _get(env, "n_elements", p, int, default=10),
                rng, _get(env, "density", p, NUM, default=0.4),
                _get(env, "weight_dist", p, str, default="uniform"),
            )
        return Env(gs, oracle, oracle.bound)
    oracle = separable_ctr_model(
        _get(env, "alpha", p, list), _get(env, "beta", p, list), _get(env, "bids", p, list)
    )
    return Env(oracle.ground_set(), oracle, oracle.bound)


def trial_seed(master: int, trial: int) -> int:
    return master ^ trial


def _opt_value(cfg: dict, env: Env) -> float | None:
    if count_assignments(env.gs) > cfg["opt_cap"]:
        return None
    return brute_force_opt(env.oracle, env.gs, cap=cfg["opt_cap"]).value


# ---------------------------------------------------------------------------
# Trial runners (top level so worker processes can pickle them)


def _offline_trial(args):
    cfg, C, t = args
    seed = trial_seed(cfg["seed"], t)
    env = build_environment(cfg, seed)
    algo = cfg["algorithm"]
    if algo["name"] == "locally_greedy":
        value, fvalue = env.oracle(locally_greedy(env.oracle, env.gs)), None
    else:
        gcfg = GreedyConfig(
            position_order=algo["position_order"],
            eval_mode=algo["eval_mode"],
            n_samples=algo["n_samples"],
            seed=seed,
        )
        res = tabular_greedy(env.oracle, env.gs, C, gcfg)
        value, fvalue = env.oracle(res.assignment), res.estimated_value
    return value, fvalue, _opt_value(cfg, env), env.gs.K


def _online_trial(args):
    cfg, C, t = args
    seed = trial_seed(cfg["seed"], t)
    env = build_environment(cfg, seed)
    algo = cfg["algorithm"]
    bound = cfg["reward_bound"] or env.bound
    state = TGBandit(env.gs, C, cfg["rounds"], FULL_INFO, bound, eta=algo["eta"], seed=seed)
    rewards = run_full_info(state, env.oracle, cfg["rounds"])
    return rewards, None, _opt_value(cfg, env)


def _bandit_trial(args):
    cfg, C, t = args
    seed = trial_seed(cfg["seed"], t)
    env = build_environment(cfg, seed)
    algo = cfg["algorithm"]
    bound = cfg["reward_bound"] or env.bound
    state = TGBandit(env.gs, C, cfg["rounds"], BANDIT, bound, algo["explore_prob"], algo["eta"],
                     algo["max_importance_weight"], seed=seed)
    rewards, explored = run_bandit(state, env.sample_reward, cfg["rounds"])
    return rewards, explored, _opt_value(cfg, env)


def _bandit_ad_batch(cfg: dict, C: int) -> list:
    """All trials of an ad experiment in one vectorized batch.

    Replica t uses the same seed as the scalar trial, so results match
    ``_bandit_trial`` exactly.
    """
    seeds = [trial_seed(cfg["seed"], t) for t in range(cfg["trials"])]
    envs = [build_environment(cfg, s) for s in seeds]
    models = [e.ad_model for e in envs]
    algo = cfg["algorithm"]
    T = cfg["rounds"]
    batch = BanditBatch(envs[0].gs, C, T, seeds, n_env_uniforms=1 + models[0].K,
                        bound=cfg["reward_bound"] or 1.0, explore_prob=algo["explore_prob"],
                        eta=algo["eta"], max_importance_weight=algo["max_importance_weight"])
    cum = np.stack([m._cum for m in models])
    pc = np.stack([m.p_click for m in models])
    pa = np.stack([m.p_abandon for m in models])
    fn = lambda slots, u: ad_rounds_batch(cum, pc, pa, slots, u)  # noqa: E731
    rewards = np.empty((T, len(seeds)))
    explored = np.empty((T, len(seeds)), dtype=bool)
    for i in range(T):
        rewards[i], explored[i] = batch.step(fn)
    return [(rewards[:, t], explored[:, t], _opt_value(cfg, envs[t])) for t in range(len(seeds))]


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))  # map preserves trial order


# ---------------------------------------------------------------------------
# Output


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _stats(vals) -> dict:
    a = np.asarray(vals, dtype=float)
    return {"mean": float(a.mean()), "max": float(a.max()), "min": float(a.min()),
            "std": float(a.std()), "trials": int(a.size)}


def _round_rows(t: int, rewards, explored, opt, log_every: int):
    T = len(rewards)
    cum = np.cumsum(rewards)
    for i in range(T):
        if (i + 1) % log_every and i + 1 != T:
            continue
        regret = None if opt is None else ONE_MINUS_INV_E * opt * (i + 1) - cum[i]
        yield (t, i + 1, rewards[i], cum[i], regret, None if explored is None else explored[i])


def run(command: str, cfg: dict) -> dict:
    """Execute one subcommand; writes CSV files and summary.json."""
    out_dir = cfg["output"]
    os.makedirs(out_dir, exist_ok=True)
    algo = cfg["algorithm"]
    summary: dict = {"command": command, "seed": cfg["seed"]}

    if command in ("oracle", "check"):
        env = build_environment(cfg, trial_seed(cfg["seed"], 0))
        if command == "oracle":
            res = brute_force_opt(env.oracle, env.gs, cap=cfg["opt_cap"])
            labels = [env.gs.labels[x] if env.gs.labels else x for x in sorted(res.best)]
            summary.update(best=sorted(res.best), labels=labels, value=res.value,
                           enumerated=res.enumerated)
        else:
            rep = check_monotone_submodular(env.oracle, env.gs, spot_checks=cfg["spot_checks"],
                                            seed=cfg["seed"])
            summary.update(monotone=rep.monotone, submodular=rep.submodular, checks=rep.checks,
                           exhaustive=rep.exhaustive)
            if rep.witness is not None:
                w = rep.witness
                summary["witness"] = {"kind": w.kind, "A": sorted(w.A), "A_prime": sorted(w.A_prime),
                                      "s": w.s, "gap": w.gap}
        _write_summary(out_dir, summary)
        return summary

    trials = range(cfg["trials"])
    summary.update(trials=cfg["trials"], variants={})
    if command == "offline":
        variants = [None] if algo["name"] == "locally_greedy" else algo["colors"]
        for C in variants:
            name = "locally_greedy" if C is None else f"C{C}"
            results = _map(_offline_trial, [(cfg, C or 1, t) for t in trials], cfg["workers"])
            rows = []
            for t, (value, fvalue, opt, _) in enumerate(results):
                regret = None if opt is None else ONE_MINUS_INV_E * opt - value
                rows.append((t, 1, value, value, regret, None))
            _write_csv(os.path.join(out_dir, f"offline_{name}.csv"), rows)
            entry = _stats([r[0] for r in results])
            K = results[0][3]
            if C is not None:
                entry["F_mean"] = float(np.mean([r[1] for r in results]))
                entry["beta"] = beta(K, C)
                entry["beta_vacuous"] = entry["beta"] <= 0
            opts = [r[2] for r in results if r[2] is not None]
            if opts:
                entry["opt_mean"] = float(np.mean(opts))
            summary["variants"][name] = entry
    else:
        for C in algo["colors"]:
            if command == "bandit" and cfg["environment"]["type"] in ("ad", "alice_bob"):
                results = _bandit_ad_batch(cfg, C)
            else:
                runner = _online_trial if command == "online" else _bandit_trial
                results = _map(runner, [(cfg, C, t) for t in trials], cfg["workers"])
            rows = [
                row
                for t, (rewards, explored, opt) in enumerate(results)
                for row in _round_rows(t, rewards, explored, opt, cfg["log_every"])
            ]
            _write_csv(os.path.join(out_dir, f"{command}_C{C}.csv"), rows)
            entry = _stats([r[0].sum() for r in results])
            entry["mean_reward_per_round"] = entry["mean"] / cfg["rounds"]
            opts = [r[2] for r in results if r[2] is not None]
            if opts:
                entry["opt_mean"] = float(np.mean(opts))
            summary["variants"][f"C{C}"] = entry
    _write_summary(out_dir, summary)
    return summary


def _write_summary(out_dir: str, summary: dict) -> None:
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subassign", description="Submodular assignment experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--seed", type=int, help="master seed override")
        sp.add_argument("--out", help="output directory override")
        sp.add_argument("--rounds", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--colors", help="comma-separated palette sizes, e.g. 1,4")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = load_config(args.config)
        for key in ("seed", "rounds", "trials"):
            if getattr(args, key) is not None:
                raw[key] = getattr(args, key)
        if args.out is not None:
            raw["output"] = args.out
        if args.colors is not None:
            try:
                colors = [int(c) for c in args.colors.split(",")]
            except ValueError:
                raise ConfigError("--colors", f"not a comma-separated integer list: {args.colors!r}")
            raw.setdefault("algorithm", {})["colors"] = colors
        cfg = validate(raw, os.path.dirname(os.path.abspath(args.config)))
        summary = run(args.command, cfg)
    except (ConfigError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EnumerationTooLargeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    json.dump(summary, sys.stdout, indent=2, sort_keys=True, default=float)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
