"""Experiment harness: config files, run records, sweeps, and the CLI.

Configs are JSON documents with explicit keys; run records echo the
full config (defaults included) so no result depends on implicit
state. Identical (config, seed) pairs produce byte-identical records.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .aggregate import consensus_default_n
from .baselines import baseline_ntp_minimal_pool, baseline_rl_finetune, calibrate_c1
from .curriculum import (CurriculumConfig, CurriculumRun, autotune, autotune_rl,
                         autotune_stoch)
from .errors import ConfigurationError
from .evaluation import estimate_acc
from .learners import SampleBudget
from .metering import reconcile
from .schedule import ScheduleParams, build_weight_table
from .seeding import derive_rng
from .world import CoverageProfile, World, WorldConfig, build_world

SCHEMA_VERSION = 1
OUTPUT_ENV_VAR = "AUTOCURRICULUM_OUT"

SWEEP_FIELDS = ["variant", "eps", "delta", "c_seq", "eta", "d", "seed", "k",
                "cot_queries", "verifier_calls", "ref_generations",
                "learner_rollouts", "acc"]


@dataclass
class ExperimentConfig:
    world: WorldConfig
    curriculum: CurriculumConfig
    budget: SampleBudget = field(default_factory=SampleBudget)
    pool_size: int = 1024
    eval_size: int = 100_000
    seeds: list[int] = field(default_factory=lambda: [0])
    sweep: dict[str, list] = field(default_factory=dict)

    def validate(self) -> None:
        self.world.validate()
        if self.pool_size < 1:
            raise ConfigurationError("pool_size must be >= 1")
        if self.eval_size < 1:
            raise ConfigurationError("eval_size must be >= 1")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        unknown = set(self.sweep) - {"eps", "c_seq", "eta", "dim"}
        if unknown:
            raise ConfigurationError(f"unknown sweep axes: {sorted(unknown)}")

    def to_dict(self) -> dict:
        return {
            "world": {
                "alphabet_size": self.world.alphabet_size,
                "horizon": self.world.horizon,
                "dim": self.world.dim,
                "prompt_universe": self.world.prompt_universe,
                "rho_exponent": self.world.rho_exponent,
                "prefix_mixing": self.world.prefix_mixing,
                "stochastic_noise_grid": list(self.world.stochastic_noise_grid),
                "coverage": {"c_seq": self.world.coverage.c_seq,
                             "eta": self.world.coverage.eta},
                "seed": self.world.seed,
            },
            "curriculum": {
                "eps": self.curriculum.eps,
                "delta": self.curriculum.delta,
                "variant": self.curriculum.variant,
                "k_override": self.curriculum.k_override,
                "consensus_samples": self.curriculum.consensus_samples,
                "m_mc": self.curriculum.m_mc,
            },
            "budget": {"n_prompt_constant": self.budget.n_prompt_constant},
            "pool_size": self.pool_size,
            "eval_size": self.eval_size,
            "seeds": list(self.seeds),
            "sweep": {k: list(v) for k, v in self.sweep.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        wd = dict(data.get("world", {}))
        cov = wd.pop("coverage", {})
        world = WorldConfig(
            **{**wd, "stochastic_noise_grid": tuple(wd.get("stochastic_noise_grid", ())),
               "coverage": CoverageProfile(**cov)})
        cd = data.get("curriculum", {})
        curriculum = CurriculumConfig(**cd)
        budget = SampleBudget(**data.get("budget", {}))
        return cls(world=world, curriculum=curriculum, budget=budget,
                   pool_size=data.get("pool_size", 1024),
                   eval_size=data.get("eval_size", 100_000),
                   seeds=list(data.get("seeds", [0])),
                   sweep={k: list(v) for k, v in data.get("sweep", {}).items()})

    def replaced(self, *, eps=None, c_seq=None, eta=None, dim=None) -> "ExperimentConfig":
        """Copy with sweep-axis overrides applied."""
        world = self.world
        if c_seq is not None or eta is not None:
            cov = CoverageProfile(
                c_seq=c_seq if c_seq is not None else world.coverage.c_seq,
                eta=eta if eta is not None else world.coverage.eta)
            world = dataclasses.replace(world, coverage=cov)
        if dim is not None:
            world = dataclasses.replace(world, dim=dim)
        curriculum = self.curriculum
        if eps is not None:
            curriculum = dataclasses.replace(curriculum, eps=eps)
        return dataclasses.replace(self, world=world, curriculum=curriculum)


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        cfg = ExperimentConfig.from_dict(json.load(fh))
    cfg.validate()
    return cfg


def run_experiment(config: ExperimentConfig, seed: int) -> dict:
    """One seeded end-to-end run; returns the serializable run record."""
    config.validate()
    world = build_world(config.world)
    variant = config.curriculum.variant
    pool = world.sample_prompts(config.pool_size, derive_rng(seed, "pool"))
    if variant == "det-sft":
        aggregate, run = autotune(pool, world, config.curriculum, config.budget, seed)
    elif variant == "stoch-sft":
        aggregate, run = autotune_stoch(pool, world, config.curriculum,
                                        config.budget, seed)
    else:
        aggregate, run = autotune_rl(pool, world, config.curriculum,
                                     config.budget, seed)

    if world.config.prefix_mixing:
        report = estimate_acc(aggregate, world, config.eval_size,
                              derive_rng(seed, "eval"), mode="mc")
    else:
        report = estimate_acc(aggregate, world, 1, mode="analytic")
    record = {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "seed": seed,
        "config": config.to_dict(),
        "k": run.k,
        "cap": run.cap,
        "phases": [rec.as_dict() for rec in run.records],
        "ledger": run.ledger.snapshot(),
        "eval": report.as_dict(),
        "reconciliation": reconcile(run.ledger, run.records, run.pool_size, variant),
    }
    if variant == "stoch-sft":
        n_votes = (config.curriculum.consensus_samples
                   if config.curriculum.consensus_samples is not None
                   else consensus_default_n(config.curriculum.eps))
        from .aggregate import ConsensusModel
        cons = ConsensusModel(mixture=aggregate, n_votes=n_votes)
        cons_report = estimate_acc(cons, world, config.eval_size,
                                   derive_rng(seed, "eval-consensus"), mode="mc")
        record["consensus"] = {"n_votes": n_votes, **cons_report.as_dict()}
    return record


def record_to_json(record: dict) -> str:
    return json.dumps(record, sort_keys=True, indent=2) + "\n"


# ----------------------------------------------------------------------
# Sweeps
# ----------------------------------------------------------------------

def _sweep_points(config: ExperimentConfig) -> list[dict]:
    axes = {
        "eps": config.sweep.get("eps", [None]),
        "c_seq": config.sweep.get("c_seq", [None]),
        "eta": config.sweep.get("eta", [None]),
        "dim": config.sweep.get("dim", [None]),
    }
    points = []
    for eps in axes["eps"]:
        for c_seq in axes["c_seq"]:
            for eta in axes["eta"]:
                for dim in axes["dim"]:
                    points.append(dict(eps=eps, c_seq=c_seq, eta=eta, dim=dim))
    return points


def _point_key(point: dict, seed: int, config: ExperimentConfig) -> tuple:
    eff = config.replaced(**point)
    return (eff.curriculum.eps, eff.world.coverage.c_seq,
            eff.world.coverage.eta, eff.world.dim, seed)


def run_sweep(config: ExperimentConfig, csv_path: str | Path,
              log=lambda msg: None) -> int:
    """Cross-product sweep with row-at-a-time flushing and resume."""
    csv_path = Path(csv_path)
    done: set[tuple] = set()
    if csv_path.exists():
        with open(csv_path) as fh:
            for row in csv.DictReader(fh):
                done.add((float(row["eps"]), int(row["c_seq"]), float(row["eta"]),
                          int(row["d"]), int(row["seed"])))
    new_file = not csv_path.exists()
    written = 0
    with open(csv_path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS)
        if new_file:
            writer.writeheader()
            fh.flush()
        for point in _sweep_points(config):
            for seed in config.seeds:
                key = _point_key(point, seed, config)
                if key in done:
                    continue
                eff = config.replaced(**point)
                record = run_experiment(eff, seed)
                row = {
                    "variant": eff.curriculum.variant,
                    "eps": eff.curriculum.eps,
                    "delta": eff.curriculum.delta,
                    "c_seq": eff.world.coverage.c_seq,
                    "eta": eff.world.coverage.eta,
                    "d": eff.world.dim,
                    "seed": seed,
                    "k": record["k"],
                    "cot_queries": record["ledger"]["cot_queries"],
                    "verifier_calls": record["ledger"]["verifier_calls"],
                    "ref_generations": record["ledger"]["ref_generations"],
                    "learner_rollouts": record["ledger"]["learner_rollouts"],
                    "acc": record["eval"]["acc"],
                }
                writer.writerow(row)
                fh.flush()
                written += 1
                log(f"sweep point {key} acc={row['acc']:.4f}")
    return written


# ----------------------------------------------------------------------
# CLI
# ----------------------------------------------------------------------

def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUTPUT_ENV_VAR, "runs")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_weights(args) -> int:
    params = ScheduleParams(k=args.k, err_star=args.err_star,
                            threshold_frac=args.threshold)
    table = build_weight_table(params)
    writer = csv.writer(sys.stdout)
    writer.writerow(["j", "r", "beta", "alpha", "alpha_max"])
    for j in range(params.k + 1):
        for r in range(j + 1):
            alpha = f"{table.alpha(j, r):.17g}" if j < params.k else ""
            amax = f"{table.alpha_max[j]:.17g}" if j < params.k else ""
            writer.writerow([j, r, f"{table.beta(j, r):.17g}", alpha, amax])
    return 0


def _cmd_world(args) -> int:
    config = load_config(args.config)
    world = build_world(config.world)
    writer = csv.writer(sys.stdout)
    writer.writerow(["# theta_star", format(world.theta_key, "x")])
    writer.writerow(["x", "rho", "covered", "answer_coord", "correct_token"])
    for x in range(config.world.prompt_universe):
        coord = world.index_of(x, config.world.horizon) \
            if not config.world.prefix_mixing else ""
        writer.writerow([x, f"{world.rho[x]:.17g}", int(world.covered[x]),
                         coord, world.correct_token(x)])
    return 0


def _cmd_run(args, variant: str) -> int:
    config = load_config(args.config)
    if config.curriculum.variant != variant:
        raise ConfigurationError(
            f"config variant {config.curriculum.variant!r}; expected {variant!r}")
    out = _out_dir(args)
    seeds = [args.seed] if args.seed is not None else config.seeds
    for seed in seeds:
        record = run_experiment(config, seed)
        path = out / f"{variant}-seed{seed}.json"
        path.write_text(record_to_json(record))
        print(f"{path} acc={record['eval']['acc']:.4f} k={record['k']} "
              f"cot={record['ledger']['cot_queries']} "
              f"ref={record['ledger']['ref_generations']}")
    return 0


def _cmd_baseline_ntp(args) -> int:
    config = load_config(args.config)
    world = build_world(config.world)
    result = baseline_ntp_minimal_pool(world, config.curriculum.eps,
                                       seed=config.seeds[0])
    out = _out_dir(args) / "baseline-ntp.json"
    out.write_text(record_to_json({
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "minimal_pool": result.minimal_pool,
        "probes": result.probes,
    }))
    print(f"{out} minimal_pool={result.minimal_pool}")
    return 0


def _cmd_baseline_rlft(args) -> int:
    config = load_config(args.config)
    world = build_world(config.world)
    out = _out_dir(args)
    for seed in config.seeds:
        acc, ledger, n = baseline_rl_finetune(
            world, config.curriculum.eps, config.curriculum.delta,
            config.budget, seed)
        path = out / f"baseline-rlft-seed{seed}.json"
        path.write_text(record_to_json({
            "schema_version": SCHEMA_VERSION,
            "config": config.to_dict(),
            "seed": seed,
            "n_prompts": n,
            "ledger": ledger.snapshot(),
            "acc": acc,
        }))
        print(f"{path} acc={acc:.4f} ref={ledger.ref_generations}")
    return 0


def _cmd_calibrate(args) -> int:
    config = load_config(args.config)
    world = build_world(config.world)
    c1 = calibrate_c1(world, config.curriculum, seed=config.seeds[0])
    print(f"calibrated n_prompt_constant = {c1}")
    return 0


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    csv_path = args.csv or (_out_dir(args) / "sweep.csv")
    written = run_sweep(config, csv_path, log=print)
    print(f"{csv_path}: wrote {written} rows")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autocurriculum",
        description="Verifier-guided autocurriculum training simulations.")
    parser.add_argument("--out", default=None,
                        help=f"output directory (default ${OUTPUT_ENV_VAR} or ./runs)")
    sub = parser.add_subparsers(dest="command", required=True)

    w = sub.add_parser("weights", help="dump a weight schedule as CSV")
    w.add_argument("--k", type=int, required=True)
    w.add_argument("--err-star", dest="err_star", default="1/4")
    w.add_argument("--threshold", default="1/2")
    w.set_defaults(func=_cmd_weights)

    wd = sub.add_parser("world", help="dump world structure as CSV")
    wd.add_argument("--config", required=True)
    wd.set_defaults(func=_cmd_world)

    for name, variant in [("run-sft", "det-sft"), ("run-sft-stoch", "stoch-sft"),
                          ("run-rl", "rl")]:
        p = sub.add_parser(name, help=f"run the {variant} curriculum")
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.set_defaults(func=lambda a, v=variant: _cmd_run(a, v))

    bn = sub.add_parser("run-baseline-ntp",
                        help="minimal pool size for non-adaptive NTP")
    bn.add_argument("--config", required=True)
    bn.set_defaults(func=_cmd_baseline_ntp)

    br = sub.add_parser("run-baseline-rlft",
                        help="plain rejection-sampling fine-tune")
    br.add_argument("--config", required=True)
    br.set_defaults(func=_cmd_baseline_rlft)

    ca = sub.add_parser("calibrate", help="calibrate the sample constant")
    ca.add_argument("--config", required=True)
    ca.set_defaults(func=_cmd_calibrate)

    sw = sub.add_parser("sweep", help="run the configured parameter sweep")
    sw.add_argument("--config", required=True)
    sw.add_argument("--csv", default=None)
    sw.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
