"""Non-adaptive baselines and the sample-constant calibration sweep."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .curriculum import CurriculumConfig
from .errors import ParameterError
from .evaluation import estimate_acc
from .learners import CotDataset, SampleBudget, n_prompt, ntp_erm, rl_finetune
from .metering import CostLedger
from .seeding import derive_rng, hash_labels
from .world import World, teacher_cot


def _ntp_probe_acc(world: World, pool_size: int, seed: int,
                   ledger: Optional[CostLedger] = None) -> float:
    """Train plain NTP on a fresh pool with a teacher CoT per prompt."""
    ledger = ledger if ledger is not None else CostLedger()
    prompts = world.sample_prompts(pool_size, derive_rng(seed, "ntp-pool"))
    dataset = CotDataset([(int(x), teacher_cot(world, int(x), ledger))
                          for x in prompts])
    model = ntp_erm(dataset, world)
    return estimate_acc(model, world, 1, mode="analytic").acc


@dataclass
class BisectionResult:
    minimal_pool: int
    probes: list[tuple[int, int, int]]  # (pool, successes, trials)


def baseline_ntp_minimal_pool(world: World, eps: float, n_seeds: int = 10,
                              seed: int = 0, success_quota: float = 0.8,
                              start: int = 4, max_pool: int = 1 << 22
                              ) -> BisectionResult:
    """Smallest pool size at which non-adaptive NTP reaches 1 - eps.

    A pool size passes a probe when at least a quota of seeded runs hit
    the accuracy target. Bisection stops once the bracket width drops
    to 10% of its midpoint.
    """
    if not 0.0 < eps < 1.0:
        raise ParameterError("eps must lie in (0, 1)")
    need = math.ceil(success_quota * n_seeds)
    probes: list[tuple[int, int, int]] = []

    def probe(n: int) -> bool:
        wins = 0
        for s in range(n_seeds):
            probe_seed = hash_labels(seed, "ntp-probe", n, s) & (2**63 - 1)
            wins += _ntp_probe_acc(world, n, probe_seed) >= 1.0 - eps
        probes.append((n, wins, n_seeds))
        return wins >= need

    lo, hi = 0, start
    while not probe(hi):
        lo, hi = hi, hi * 2
        if hi > max_pool:
            raise ParameterError(f"no pool <= {max_pool} reaches 1-eps")
    while hi - lo > 0.1 * (hi + lo) / 2.0 and hi - lo > 1:
        mid = (lo + hi) // 2
        if probe(mid):
            hi = mid
        else:
            lo = mid
    return BisectionResult(minimal_pool=hi, probes=probes)


def baseline_rl_finetune(world: World, eps: float, delta: float,
                         budget: SampleBudget, seed: int = 0
                         ) -> tuple[float, CostLedger, int]:
    """Plain rejection-sampling fine-tune on a full-size prompt dataset."""
    ledger = CostLedger()
    n = n_prompt(eps, delta, world, budget)
    prompts = world.sample_prompts(n, derive_rng(seed, "rlft-pool"))
    model = rl_finetune(prompts, world, delta, derive_rng(seed, "rlft"), ledger)
    acc = estimate_acc(model, world, 1, mode="analytic").acc
    return acc, ledger, n


def calibrate_c1(world: World, config: CurriculumConfig, n_runs: int = 100,
                 pass_rate: float = 0.95, seed: int = 0,
                 grid: Optional[list[float]] = None) -> float:
    """Smallest sample constant whose phase-0 weak learner is reliable.

    For each candidate constant, runs phase-0 training (an i.i.d. pool
    slice of the phase cap size) across seeds and checks that the
    trained model's error is at most the variant's weak-learner target
    in the required fraction of runs.
    """
    if grid is None:
        grid = [0.01, 0.02, 0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0]
    from .curriculum import choose_k  # local to avoid cycle at import time
    k = choose_k(config)
    target = float(config.learner_target)
    need = math.ceil(pass_rate * n_runs)
    for c1 in grid:
        budget = SampleBudget(n_prompt_constant=c1)
        cap = n_prompt(target, config.delta / k, world, budget)
        wins = 0
        for s in range(n_runs):
            rng = derive_rng(seed, "calibrate", repr(c1), s)
            prompts = world.sample_prompts(cap, rng)
            ledger = CostLedger()
            if config.variant == "rl":
                model = rl_finetune(prompts, world, config.delta / k,
                                    derive_rng(seed, "calibrate-rl", repr(c1), s),
                                    ledger)
            else:
                dataset = CotDataset([(int(x), teacher_cot(world, int(x), ledger))
                                      for x in prompts])
                model = ntp_erm(dataset, world)
            err = 1.0 - estimate_acc(model, world, 1, mode="analytic").acc
            wins += err <= target
        if wins >= need:
            return c1
    raise ParameterError("no constant in the calibration grid was reliable")
