"""Accuracy estimation for models, ensembles, mixtures, and consensus.

Analytic mode sums closed-form per-prompt accuracies against the exact
prompt distribution; Monte-Carlo mode samples prompts and rollouts.
Evaluation work is charged to its own ledger so training costs stay
untouched by measurement.
"""

from __future__ import annotations

import warnings
from typing import Optional, Union

import numpy as np

from .aggregate import ConsensusModel, Ensemble, MixtureModel
from .errors import ParameterError
from .metering import CostLedger, EvalReport
from .world import ModelId, World, analytic_acc_members, model_trace

Subject = Union[ModelId, Ensemble, MixtureModel, ConsensusModel]


def _analytic_per_prompt(subject: Subject, world: World) -> np.ndarray:
    """Per-prompt accuracy over the whole universe, exact."""
    if isinstance(subject, ModelId):
        return analytic_acc_members(world, [subject])[0]
    if isinstance(subject, Ensemble):
        prompts = np.arange(world.config.prompt_universe)
        return (subject.answers(world, prompts) == world.correct_bit).astype(float)
    if isinstance(subject, MixtureModel):
        return subject.acc_x(world, np.arange(world.config.prompt_universe))
    raise ParameterError(
        f"no closed-form accuracy for {type(subject).__name__}")


def _sample_answer(subject: Subject, world: World, x: int,
                   rng: np.random.Generator, ledger: CostLedger) -> int:
    if isinstance(subject, ModelId):
        ledger.add(rollouts=1)
        return model_trace(world, subject, x, rng)[-1]
    if isinstance(subject, Ensemble):
        ledger.add(rollouts=len(subject.members))
        return subject.answer(world, x)
    if isinstance(subject, MixtureModel):
        ledger.add(rollouts=1)
        return int(subject.sample_answers(world, np.array([x]), rng)[0])
    if isinstance(subject, ConsensusModel):
        ledger.add(rollouts=subject.n_votes)
        return int(subject.sample_answers(world, np.array([x]), rng)[0])
    raise ParameterError(f"cannot sample from {type(subject).__name__}")


def estimate_acc(subject: Subject, world: World, n_eval: int,
                 rng: Optional[np.random.Generator] = None, mode: str = "analytic",
                 eval_ledger: Optional[CostLedger] = None) -> EvalReport:
    """Accuracy report for a subject under the world's prompt distribution.

    Analytic mode is exact and free; it falls back to Monte-Carlo (with
    a notice) on prefix-mixing worlds where no closed form exists.
    """
    if mode not in ("analytic", "mc"):
        raise ParameterError(f"unknown mode {mode!r}")
    ledger = eval_ledger if eval_ledger is not None else CostLedger()
    if mode == "analytic" and (world.config.prefix_mixing
                               or isinstance(subject, ConsensusModel)):
        warnings.warn("analytic accuracy unavailable; falling back to mc",
                      stacklevel=2)
        mode = "mc"
    if mode == "analytic":
        per_prompt = _analytic_per_prompt(subject, world)
        acc = float(np.dot(world.rho, per_prompt))
        p35 = float(world.rho[per_prompt >= 3.0 / 5.0].sum())
        p45 = float(world.rho[per_prompt >= 4.0 / 5.0].sum())
        return EvalReport(acc=acc, per_prompt_acc=per_prompt.tolist(),
                          pass_frac_3_5=p35, pass_frac_4_5=p45,
                          mode="analytic", n_eval=world.config.prompt_universe)

    if n_eval < 1:
        raise ParameterError("n_eval must be >= 1 in mc mode")
    if rng is None:
        raise ParameterError("mc mode requires a random stream")
    prompts = world.sample_prompts(n_eval, rng)
    hits = np.zeros(n_eval, dtype=bool)
    per_prompt_hits: dict[int, list[int]] = {}
    fast = (not world.config.prefix_mixing
            and isinstance(subject, (ModelId, MixtureModel, ConsensusModel)))
    if fast:
        uniq, inverse, counts = np.unique(prompts, return_inverse=True,
                                          return_counts=True)
        correct = world.correct_bit[uniq]
        for ui, (x, cnt) in enumerate(zip(uniq, counts)):
            draws = _fast_answers(subject, world, int(x), int(cnt), rng, ledger)
            ok = draws == correct[ui]
            hits[inverse == ui] = ok
            per_prompt_hits.setdefault(int(x), []).extend(ok.astype(int).tolist())
    else:
        for i, x in enumerate(prompts):
            ans = _sample_answer(subject, world, int(x), rng, ledger)
            ledger.add(verifier=1)
            ok = ans == world.correct_token(int(x))
            hits[i] = ok
            per_prompt_hits.setdefault(int(x), []).append(int(ok))
    acc = float(hits.mean())
    per_x = {x: float(np.mean(v)) for x, v in per_prompt_hits.items()}
    weights = np.array([len(v) for v in per_prompt_hits.values()], dtype=float)
    vals = np.array(list(per_x.values()))
    p35 = float(weights[vals >= 0.6].sum() / weights.sum())
    p45 = float(weights[vals >= 0.8].sum() / weights.sum())
    table = [per_x.get(x, float("nan")) for x in range(world.config.prompt_universe)] \
        if world.config.prompt_universe <= 4096 else []
    return EvalReport(acc=acc, per_prompt_acc=table, pass_frac_3_5=p35,
                      pass_frac_4_5=p45, mode="mc", n_eval=n_eval)


def _fast_answers(subject: Subject, world: World, x: int, count: int,
                  rng: np.random.Generator, ledger: CostLedger) -> np.ndarray:
    """Vectorized outcome draws on prefix-independent worlds."""
    if isinstance(subject, ModelId):
        ledger.add(rollouts=count, verifier=count)
        acc = float(analytic_acc_members(world, [subject])[0, x])
        k = int(rng.binomial(count, acc)) if 0.0 < acc < 1.0 else \
            (count if acc >= 1.0 else 0)
        correct = world.correct_bit[x]
        out = np.full(count, 1 - correct, dtype=np.int64)
        out[:k] = correct
        return out
    if isinstance(subject, MixtureModel):
        ledger.add(rollouts=count, verifier=count)
        dist = subject.outcome_distribution(world, x)
        counts = rng.multinomial(count, dist)
        return np.repeat(np.arange(len(dist)), counts)
    if isinstance(subject, ConsensusModel):
        ledger.add(rollouts=count * subject.n_votes, verifier=count)
        dist = subject.mixture.outcome_distribution(world, x)
        votes = rng.multinomial(subject.n_votes, dist, size=count)
        return np.argmax(votes, axis=1)
    raise ParameterError("no fast path for this subject")
