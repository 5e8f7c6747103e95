"""Curriculum drivers: rejection-sampled phases around a weak learner.

Each driver runs k phases. Phase j rejection-samples prompts from its
pool slice with the rank-dependent schedule weights, trains a base
learner on the accepted prompts, and appends the model to the ensemble
unconditionally (aborted phases still contribute whatever model their
undersized dataset produced). Drivers expose a scikit-learn style
surface: constructor parameters, fit over a prompt pool, predict for
answers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .aggregate import ConsensusModel, Ensemble, MixtureModel, consensus_default_n
from .errors import ConfigurationError, ParameterError
from .learners import (CotDataset, SampleBudget, n_prompt, ntp_erm,
                       rl_finetune)
from .metering import CostLedger
from .schedule import (ScheduleParams, WeightTable, build_weight_table,
                       validate_mc_sample_count)
from .seeding import derive_rng
from .validation import check_prompts
from .world import (ModelId, World, analytic_acc_members, member_answers,
                    teacher_cot)

_VARIANTS = {
    "det-sft": dict(err_star=Fraction(1, 4), threshold=Fraction(1, 2),
                    learner_target=Fraction(1, 4), rank_mode="det"),
    "stoch-sft": dict(err_star=Fraction(1, 10), threshold=Fraction(4, 5),
                      learner_target=Fraction(1, 400), rank_mode="mc"),
    "rl": dict(err_star=Fraction(1, 4), threshold=Fraction(1, 2),
               learner_target=Fraction(1, 4), rank_mode="det"),
}


@dataclass(frozen=True)
class CurriculumConfig:
    eps: float
    delta: float
    variant: str = "det-sft"
    k_override: Optional[int] = None
    consensus_samples: Optional[int] = None
    m_mc: int = 128

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ParameterError(f"unknown variant {self.variant!r}")
        if not 0.0 < self.eps < 1.0 or not 0.0 < self.delta < 1.0:
            raise ParameterError("eps and delta must lie in (0, 1)")
        if self.m_mc < 1:
            raise ParameterError("m_mc must be >= 1")

    @property
    def err_star(self) -> Fraction:
        return _VARIANTS[self.variant]["err_star"]

    @property
    def threshold_frac(self) -> Fraction:
        return _VARIANTS[self.variant]["threshold"]

    @property
    def learner_target(self) -> Fraction:
        return _VARIANTS[self.variant]["learner_target"]

    @property
    def rank_mode(self) -> str:
        return _VARIANTS[self.variant]["rank_mode"]

    def schedule_params(self, k: int) -> ScheduleParams:
        return ScheduleParams(k=k, err_star=self.err_star,
                              threshold_frac=self.threshold_frac)


@dataclass
class PhaseRecord:
    phase: int
    n_accepted: int
    cap: int
    aborted: bool
    model: ModelId
    m_per_prompt: int = 0
    n_examined: int = 0
    ledger_delta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "phase": self.phase,
            "n_accepted": self.n_accepted,
            "cap": self.cap,
            "aborted": self.aborted,
            "model_key": format(self.model.key, "x"),
            "model_noise": self.model.noise,
            "m_per_prompt": self.m_per_prompt,
            "n_examined": self.n_examined,
            "ledger_delta": self.ledger_delta,
        }


def choose_k(config: CurriculumConfig, table_builder=build_weight_table,
             k_max: int = 4096) -> int:
    """Smallest k whose schedule start value beta[0][0] is at most eps/4."""
    if config.k_override is not None:
        if config.k_override < 1:
            raise ParameterError("k_override must be >= 1")
        return config.k_override
    target = config.eps / 4.0
    for k in range(1, k_max + 1):
        table = table_builder(config.schedule_params(k))
        if table.beta(0, 0) <= target:
            return k
    raise ParameterError(f"no k <= {k_max} reaches beta[0][0] <= {target}")


def _pool_ranks(world: World, members: Sequence[ModelId], xs: np.ndarray,
                rank_mode: str, m_mc: int, rng: np.random.Generator) -> np.ndarray:
    """Ranks for a pool slice; costs are charged by the caller."""
    j = len(members)
    if j == 0 or len(xs) == 0:
        return np.zeros(len(xs), dtype=np.int64)
    if world.config.prefix_mixing:
        scratch = CostLedger()
        if rank_mode == "det":
            from .schedule import rank_det
            return np.array([rank_det(members, int(x), world, scratch) for x in xs])
        from .schedule import rank_mc
        return np.array([rank_mc(members, int(x), world, m_mc, rng, scratch)
                         for x in xs])
    if rank_mode == "det":
        ans = member_answers(world, list(members))[:, xs]
        return (ans == world.correct_bit[xs]).sum(axis=0)
    accs = analytic_acc_members(world, list(members))[:, xs]
    hits = rng.binomial(m_mc, accs)
    return (10 * hits >= 9 * m_mc).sum(axis=0).astype(np.int64)


def sample_subroutine(pool: Sequence[int], members: Sequence[ModelId],
                      table: WeightTable, j: int, cap: int, world: World,
                      rng: np.random.Generator, rank_mode: str,
                      ledger: CostLedger, m_mc: int = 128,
                      rank_rng: Optional[np.random.Generator] = None,
                      ) -> tuple[list[int], bool, int]:
    """Rejection-sample prompts from the pool until cap are accepted.

    Walks the pool in order, accepting a rank-r prompt with probability
    alpha[j][r] / alpha_max[j], and stops as soon as cap prompts are
    accepted. Returns (accepted prompts, aborted flag, prompts examined).
    The walk is evaluated in bulk but the ledger is charged only for
    the prefix a sequential pass would have examined.
    """
    if cap < 1:
        raise ParameterError("cap must be >= 1")
    if len(members) != j:
        raise ParameterError("phase index must equal the ensemble size")
    xs = np.asarray(pool, dtype=np.int64)
    ranks = _pool_ranks(world, members, xs, rank_mode,
                        m_mc, rank_rng if rank_rng is not None else rng)
    probs = table.acceptance_row(j)[ranks]
    # zero-probability ranks must never be accepted, even on a 0.0 draw
    accept = (rng.random(len(xs)) <= probs) & (probs > 0.0)
    cum = np.cumsum(accept)
    reached = np.nonzero(cum >= cap)[0]
    examined = int(reached[0]) + 1 if len(reached) else len(xs)
    taken = accept & (cum <= cap)
    taken[examined:] = False
    d_out = xs[taken].tolist()
    per_prompt = j * (m_mc if rank_mode == "mc" else 1)
    ledger.add(routing=examined, verifier=per_prompt * examined,
               rollouts=per_prompt * examined)
    return d_out, len(d_out) < cap, examined


@dataclass
class CurriculumRun:
    members: list[ModelId]
    records: list[PhaseRecord]
    ledger: CostLedger
    k: int
    table: WeightTable
    cap: int
    pool_size: int


def run_curriculum(pool: Sequence[int], world: World, config: CurriculumConfig,
                   budget: SampleBudget, seed: int = 0) -> CurriculumRun:
    """The shared phase loop behind all three drivers."""
    xs = check_prompts(pool, world)
    if config.variant == "stoch-sft":
        if not world.config.is_stochastic:
            raise ConfigurationError("stoch-sft needs a stochastic class")
        validate_mc_sample_count(config.m_mc)
    if config.variant == "rl" and world.config.is_stochastic:
        raise ConfigurationError("rl fine-tuning needs a deterministic class")
    k = choose_k(config)
    if len(xs) < k:
        raise ConfigurationError(f"pool of {len(xs)} cannot feed {k} phases")
    table = build_weight_table(config.schedule_params(k))
    cap = n_prompt(float(config.learner_target), config.delta / k, world, budget)
    shuffled = xs[derive_rng(seed, "pool-shuffle").permutation(len(xs))]
    parts = np.array_split(shuffled, k)

    ledger = CostLedger()
    members: list[ModelId] = []
    records: list[PhaseRecord] = []
    fallback = ModelId(key=0, noise=world.config.noise_grid[0])
    for j in range(k):
        before = ledger.snapshot()
        d_out, aborted, examined = sample_subroutine(
            parts[j], members, table, j, cap, world,
            derive_rng(seed, "accept", j), config.rank_mode, ledger,
            m_mc=config.m_mc, rank_rng=derive_rng(seed, "rank", j))
        m_per_prompt = 0
        if config.variant == "rl":
            if d_out:
                model, _filtered, m_per_prompt = rl_finetune(
                    d_out, world, config.delta / k,
                    derive_rng(seed, "learn", j), ledger, return_details=True)
            else:
                model = fallback
        else:
            dataset = CotDataset([(x, teacher_cot(world, x, ledger))
                                  for x in d_out])
            model = ntp_erm(dataset, world)
        members.append(model)
        records.append(PhaseRecord(
            phase=j, n_accepted=len(d_out), cap=cap, aborted=aborted,
            model=model, m_per_prompt=m_per_prompt, n_examined=examined,
            ledger_delta=ledger.delta_since(before)))
    return CurriculumRun(members=members, records=records, ledger=ledger,
                         k=k, table=table, cap=cap, pool_size=len(xs))


def autotune(pool: Sequence[int], world: World, config: CurriculumConfig,
             budget: SampleBudget, seed: int = 0) -> tuple[Ensemble, CurriculumRun]:
    """Deterministic-class SFT curriculum; returns the plurality ensemble."""
    if config.variant != "det-sft":
        raise ParameterError("autotune requires the det-sft variant")
    run = run_curriculum(pool, world, config, budget, seed)
    return Ensemble(members=run.members, aggregation="plurality"), run


def autotune_stoch(pool: Sequence[int], world: World, config: CurriculumConfig,
                   budget: SampleBudget, seed: int = 0
                   ) -> tuple[MixtureModel, CurriculumRun]:
    """General-class SFT curriculum; returns the uniform outcome mixture."""
    if config.variant != "stoch-sft":
        raise ParameterError("autotune_stoch requires the stoch-sft variant")
    run = run_curriculum(pool, world, config, budget, seed)
    return MixtureModel(members=run.members), run


def autotune_rl(pool: Sequence[int], world: World, config: CurriculumConfig,
                budget: SampleBudget, seed: int = 0
                ) -> tuple[Ensemble, CurriculumRun]:
    """Reference-model curriculum with no teacher queries anywhere."""
    if config.variant != "rl":
        raise ParameterError("autotune_rl requires the rl variant")
    run = run_curriculum(pool, world, config, budget, seed)
    return Ensemble(members=run.members, aggregation="plurality"), run


class _CurriculumEstimator(BaseEstimator):
    """Shared fit machinery for the three drivers."""

    _variant = ""

    def __init__(self, world: World, eps: float = 0.1, delta: float = 0.1,
                 n_prompt_constant: float = 1.0, k_override: Optional[int] = None,
                 m_mc: int = 128, seed: int = 0):
        self.world = world
        self.eps = eps
        self.delta = delta
        self.n_prompt_constant = n_prompt_constant
        self.k_override = k_override
        self.m_mc = m_mc
        self.seed = seed

    def _config(self) -> CurriculumConfig:
        return CurriculumConfig(eps=self.eps, delta=self.delta,
                                variant=self._variant, k_override=self.k_override,
                                m_mc=self.m_mc)

    def fit(self, prompts: Sequence[int]):
        run = run_curriculum(prompts, self.world, self._config(),
                             SampleBudget(self.n_prompt_constant), self.seed)
        self.run_ = run
        self.k_ = run.k
        self.phase_records_ = run.records
        self.ledger_ = run.ledger
        self._finalize(run)
        return self

    def _finalize(self, run: CurriculumRun) -> None:
        raise NotImplementedError


class AutoTuneSFT(_CurriculumEstimator):
    """Boosted SFT over a deterministic class; predicts by plurality."""

    _variant = "det-sft"

    def _finalize(self, run: CurriculumRun) -> None:
        self.ensemble_ = Ensemble(members=run.members, aggregation="plurality")

    def predict(self, prompts: Sequence[int]) -> np.ndarray:
        xs = check_prompts(prompts, self.world)
        return self.ensemble_.answers(self.world, xs)


class AutoTuneRL(_CurriculumEstimator):
    """Boosted RL fine-tuning of the reference model; plurality output."""

    _variant = "rl"

    def _finalize(self, run: CurriculumRun) -> None:
        self.ensemble_ = Ensemble(members=run.members, aggregation="plurality")

    def predict(self, prompts: Sequence[int]) -> np.ndarray:
        xs = check_prompts(prompts, self.world)
        return self.ensemble_.answers(self.world, xs)


class AutoTuneStochastic(_CurriculumEstimator):
    """Boosted SFT over a stochastic class; outputs the uniform mixture."""

    _variant = "stoch-sft"

    def _finalize(self, run: CurriculumRun) -> None:
        self.mixture_ = MixtureModel(members=run.members)

    def predict(self, prompts: Sequence[int]) -> np.ndarray:
        """Most probable answer token under the mixture, ties to smallest."""
        xs = check_prompts(prompts, self.world)
        return np.array([int(np.argmax(self.mixture_.outcome_distribution(
            self.world, int(x)))) for x in xs])

    def sample(self, prompts: Sequence[int], rng: np.random.Generator) -> np.ndarray:
        xs = check_prompts(prompts, self.world)
        return self.mixture_.sample_answers(self.world, xs, rng)

    def consensus(self, n_votes: Optional[int] = None) -> ConsensusModel:
        n = n_votes if n_votes is not None else consensus_default_n(self.eps)
        return ConsensusModel(mixture=self.mixture_, n_votes=n)
