"""Output aggregation: plurality vote, mixtures, and consensus voting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .world import ModelId, World, analytic_acc_members, member_answers, model_trace


def plurality(answers: Sequence[int]) -> int:
    """Most frequent token; ties go to the smallest token value."""
    if len(answers) == 0:
        raise ParameterError("plurality of an empty answer list")
    counts = np.bincount(np.asarray(answers, dtype=np.int64))
    return int(np.argmax(counts))


@dataclass
class Ensemble:
    """Ordered trained members plus the aggregation rule."""

    members: list[ModelId] = field(default_factory=list)
    aggregation: str = "plurality"

    def __len__(self) -> int:
        return len(self.members)

    def answers(self, world: World, prompts: np.ndarray) -> np.ndarray:
        """Plurality answer per prompt (deterministic members only)."""
        if not self.members:
            raise ParameterError("cannot aggregate an empty ensemble")
        if any(m.noise != 0.0 for m in self.members):
            raise ParameterError("plurality answers need deterministic members")
        if world.config.prefix_mixing:
            return np.array([plurality([model_trace(world, m, int(x))[-1]
                                        for m in self.members])
                             for x in prompts])
        ans = member_answers(world, self.members)[:, prompts]  # (k, n)
        # answers are bit tokens; counts via sum
        ones = ans.sum(axis=0)
        zeros = len(self.members) - ones
        return (ones > zeros).astype(np.int64)

    def answer(self, world: World, x: int) -> int:
        return int(self.answers(world, np.array([x]))[0])


@dataclass
class MixtureModel:
    """Uniform mixture of the members' outcome distributions."""

    members: list[ModelId] = field(default_factory=list)

    def outcome_distribution(self, world: World, x: int) -> np.ndarray:
        """Answer-token distribution of the mixture at prompt x."""
        if not self.members:
            raise ParameterError("cannot aggregate an empty mixture")
        a = world.config.alphabet_size
        coord = world.index_of(x, world.config.horizon)
        dist = np.zeros(a)
        for m in self.members:
            bit = (m.key >> coord) & 1
            dist += m.noise / a
            dist[bit] += 1.0 - m.noise
        return dist / len(self.members)

    def acc_x(self, world: World, prompts: np.ndarray) -> np.ndarray:
        """Per-prompt mixture accuracy: mean of member accuracies."""
        return analytic_acc_members(world, self.members)[:, prompts].mean(axis=0)

    def sample_answers(self, world: World, prompts: np.ndarray,
                       rng: np.random.Generator) -> np.ndarray:
        """One outcome-level draw per prompt."""
        out = np.empty(len(prompts), dtype=np.int64)
        a = world.config.alphabet_size
        pick = rng.integers(0, len(self.members), size=len(prompts))
        for i, (x, mi) in enumerate(zip(prompts, pick)):
            m = self.members[int(mi)]
            if world.config.prefix_mixing:
                out[i] = model_trace(world, m, int(x), rng)[-1]
                continue
            coord = world.index_of(int(x), world.config.horizon)
            bit = (m.key >> coord) & 1
            if m.noise and rng.random() < m.noise:
                out[i] = int(rng.integers(0, a))
            else:
                out[i] = bit
        return out


def consensus_default_n(eps: float) -> int:
    """Default consensus sample count: ceil(8 ln(1/eps))."""
    if not 0.0 < eps < 1.0:
        raise ParameterError("eps must lie in (0, 1)")
    return max(1, math.ceil(8.0 * math.log(1.0 / eps)))


def consensus_vote(mixture: MixtureModel, x: int, n_votes: int,
                   rng: np.random.Generator, world: World) -> int:
    """Plurality over n_votes independent mixture draws at prompt x."""
    if n_votes < 1:
        raise ParameterError("n_votes must be >= 1")
    if world.config.prefix_mixing:
        draws = mixture.sample_answers(world, np.full(n_votes, x), rng)
        return plurality(draws)
    dist = mixture.outcome_distribution(world, x)
    counts = rng.multinomial(n_votes, dist)
    return int(np.argmax(counts))


@dataclass
class ConsensusModel:
    """Mixture sharpened by an n-way consensus vote at answer time."""

    mixture: MixtureModel
    n_votes: int

    def sample_answers(self, world: World, prompts: np.ndarray,
                       rng: np.random.Generator) -> np.ndarray:
        return np.array([consensus_vote(self.mixture, int(x), self.n_votes, rng, world)
                         for x in prompts])
