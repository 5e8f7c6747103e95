"""Synthetic problem instances with planted structure.

A world bundles a finite prompt universe with a power-law prompt
distribution, a planted bit-vector key defining an indexed-lookup model
class, the induced teacher, a sparse outcome verifier, and a reference
model with configurable sequence-level coverage.

The lookup class: model (key, noise) at position t of prompt x emits the
token encoding bit ``key[g(x, t)]`` with probability 1 - noise and a
uniform alphabet token otherwise. The index map g routes intermediate
positions and the final (answer) position into disjoint coordinate
banks, so answer coordinates are only ever taught by answer tokens;
this is what makes rare answer coordinates genuinely expensive for
non-adaptive supervision.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import CapacityError, ConfigurationError, ParameterError
from .metering import CostLedger
from .seeding import derive_rng, hash_labels, mix64

Trace = tuple[int, ...]

_MAX_DIM = 24


@dataclass(frozen=True)
class CoverageProfile:
    """Reference-model coverage: support size c_seq, uncovered mass eta."""

    c_seq: int = 1
    eta: float = 0.0

    def validate(self) -> None:
        if self.c_seq < 1:
            raise ParameterError("c_seq must be >= 1")
        if not 0.0 <= self.eta < 1.0:
            raise ParameterError("eta must lie in [0, 1)")


@dataclass(frozen=True)
class WorldConfig:
    alphabet_size: int = 2
    horizon: int = 4
    dim: int = 8
    prompt_universe: int = 256
    rho_exponent: float = 0.0
    prefix_mixing: bool = False
    stochastic_noise_grid: tuple[float, ...] = ()
    coverage: CoverageProfile = field(default_factory=CoverageProfile)
    seed: int = 0

    def validate(self) -> None:
        if self.alphabet_size < 2:
            raise ParameterError("alphabet_size must be >= 2")
        if self.horizon < 1:
            raise ParameterError("horizon must be >= 1")
        if self.dim < 1:
            raise ParameterError("dim must be >= 1")
        if self.dim > _MAX_DIM:
            raise CapacityError(
                f"dim={self.dim} exceeds the enumerable limit {_MAX_DIM}")
        if self.prompt_universe < 1:
            raise ParameterError("prompt_universe must be >= 1")
        if self.rho_exponent < 0:
            raise ParameterError("rho_exponent must be >= 0")
        grid = self.stochastic_noise_grid
        if grid:
            if any(not 0.0 <= q < 1.0 for q in grid):
                raise ParameterError("noise grid entries must lie in [0, 1)")
            if len(set(grid)) != len(grid):
                raise ParameterError("noise grid entries must be distinct")
            if 0.0 not in grid:
                raise ConfigurationError(
                    "noise grid must contain 0 so the teacher is in the class")
        self.coverage.validate()

    @property
    def noise_grid(self) -> tuple[float, ...]:
        return tuple(sorted(self.stochastic_noise_grid)) or (0.0,)

    @property
    def is_stochastic(self) -> bool:
        return bool(self.stochastic_noise_grid)

    @property
    def class_size(self) -> int:
        return (1 << self.dim) * len(self.noise_grid)


@dataclass(frozen=True)
class ModelId:
    """A member of the lookup class: key bitmask plus emission noise."""

    key: int
    noise: float = 0.0

    def key_bits(self, dim: int) -> np.ndarray:
        return (self.key >> np.arange(dim)) & 1


class World:
    """Immutable instance; all structure is a pure function of the config."""

    def __init__(self, config: WorldConfig):
        config.validate()
        self.config = config
        cfg = config

        rng_theta = derive_rng(cfg.seed, "theta")
        self.theta_bits = rng_theta.integers(0, 2, size=cfg.dim).astype(np.int64)
        self.theta_key = int(np.sum(self.theta_bits << np.arange(cfg.dim)))
        self.teacher = ModelId(key=self.theta_key, noise=0.0)

        x = np.arange(cfg.prompt_universe, dtype=np.float64)
        weights = (1.0 + x) ** (-cfg.rho_exponent)
        self.rho = weights / weights.sum()
        self._rho_cum = np.cumsum(self.rho)

        # Coordinate banks: positions t < T hash into [0, dim//2),
        # position T into [dim//2, dim); degenerate at dim == 1.
        self._ans_start = cfg.dim // 2
        self._ans_size = cfg.dim - self._ans_start
        self._inter_size = max(1, cfg.dim // 2)
        self._gseed = np.uint64(mix64(hash_labels(cfg.seed, "index-map") & (2**64 - 1)))

        if not cfg.prefix_mixing:
            xs = np.arange(cfg.prompt_universe)
            self.coords = np.stack(
                [self._coord_of(xs, t) for t in range(1, cfg.horizon + 1)])
            self.answer_coord = self.coords[-1]
            self.correct_bit = self.theta_bits[self.answer_coord]
        else:
            self.coords = None
            self.answer_coord = None
            self.correct_bit = None

        # Covered/uncovered flags by per-prompt hash threshold (marginal eta).
        hashes = mix64(np.uint64(mix64(hash_labels(cfg.seed, "coverage") & (2**64 - 1)))
                       ^ mix64(np.arange(cfg.prompt_universe, dtype=np.uint64)))
        self.covered = (hashes.astype(np.float64) / 2.0**64) >= cfg.coverage.eta

        self._support_cache: dict[int, tuple[list[Trace], np.ndarray]] = {}

    # ----- index map ---------------------------------------------------

    def _position_hash(self, x, t: int, prefix: Sequence[int] = ()):
        h = self._gseed ^ mix64(np.uint64(x) if np.isscalar(x) else x.astype(np.uint64))
        h = mix64(h ^ mix64(np.uint64(t)))
        if self.config.prefix_mixing:
            for tok in prefix:
                h = mix64(h ^ mix64(np.uint64(tok + 3)))
        return h

    def _coord_of(self, x, t: int, prefix: Sequence[int] = ()):
        h = self._position_hash(x, t, prefix)
        if t == self.config.horizon:
            return (self._ans_start + h % np.uint64(self._ans_size)).astype(np.int64) \
                if not np.isscalar(x) else int(self._ans_start + h % np.uint64(self._ans_size))
        coord = h % np.uint64(self._inter_size)
        return coord.astype(np.int64) if not np.isscalar(x) else int(coord)

    def index_of(self, x: int, t: int, prefix: Sequence[int] = ()) -> int:
        """Key coordinate read at position t (1-based) of prompt x."""
        if not 1 <= t <= self.config.horizon:
            raise ParameterError("position out of range")
        if not self.config.prefix_mixing:
            return int(self.coords[t - 1, x])
        return self._coord_of(x, t, prefix)

    # ----- sampling and oracles ----------------------------------------

    def sample_prompts(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.searchsorted(self._rho_cum, rng.random(n), side="right").astype(np.int64)

    def correct_token(self, x: int) -> int:
        if not self.config.prefix_mixing:
            return int(self.correct_bit[x])
        return self.teacher_trace(x)[-1]

    def teacher_trace(self, x: int) -> Trace:
        """Teacher chain-of-thought; pure, no ledger charge."""
        if not self.config.prefix_mixing:
            return tuple(int(b) for b in self.theta_bits[self.coords[:, x]])
        toks: list[int] = []
        for t in range(1, self.config.horizon + 1):
            toks.append(int(self.theta_bits[self._coord_of(x, t, toks)]))
        return tuple(toks)

    # ----- reference model ---------------------------------------------

    def ref_support(self, x: int) -> tuple[list[Trace], np.ndarray]:
        """Support traces and their exact probabilities at prompt x."""
        cached = self._support_cache.get(x)
        if cached is not None:
            return cached
        cfg = self.config
        c = cfg.coverage.c_seq
        covered = bool(self.covered[x])
        if not covered and c == 1:
            raise ConfigurationError(
                f"prompt {x} is uncovered but c_seq=1 leaves no support")
        n_distract = c - 1
        distractors = self._distractors(x, n_distract)
        if covered:
            support = [self.teacher_trace(x)] + distractors
            if c == 1:
                probs = np.array([1.0])
            else:
                probs = np.concatenate(
                    [[1.0 / c], np.full(n_distract, (1.0 - 1.0 / c) / n_distract)])
        else:
            support = distractors
            probs = np.full(n_distract, 1.0 / n_distract)
        self._support_cache[x] = (support, probs)
        return support, probs

    def _distractors(self, x: int, count: int) -> list[Trace]:
        if count == 0:
            return []
        cfg = self.config
        a = cfg.alphabet_size
        correct = self.correct_token(x)
        capacity = (a - 1) * a ** (cfg.horizon - 1)
        if count > capacity:
            raise ConfigurationError(
                f"cannot build {count} distinct wrong-answer traces "
                f"(alphabet {a}, horizon {cfg.horizon})")
        rng = derive_rng(cfg.seed, "distractors", x)
        seen: set[Trace] = set()
        out: list[Trace] = []
        while len(out) < count:
            inner = rng.integers(0, a, size=cfg.horizon - 1)
            wrong = (correct + 1 + int(rng.integers(0, a - 1))) % a
            trace = tuple(int(v) for v in inner) + (wrong,)
            if trace not in seen:
                seen.add(trace)
                out.append(trace)
        return out


# ----------------------------------------------------------------------
# Module operations
# ----------------------------------------------------------------------

def build_world(config: WorldConfig) -> World:
    return World(config)


def model_step(world: World, m: ModelId, x: int, prefix: Sequence[int],
               rng: Optional[np.random.Generator] = None) -> int:
    """Next token of model m at prompt x given the generated prefix."""
    t = len(prefix) + 1
    if t > world.config.horizon:
        raise ParameterError("prefix already has horizon length")
    coord = world.index_of(x, t, prefix)
    bit = (m.key >> coord) & 1
    if m.noise == 0.0:
        return bit
    if rng is None:
        raise ParameterError("stochastic model_step requires a random stream")
    if rng.random() < m.noise:
        return int(rng.integers(0, world.config.alphabet_size))
    return bit


def model_trace(world: World, m: ModelId, x: int,
                rng: Optional[np.random.Generator] = None) -> Trace:
    """Full autoregressive rollout of model m on prompt x."""
    toks: list[int] = []
    for _ in range(world.config.horizon):
        toks.append(model_step(world, m, x, toks, rng))
    return tuple(toks)


def teacher_cot(world: World, x: int, ledger: CostLedger) -> Trace:
    ledger.add(cot=1)
    return world.teacher_trace(x)


def verify(world: World, x: int, answer: int, ledger: CostLedger) -> bool:
    ledger.add(verifier=1)
    return int(answer) == world.correct_token(x)


def ref_generate(world: World, x: int, rng: np.random.Generator,
                 ledger: CostLedger) -> tuple[Trace, float]:
    """One reference draw plus its exact probability."""
    support, probs = world.ref_support(x)
    idx = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    idx = min(idx, len(support) - 1)
    ledger.add(ref=1)
    return support[idx], float(probs[idx])


def ref_generate_batch(world: World, x: int, m: int, rng: np.random.Generator,
                       ledger: CostLedger) -> list[tuple[Trace, float, int]]:
    """m i.i.d. reference draws, reported as (trace, probability, count).

    Sampling the per-support-atom counts from a multinomial is
    distributionally identical to m sequential draws; the ledger is
    charged for all m generations.
    """
    support, probs = world.ref_support(x)
    counts = rng.multinomial(m, probs)
    ledger.add(ref=m)
    return [(tr, float(p), int(c))
            for tr, p, c in zip(support, probs, counts) if c > 0]


def enumerate_class(world: World) -> Iterator[ModelId]:
    """All class members, key ascending then noise ascending."""
    grid = world.config.noise_grid
    for key in range(1 << world.config.dim):
        for q in grid:
            yield ModelId(key=key, noise=q)


# ----- analytic per-prompt accuracy (prefix-independent worlds) --------

def analytic_acc_members(world: World, members: Sequence[ModelId]) -> np.ndarray:
    """Per-prompt accuracy of each member over the whole universe.

    Returns an array of shape (len(members), prompt_universe). Only
    available when the index map ignores prefixes, where accuracy has
    the closed form match*(1-q) + q/|alphabet|.
    """
    if world.config.prefix_mixing:
        raise ParameterError("analytic accuracy unavailable with prefix mixing")
    a = world.config.alphabet_size
    coords = world.answer_coord
    out = np.empty((len(members), world.config.prompt_universe))
    for i, m in enumerate(members):
        bits = (m.key >> coords) & 1
        match = (bits == world.correct_bit)
        out[i] = np.where(match, 1.0 - m.noise + m.noise / a, m.noise / a)
    return out


def member_answers(world: World, members: Sequence[ModelId]) -> np.ndarray:
    """Deterministic answer tokens of members over the universe."""
    if world.config.prefix_mixing:
        raise ParameterError("vectorized answers unavailable with prefix mixing")
    coords = world.answer_coord
    return np.stack([(m.key >> coords) & 1 for m in members]) if members else \
        np.zeros((0, world.config.prompt_universe), dtype=np.int64)
