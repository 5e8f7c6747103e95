"""Base learners: next-token ERM and verifier-filtered RL fine-tuning.

Both learners minimize their empirical loss by exact enumeration of the
model class (vectorized over key bitmasks, chunked so large classes
never materialize at once), with ties broken by enumeration order: key
ascending, then noise ascending.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ConfigurationError, ParameterError
from .metering import CostLedger
from .seeding import derive_rng
from .validation import check_prompts
from .world import ModelId, Trace, World, model_trace, ref_generate_batch

_CHUNK_BITS = 18


@dataclass(frozen=True)
class SampleBudget:
    """Scale constant for the base-learner sample-size formula."""

    n_prompt_constant: float = 1.0

    def __post_init__(self):
        if self.n_prompt_constant <= 0:
            raise ParameterError("n_prompt_constant must be positive")


@dataclass
class CotDataset:
    """Prompt/trace pairs collected from the teacher."""

    items: list[tuple[int, Trace]] = field(default_factory=list)

    def append(self, x: int, trace: Trace) -> None:
        self.items.append((x, trace))

    def __len__(self) -> int:
        return len(self.items)


@dataclass
class FilteredSet:
    """Survivor traces per prompt instance plus the ideal target sets.

    Entries align with the training prompt list; a prompt drawn twice
    gets two independently sampled survivor sets.
    """

    prompts: list[int]
    survivors: list[set[Trace]]
    targets: list[set[Trace]]

    def matches_target(self) -> bool:
        return all(s == t for s, t in zip(self.survivors, self.targets))


def n_prompt(eps: float, delta: float, world: World, budget: SampleBudget) -> int:
    """Samples a weak learner needs for error eps at confidence 1 - delta."""
    if not 0.0 < eps < 1.0 or not 0.0 < delta < 1.0:
        raise ParameterError("eps and delta must lie in (0, 1)")
    cfg = world.config
    dims = cfg.dim * math.log(cfg.dim * cfg.horizon * cfg.alphabet_size)
    raw = (dims * math.log(1.0 / eps) + math.log(1.0 / delta)) / eps
    return max(1, math.ceil(budget.n_prompt_constant * raw))


def _key_chunks(dim: int):
    """Yield (offset, bit-matrix) covering all 2**dim keys in order."""
    total = 1 << dim
    step = min(total, 1 << _CHUNK_BITS)
    cols = np.arange(dim, dtype=np.uint32)
    for start in range(0, total, step):
        keys = np.arange(start, min(start + step, total), dtype=np.uint32)
        yield start, ((keys[:, None] >> cols[None, :]) & 1).astype(np.int8)


# ----------------------------------------------------------------------
# Next-token prediction ERM
# ----------------------------------------------------------------------

def _observations(world: World, dataset: CotDataset) -> tuple[np.ndarray, np.ndarray]:
    """Flatten the dataset into (coordinate, observed-token) pairs."""
    cfg = world.config
    coords: list[int] = []
    toks: list[int] = []
    if not cfg.prefix_mixing:
        xs = np.array([x for x, _ in dataset.items], dtype=np.int64)
        if len(xs):
            cmat = world.coords[:, xs]          # (T, n)
            coords = cmat.T.ravel().tolist()
            toks = [tok for _, tr in dataset.items for tok in tr]
    else:
        for x, tr in dataset.items:
            for t in range(1, cfg.horizon + 1):
                coords.append(world.index_of(x, t, tr[: t - 1]))
                toks.append(tr[t - 1])
    return np.asarray(coords, dtype=np.int64), np.asarray(toks, dtype=np.int64)


def ntp_erm(dataset: CotDataset, world: World) -> ModelId:
    """Empirical-risk minimizer over the full class.

    Deterministic class: 0-1 next-token loss. Stochastic class:
    log-loss jointly over (key, noise). An empty dataset returns the
    first model in enumeration order.
    """
    cfg = world.config
    dim = cfg.dim
    grid = cfg.noise_grid
    if len(dataset) == 0:
        return ModelId(key=0, noise=grid[0])

    coords, toks = _observations(world, dataset)
    binary = toks < 2
    # Tokens >= 2 never match a model output; they add a constant loss
    # (or a fixed log-penalty) identical for every candidate.
    n_ones = np.bincount(coords[binary & (toks == 1)], minlength=dim).astype(np.int64)
    n_zeros = np.bincount(coords[binary & (toks == 0)], minlength=dim).astype(np.int64)
    gain = (n_ones - n_zeros).astype(np.float64)  # match gain of setting a bit
    n_obs = len(coords)
    base_match = float(n_zeros.sum())

    best_loss = math.inf
    best_key = 0
    best_flat = 0
    if not cfg.is_stochastic:
        for offset, bits in _key_chunks(dim):
            matches = base_match + bits @ gain
            loss = n_obs - matches
            idx = int(np.argmin(loss))
            if loss[idx] < best_loss - 1e-12:
                best_loss = float(loss[idx])
                best_key = offset + idx
        return ModelId(key=best_key, noise=0.0)

    a = cfg.alphabet_size
    qs = np.array(grid)
    with np.errstate(divide="ignore"):
        log_hit = np.log((1.0 - qs) + qs / a)
        log_miss = np.log(qs / a)
    for offset, bits in _key_chunks(dim):
        matches = base_match + bits @ gain           # (chunk,)
        misses = (n_obs - matches)[:, None]
        # 0 * log(0) is a vanishing penalty, not NaN: a zero-noise model
        # that matches every observation has zero loss.
        with np.errstate(invalid="ignore"):
            miss_term = np.where(misses == 0, 0.0, misses * log_miss[None, :])
        loss = -(matches[:, None] * log_hit[None, :] + miss_term)
        flat = int(np.argmin(loss))
        val = float(loss.ravel()[flat])
        if val < best_loss - 1e-12:
            best_loss = val
            best_flat = offset * len(grid) + flat
    return ModelId(key=best_flat // len(grid), noise=grid[best_flat % len(grid)])


class NextTokenERM(BaseEstimator):
    """Estimator wrapper over the exact next-token ERM."""

    def __init__(self, world: World):
        self.world = world

    def fit(self, prompts: Sequence[int], traces: Sequence[Trace]):
        prompts = check_prompts(prompts, self.world)
        if len(prompts) != len(traces):
            raise ParameterError("prompts and traces must align")
        dataset = CotDataset(list(zip(prompts.tolist(), [tuple(t) for t in traces])))
        self.model_ = ntp_erm(dataset, self.world)
        return self

    def predict(self, prompts: Sequence[int]) -> np.ndarray:
        prompts = check_prompts(prompts, self.world)
        return np.array([model_trace(self.world, self.model_, int(x))[-1]
                         for x in prompts])


# ----------------------------------------------------------------------
# RL fine-tuning via rejection sampling against the verifier
# ----------------------------------------------------------------------

def rl_sample_count(n: int, c_seq: int, delta: float) -> int:
    """Reference draws per prompt: ceil(c_seq * ln(4 n c_seq / delta))."""
    if n < 1:
        raise ParameterError("need at least one prompt")
    return max(1, math.ceil(c_seq * math.log(4.0 * n * c_seq / delta)))


def _filtered_sets(prompts: np.ndarray, world: World, m: int,
                   rng: np.random.Generator, ledger: CostLedger) -> FilteredSet:
    c_seq = world.config.coverage.c_seq
    threshold = 1.0 / c_seq
    survivors: list[set[Trace]] = []
    targets: list[set[Trace]] = []
    for x in prompts.tolist():
        drawn = ref_generate_batch(world, x, m, rng, ledger)
        kept: set[Trace] = set()
        for trace, prob, _count in drawn:
            if prob < threshold:
                continue
            ledger.add(verifier=1)
            if trace[-1] == world.correct_token(x):
                kept.add(trace)
        survivors.append(kept)
        support, probs = world.ref_support(x)
        targets.append({tr for tr, p in zip(support, probs)
                        if p >= threshold and tr[-1] == world.correct_token(x)})
    return FilteredSet(prompts=prompts.tolist(), survivors=survivors, targets=targets)


def _erm_over_traces(prompts: np.ndarray, filtered: FilteredSet,
                     world: World) -> ModelId:
    cfg = world.config
    dim = cfg.dim
    if not cfg.prefix_mixing:
        coord_mat = world.coords[:, prompts]      # (T, n)
        best_loss = math.inf
        best_key = 0
        for offset, bits in _key_chunks(dim):
            hits = np.zeros(bits.shape[0], dtype=np.int64)
            for col in range(len(prompts)):
                in_set = np.zeros(bits.shape[0], dtype=bool)
                for trace in filtered.survivors[col]:
                    target = np.asarray(trace, dtype=np.int8)
                    if target.max(initial=0) > 1:
                        continue  # traces with non-bit tokens match no model
                    in_set |= np.all(bits[:, coord_mat[:, col]] == target, axis=1)
                hits += in_set
            loss = len(prompts) - hits
            idx = int(np.argmin(loss))
            if loss[idx] < best_loss - 1e-12:
                best_loss = float(loss[idx])
                best_key = offset + idx
        return ModelId(key=best_key, noise=0.0)

    # Prefix-mixing worlds: per-model trace simulation (small dims only).
    best_key, best_loss = 0, math.inf
    for key in range(1 << dim):
        model = ModelId(key=key, noise=0.0)
        loss = sum(model_trace(world, model, int(x)) not in filtered.survivors[i]
                   for i, x in enumerate(prompts))
        if loss < best_loss:
            best_loss, best_key = loss, key
    return ModelId(key=best_key, noise=0.0)


def rl_finetune(prompts: Sequence[int], world: World, delta: float,
                rng: np.random.Generator, ledger: CostLedger,
                return_details: bool = False):
    """Train a deterministic model from reference rollouts and the verifier.

    Per prompt, draws reference traces, filters duplicates, low
    reference probability, and verifier failures, then returns the
    class member whose trace lands in the surviving set on the most
    prompts. Prompts with an empty surviving set cost every candidate
    equally.
    """
    if world.config.is_stochastic:
        raise ConfigurationError("rl_finetune requires a deterministic class")
    if not 0.0 < delta < 1.0:
        raise ParameterError("delta must lie in (0, 1)")
    prompts = check_prompts(prompts, world)
    if len(prompts) == 0:
        raise ParameterError("need at least one prompt")
    m = rl_sample_count(len(prompts), world.config.coverage.c_seq, delta)
    filtered = _filtered_sets(prompts, world, m, rng, ledger)
    model = _erm_over_traces(prompts, filtered, world)
    if return_details:
        return model, filtered, m
    return model


class RLFineTune(BaseEstimator):
    """Estimator wrapper over verifier-filtered rejection-sampling ERM."""

    def __init__(self, world: World, delta: float = 0.1, seed: int = 0):
        self.world = world
        self.delta = delta
        self.seed = seed

    def fit(self, prompts: Sequence[int]):
        self.ledger_ = CostLedger()
        rng = derive_rng(self.seed, "rl-finetune")
        self.model_, self.filtered_, self.m_per_prompt_ = rl_finetune(
            prompts, self.world, self.delta, rng, self.ledger_, return_details=True)
        return self

    def predict(self, prompts: Sequence[int]) -> np.ndarray:
        prompts = check_prompts(prompts, self.world)
        return np.array([model_trace(self.world, self.model_, int(x))[-1]
                         for x in prompts])
