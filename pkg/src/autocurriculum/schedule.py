"""Boosting-by-filtering weight schedules, ranks, and acceptance rules.

The schedule is a pair of triangular tables over (phase j, rank r): the
survival table beta and its discrete derivative alpha. beta[j][r] is the
probability that a run finishing from j trained models, r of them
correct on a prompt, ends with at most a threshold fraction of the
final ensemble correct, assuming every future model is independently
correct with probability 1 - err_star. alpha drives rejection sampling:
a prompt of rank r is kept with probability alpha[j][r] / max_r alpha[j][r].

The recursion is validated against an independent binomial-tail oracle
computed by direct probability summation in log space.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .metering import CostLedger
from .world import ModelId, World, analytic_acc_members, model_trace, verify


def _as_fraction(value) -> Fraction:
    """Exact rational from int/Fraction/str, or a float's shortest decimal."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    raise ParameterError(f"cannot interpret {value!r} as an exact rational")


@dataclass(frozen=True)
class ScheduleParams:
    """Ensemble size, weak-learner error target, final rank threshold."""

    k: int
    err_star: Fraction
    threshold_frac: Fraction

    def __post_init__(self):
        object.__setattr__(self, "err_star", _as_fraction(self.err_star))
        object.__setattr__(self, "threshold_frac", _as_fraction(self.threshold_frac))
        if self.k < 1:
            raise ParameterError("k must be >= 1")
        if not Fraction(0) < self.err_star < Fraction(1, 2):
            raise ParameterError("err_star must lie in (0, 1/2)")
        if not Fraction(0) < self.threshold_frac < Fraction(1):
            raise ParameterError("threshold_frac must lie in (0, 1)")

    @property
    def rank_cutoff(self) -> int:
        """Largest rank counted as a failing final ensemble: floor(threshold*k)."""
        return (self.threshold_frac.numerator * self.k) // self.threshold_frac.denominator


class WeightTable:
    """Immutable beta/alpha schedule for fixed parameters.

    beta has rows j = 0..k (row j holds ranks 0..j); alpha has rows
    j = 0..k-1. alpha_max[j] is the row maximum over attainable ranks.
    """

    def __init__(self, params: ScheduleParams, beta_rows: list[np.ndarray],
                 alpha_rows: list[np.ndarray]):
        self.params = params
        self._beta = beta_rows
        self._alpha = alpha_rows
        self.alpha_max = np.array([row.max() for row in alpha_rows])
        for arr in self._beta + self._alpha:
            arr.setflags(write=False)
        self.alpha_max.setflags(write=False)

    @property
    def k(self) -> int:
        return self.params.k

    def beta(self, j: int, r: int) -> float:
        if not (0 <= j <= self.k and 0 <= r <= j):
            raise ParameterError(f"beta index (j={j}, r={r}) out of range")
        return float(self._beta[j][r])

    def alpha(self, j: int, r: int) -> float:
        if not (0 <= j <= self.k - 1 and 0 <= r <= j):
            raise ParameterError(f"alpha index (j={j}, r={r}) out of range")
        return float(self._alpha[j][r])

    def beta_row(self, j: int) -> np.ndarray:
        return self._beta[j]

    def alpha_row(self, j: int) -> np.ndarray:
        return self._alpha[j]

    def acceptance_row(self, j: int) -> np.ndarray:
        """alpha[j] / alpha_max[j] with the all-zero row mapped to zeros."""
        amax = self.alpha_max[j]
        if amax == 0.0:
            return np.zeros_like(self._alpha[j])
        return self._alpha[j] / amax


def build_weight_table(params: ScheduleParams) -> WeightTable:
    """Backward recursion from the indicator base row at j = k."""
    k = params.k
    err = float(params.err_star)
    cutoff = params.rank_cutoff
    beta_rows: list[np.ndarray] = [np.empty(0)] * (k + 1)
    beta_rows[k] = (np.arange(k + 1) <= cutoff).astype(np.float64)
    for j in range(k - 1, -1, -1):
        nxt = beta_rows[j + 1]
        beta_rows[j] = err * nxt[: j + 1] + (1.0 - err) * nxt[1: j + 2]
    alpha_rows = [beta_rows[j + 1][: j + 1] - beta_rows[j + 1][1: j + 2]
                  for j in range(k)]
    return WeightTable(params, beta_rows, alpha_rows)


# ----------------------------------------------------------------------
# Independent binomial-tail oracle (direct summation, log space)
# ----------------------------------------------------------------------

_LOG_FACT = np.zeros(1)


def _log_factorials(n: int) -> np.ndarray:
    global _LOG_FACT
    if len(_LOG_FACT) <= n:
        start = len(_LOG_FACT)
        ext = np.log(np.arange(start, n + 1, dtype=np.float64))
        _LOG_FACT = np.concatenate([_LOG_FACT, np.cumsum(ext) + _LOG_FACT[-1]])
    return _LOG_FACT


def binomial_pmf_log(n: int, p: float) -> np.ndarray:
    """log Pr(Bin(n, p) = i) for i = 0..n."""
    if p <= 0.0 or p >= 1.0:
        raise ParameterError("success probability must lie in (0, 1)")
    lf = _log_factorials(n)
    i = np.arange(n + 1)
    logp = lf[n] - lf[i] - lf[n - i]
    return logp + i * math.log(p) + (n - i) * math.log1p(-p)


def binomial_cdf(n: int, m: int, p: float) -> float:
    """Pr(Bin(n, p) <= m) by summing the pmf smallest-first."""
    if m < 0:
        return 0.0
    if m >= n:
        return 1.0
    terms = np.exp(binomial_pmf_log(n, p)[: m + 1])
    return float(np.sum(np.sort(terms)))


def binomial_tail_oracle(k: int, j: int, r: int, success_prob: float,
                         threshold) -> float:
    """Pr(Bin(k - j, success_prob) <= floor(threshold * k) - r).

    Interprets the schedule entry as a conditional coin-tossing
    probability: with r of the first j coins already heads, the chance
    that the final heads count stays at or below the rank cutoff.
    """
    if not (0 <= j <= k and 0 <= r <= j):
        raise ParameterError(f"(k={k}, j={j}, r={r}) out of range")
    if not 0.0 < success_prob < 1.0:
        raise ParameterError("success_prob must lie in (0, 1)")
    thr = _as_fraction(threshold)
    cutoff = (thr.numerator * k) // thr.denominator
    return binomial_cdf(k - j, cutoff - r, success_prob)


def binomial_tail_table(params: ScheduleParams) -> list[np.ndarray]:
    """Oracle values for every (j, r), shaped like the beta rows."""
    k = params.k
    p = 1.0 - float(params.err_star)
    cutoff = params.rank_cutoff
    rows = []
    for j in range(k + 1):
        n = k - j
        if n == 0:
            cdf = None
        else:
            cdf = np.cumsum(np.exp(binomial_pmf_log(n, p)))
        r = np.arange(j + 1)
        m = cutoff - r
        row = np.empty(j + 1)
        for idx, mi in enumerate(m):
            if mi < 0:
                row[idx] = 0.0
            elif n == 0 or mi >= n:
                row[idx] = 1.0
            else:
                row[idx] = cdf[mi]
        rows.append(row)
    return rows


# ----------------------------------------------------------------------
# Ranks and acceptance probabilities
# ----------------------------------------------------------------------

def acceptance_prob(table: WeightTable, j: int, r: int) -> float:
    """Rejection-sampling keep probability for a rank-r prompt in phase j."""
    if not (0 <= j <= table.k - 1 and 0 <= r <= j):
        raise ParameterError(f"acceptance index (j={j}, r={r}) out of range")
    amax = table.alpha_max[j]
    if amax == 0.0:
        return 0.0
    return float(table.alpha(j, r) / amax)


def rank_det(members: Sequence[ModelId], x: int, world: World,
             ledger: CostLedger) -> int:
    """Number of members whose answer on x the verifier accepts.

    Each member evaluation generates one answer (one rollout) and makes
    one verifier call.
    """
    if any(m.noise != 0.0 for m in members):
        raise ParameterError("rank_det requires deterministic members")
    rank = 0
    for m in members:
        answer = model_trace(world, m, x)[-1]
        ledger.add(rollouts=1)
        if verify(world, x, answer, ledger):
            rank += 1
    return rank


def rank_mc(members: Sequence[ModelId], x: int, world: World, m_mc: int,
            rng: np.random.Generator, ledger: CostLedger) -> int:
    """Monte-Carlo rank: members whose estimated accuracy reaches 9/10.

    Per member, m_mc independent answers are drawn and verified; the
    member counts if at least 9/10 of them verify. On worlds whose
    per-prompt accuracy is analytic the verified count is sampled
    directly from Bin(m_mc, acc), which is the same distribution as
    materializing the rollouts; all m_mc rollouts and verifier calls
    are charged either way.
    """
    if m_mc < 1:
        raise ParameterError("m_mc must be >= 1")
    rank = 0
    analytic = not world.config.prefix_mixing
    if analytic and members:
        accs = analytic_acc_members(world, list(members))[:, x]
    for i, m in enumerate(members):
        if analytic:
            acc = float(accs[i])
            hits = int(rng.binomial(m_mc, acc)) if 0.0 < acc < 1.0 else \
                (m_mc if acc >= 1.0 else 0)
            ledger.add(rollouts=m_mc, verifier=m_mc)
        else:
            hits = 0
            for _ in range(m_mc):
                answer = model_trace(world, m, x, rng)[-1]
                ledger.add(rollouts=1)
                hits += verify(world, x, answer, ledger)
        if 10 * hits >= 9 * m_mc:
            rank += 1
    return rank


def validate_mc_sample_count(m_mc: int) -> list[str]:
    """Check the two tail conditions the Monte-Carlo rank relies on.

    Returns human-readable violations (and warns) if, at this sample
    count, a 19/20-accurate model fails to register as 9/10-accurate
    often enough, or a 4/5-accurate model registers too often.
    """
    need = -(-9 * m_mc // 10)  # ceil(0.9 * m_mc)
    p_good = 1.0 - binomial_cdf(m_mc, need - 1, 0.95)
    p_bad = 1.0 - binomial_cdf(m_mc, need - 1, 0.80)
    problems = []
    if p_good < 0.95:
        problems.append(
            f"P(pass | acc=19/20) = {p_good:.4f} < 0.95 at m_mc={m_mc}")
    if p_bad > 0.10:
        problems.append(
            f"P(pass | acc=4/5) = {p_bad:.4f} > 0.10 at m_mc={m_mc}")
    for msg in problems:
        warnings.warn(msg, stacklevel=2)
    return problems
