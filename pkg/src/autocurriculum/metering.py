"""Exact cost accounting in oracle-call currencies.

Every generated length-T sequence counts as one unit of generation cost
regardless of purpose; deterministic member answer evaluations count as
one learner rollout each. Evaluation work is charged to a separate
ledger so training costs are never perturbed by measurement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ReconciliationError


@dataclass
class CostLedger:
    """Monotone counters for the oracle and generation currencies.

    ``cot_queries`` counts teacher-trace requests, ``verifier_calls``
    raw verifier invocations, ``routing_decisions`` prompts examined by
    the curriculum sampler, ``ref_generations`` reference-model draws,
    and ``learner_rollouts`` sequences generated from trained models.
    """

    cot_queries: int = 0
    verifier_calls: int = 0
    routing_decisions: int = 0
    ref_generations: int = 0
    learner_rollouts: int = 0

    def add(self, *, cot: int = 0, verifier: int = 0, routing: int = 0,
            ref: int = 0, rollouts: int = 0) -> None:
        if min(cot, verifier, routing, ref, rollouts) < 0:
            raise ValueError("ledger increments must be nonnegative")
        self.cot_queries += cot
        self.verifier_calls += verifier
        self.routing_decisions += routing
        self.ref_generations += ref
        self.learner_rollouts += rollouts

    def snapshot(self) -> dict[str, int]:
        return {
            "cot_queries": self.cot_queries,
            "verifier_calls": self.verifier_calls,
            "routing_decisions": self.routing_decisions,
            "ref_generations": self.ref_generations,
            "learner_rollouts": self.learner_rollouts,
        }

    def delta_since(self, before: dict[str, int]) -> dict[str, int]:
        now = self.snapshot()
        return {key: now[key] - before[key] for key in now}


@dataclass
class EvalReport:
    """Accuracy estimates for a model, ensemble, or mixture."""

    acc: float
    per_prompt_acc: list[float]
    pass_frac_3_5: float
    pass_frac_4_5: float
    mode: str
    n_eval: int

    def as_dict(self) -> dict:
        return {
            "acc": self.acc,
            "pass_frac_3_5": self.pass_frac_3_5,
            "pass_frac_4_5": self.pass_frac_4_5,
            "mode": self.mode,
            "n_eval": self.n_eval,
        }


def reconcile(ledger: CostLedger, phase_records, pool_size: int, variant: str) -> dict:
    """Check the analytic ledger identities for a completed run.

    Raises ReconciliationError naming the violated identity; returns a
    small report of the checked quantities otherwise.
    """
    total_out = sum(rec.n_accepted for rec in phase_records)
    if variant in ("det-sft", "stoch-sft"):
        if ledger.cot_queries != total_out:
            raise ReconciliationError(
                f"cot_queries={ledger.cot_queries} != sum|D_out|={total_out}")
        if ledger.ref_generations != 0:
            raise ReconciliationError("ref_generations nonzero in an SFT run")
    elif variant == "rl":
        if ledger.cot_queries != 0:
            raise ReconciliationError("cot_queries nonzero in an RL run")
        expected_ref = sum(rec.m_per_prompt * rec.n_accepted for rec in phase_records)
        if ledger.ref_generations != expected_ref:
            raise ReconciliationError(
                f"ref_generations={ledger.ref_generations} != "
                f"sum m_j*|D_out_j|={expected_ref}")
    else:
        raise ReconciliationError(f"unknown variant {variant!r}")
    if ledger.routing_decisions > pool_size:
        raise ReconciliationError(
            f"routing_decisions={ledger.routing_decisions} > pool={pool_size}")
    for rec in phase_records:
        if rec.aborted != (rec.n_accepted < rec.cap):
            raise ReconciliationError(f"abort flag inconsistent in phase {rec.phase}")
    return {
        "sum_d_out": total_out,
        "cot_queries": ledger.cot_queries,
        "ref_generations": ledger.ref_generations,
        "routing_decisions": ledger.routing_decisions,
        "pool_size": pool_size,
    }
