"""Verifier-guided autocurriculum training, simulated exactly.

Synthetic worlds with planted lookup-family model classes, boosted
curriculum drivers for supervised and RL fine-tuning, and exact cost
accounting of teacher queries, verifier calls, and generated rollouts.
"""

__version__ = "0.1.0"

from .aggregate import (ConsensusModel, Ensemble, MixtureModel, consensus_default_n,
                        consensus_vote, plurality)
from .baselines import (BisectionResult, baseline_ntp_minimal_pool,
                        baseline_rl_finetune, calibrate_c1)
from .curriculum import (AutoTuneRL, AutoTuneSFT, AutoTuneStochastic,
                         CurriculumConfig, CurriculumRun, PhaseRecord, autotune,
                         autotune_rl, autotune_stoch, choose_k, run_curriculum,
                         sample_subroutine)
from .errors import (CapacityError, ConfigurationError, ParameterError,
                     ReconciliationError)
from .evaluation import estimate_acc
from .harness import ExperimentConfig, load_config, main, run_experiment, run_sweep
from .learners import (CotDataset, FilteredSet, NextTokenERM, RLFineTune,
                       SampleBudget, n_prompt, ntp_erm, rl_finetune,
                       rl_sample_count)
from .metering import CostLedger, EvalReport, reconcile
from .schedule import (ScheduleParams, WeightTable, acceptance_prob,
                       binomial_tail_oracle, build_weight_table, rank_det,
                       rank_mc, validate_mc_sample_count)
from .seeding import derive_rng
from .world import (CoverageProfile, ModelId, World, WorldConfig, build_world,
                    enumerate_class, model_step, model_trace, ref_generate,
                    ref_generate_batch, teacher_cot, verify)

__all__ = [
    "AutoTuneRL", "AutoTuneSFT", "AutoTuneStochastic", "BisectionResult",
    "CapacityError", "ConfigurationError", "ConsensusModel", "CostLedger",
    "CotDataset", "CoverageProfile", "CurriculumConfig", "CurriculumRun",
    "Ensemble", "EvalReport", "ExperimentConfig", "FilteredSet",
    "MixtureModel", "ModelId", "NextTokenERM", "ParameterError", "PhaseRecord",
    "RLFineTune", "ReconciliationError", "SampleBudget", "ScheduleParams",
    "WeightTable", "World", "WorldConfig", "acceptance_prob", "autotune",
    "autotune_rl", "autotune_stoch", "baseline_ntp_minimal_pool",
    "baseline_rl_finetune", "binomial_tail_oracle", "build_weight_table",
    "build_world", "calibrate_c1", "choose_k", "consensus_default_n",
    "consensus_vote", "derive_rng", "enumerate_class", "estimate_acc",
    "load_config", "main", "model_step", "model_trace", "n_prompt", "ntp_erm",
    "plurality", "rank_det", "rank_mc", "reconcile", "ref_generate",
    "ref_generate_batch", "rl_finetune", "rl_sample_count", "run_curriculum",
    "run_experiment", "run_sweep", "sample_subroutine", "teacher_cot",
    "validate_mc_sample_count", "verify",
]
