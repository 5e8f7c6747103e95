"""Weight-schedule tests: recursion vs. oracle, row structure, ranks."""

import math
from fractions import Fraction

import numpy as np
import pytest

from autocurriculum import (CostLedger, ModelId, ParameterError, ScheduleParams,
                            WorldConfig, acceptance_prob, binomial_tail_oracle,
                            build_weight_table, build_world, derive_rng,
                            rank_det, rank_mc, validate_mc_sample_count)
from autocurriculum.schedule import binomial_tail_table

DET = dict(err_star=Fraction(1, 4), threshold_frac=Fraction(1, 2))
STOCH = dict(err_star=Fraction(1, 10), threshold_frac=Fraction(4, 5))


class TestWeightTable:
    def test_base_row_is_threshold_indicator(self):
        for k in (1, 2, 5, 8, 13):
            table = build_weight_table(ScheduleParams(k=k, **DET))
            row = table.beta_row(k)
            expect = (np.arange(k + 1) <= k / 2).astype(float)
            np.testing.assert_array_equal(row, expect)

    def test_k1_start_value(self):
        table = build_weight_table(ScheduleParams(k=1, **DET))
        assert table.beta(0, 0) == pytest.approx(0.25, abs=1e-15)

    def test_k2_start_value(self):
        table = build_weight_table(ScheduleParams(k=2, **DET))
        assert table.beta(0, 0) == pytest.approx(7 / 16, abs=1e-15)

    def test_recursion_identity(self):
        table = build_weight_table(ScheduleParams(k=11, **DET))
        err = 0.25
        for j in range(11):
            for r in range(j + 1):
                expect = err * table.beta(j + 1, r) + (1 - err) * table.beta(j + 1, r + 1)
                assert table.beta(j, r) == pytest.approx(expect, abs=1e-15)

    @pytest.mark.parametrize("params", [DET, STOCH])
    def test_rows_monotone_and_bounded(self, params):
        for k in range(1, 129):
            table = build_weight_table(ScheduleParams(k=k, **params))
            for j in range(k + 1):
                row = table.beta_row(j)
                assert np.all(row >= 0.0) and np.all(row <= 1.0)
                assert np.all(np.diff(row) <= 1e-15), f"beta not nonincreasing k={k} j={j}"
            for j in range(k):
                assert np.all(table.alpha_row(j) >= -1e-15)

    def test_rejects_bad_params(self):
        with pytest.raises(ParameterError):
            ScheduleParams(k=0, **DET)
        with pytest.raises(ParameterError):
            ScheduleParams(k=4, err_star=Fraction(1, 2), threshold_frac=Fraction(1, 2))
        with pytest.raises(ParameterError):
            ScheduleParams(k=4, err_star=Fraction(1, 4), threshold_frac=Fraction(1, 1))


class TestOracleAgreement:
    @pytest.mark.parametrize("params", [DET, STOCH])
    def test_tables_match_oracle_to_1e10(self, params):
        worst = 0.0
        for k in range(1, 129):
            sp = ScheduleParams(k=k, **params)
            table = build_weight_table(sp)
            oracle = binomial_tail_table(sp)
            for j in range(k + 1):
                worst = max(worst, float(np.max(np.abs(table.beta_row(j) - oracle[j]))))
        assert worst <= 1e-10

    def test_scalar_oracle_examples(self):
        assert binomial_tail_oracle(1, 1, 0, 0.75, "1/2") == 1.0
        assert binomial_tail_oracle(1, 0, 0, 0.75, "1/2") == pytest.approx(0.25, abs=1e-15)

    def test_scalar_oracle_matches_table_helper(self):
        sp = ScheduleParams(k=17, **DET)
        rows = binomial_tail_table(sp)
        for j in (0, 5, 16, 17):
            for r in range(j + 1):
                direct = binomial_tail_oracle(17, j, r, 0.75, Fraction(1, 2))
                assert direct == pytest.approx(rows[j][r], abs=1e-13)

    def test_oracle_rejects_bad_indices(self):
        with pytest.raises(ParameterError):
            binomial_tail_oracle(4, 5, 0, 0.75, "1/2")
        with pytest.raises(ParameterError):
            binomial_tail_oracle(4, 2, 3, 0.75, "1/2")
        with pytest.raises(ParameterError):
            binomial_tail_oracle(4, 2, 1, 1.0, "1/2")

    def test_start_value_decays_along_parity(self):
        # beta[0][0] is not monotone between adjacent k (the floor of
        # k/2 shifts parity); decay holds two steps apart and in the
        # long run, which is what the schedule needs.
        vals = {k: binomial_tail_oracle(k, 0, 0, 0.75, "1/2") for k in range(1, 40)}
        for k in range(1, 38):
            assert vals[k + 2] < vals[k]
        assert vals[39] < 1e-3

    def test_start_value_reaches_any_epsilon(self):
        for eps in (0.5, 0.1, 0.01, 1e-4):
            k = 1
            while binomial_tail_oracle(k, 0, 0, 0.75, "1/2") > eps / 4:
                k += 1
                assert k < 2000
            assert binomial_tail_oracle(k, 0, 0, 0.75, "1/2") <= eps / 4


class TestAlphaMaxLemmas:
    def test_det_sum_and_pointwise_bounds(self):
        for k in range(2, 129):
            table = build_weight_table(ScheduleParams(k=k, **DET))
            assert table.alpha_max.sum() <= 2.0 * math.sqrt(k)
            for j in range(k - 1):
                assert table.alpha_max[j] <= 1.1 / math.sqrt(k - j - 1)
            assert table.alpha_max[k - 1] <= 1.0

    def test_stochastic_sum_bound(self):
        for k in range(2, 129):
            table = build_weight_table(ScheduleParams(k=k, **STOCH))
            assert table.alpha_max.sum() <= 4.0 * math.sqrt(k)
            for j in range(k - 1):
                assert table.alpha_max[j] <= 2.0 / math.sqrt(k - j - 1)


class TestAcceptanceProb:
    def test_argmax_entry_normalizes_to_one(self):
        table = build_weight_table(ScheduleParams(k=9, **DET))
        for j in range(9):
            row = [acceptance_prob(table, j, r) for r in range(j + 1)]
            assert max(row) == pytest.approx(1.0)

    def test_k2_phase0_value(self):
        table = build_weight_table(ScheduleParams(k=2, **DET))
        # single-entry alpha row is its own maximum
        assert acceptance_prob(table, 0, 0) == pytest.approx(1.0)
        assert table.alpha(0, 0) == pytest.approx(0.75, abs=1e-15)

    def test_zero_alpha_max_convention(self):
        table = build_weight_table(ScheduleParams(k=3, **DET))
        table.alpha_max.setflags(write=True)
        table.alpha_max[1] = 0.0
        assert acceptance_prob(table, 1, 0) == 0.0
        assert np.all(table.acceptance_row(1) == 0.0)

    def test_index_errors(self):
        table = build_weight_table(ScheduleParams(k=3, **DET))
        with pytest.raises(ParameterError):
            acceptance_prob(table, 3, 0)
        with pytest.raises(ParameterError):
            acceptance_prob(table, 1, 2)


@pytest.fixture(scope="module")
def small_world():
    return build_world(WorldConfig(alphabet_size=2, horizon=3, dim=2,
                                   prompt_universe=4, rho_exponent=0.0, seed=5))


class TestRanks:
    def test_empty_ensemble_rank_zero(self, small_world):
        ledger = CostLedger()
        assert rank_det([], 0, small_world, ledger) == 0
        assert ledger.verifier_calls == 0

    def test_teacher_copies_rank_full(self, small_world):
        for j in (1, 2, 3):
            ledger = CostLedger()
            members = [small_world.teacher] * j
            assert rank_det(members, 1, small_world, ledger) == j
            assert ledger.verifier_calls == j
            assert ledger.learner_rollouts == j

    def test_three_member_table_matches_brute_force(self, small_world):
        w = small_world
        members = [ModelId(key=0), ModelId(key=3), w.teacher]
        for x in range(4):
            expect = 0
            for m in members:
                coord = w.index_of(x, w.config.horizon)
                expect += int((m.key >> coord) & 1 == w.correct_bit[x])
            assert rank_det(members, x, w, CostLedger()) == expect

    def test_rank_det_deterministic(self, small_world):
        members = [ModelId(key=1), ModelId(key=2)]
        a = rank_det(members, 2, small_world, CostLedger())
        b = rank_det(members, 2, small_world, CostLedger())
        assert a == b

    def test_rank_det_rejects_stochastic_members(self, small_world):
        with pytest.raises(ParameterError):
            rank_det([ModelId(key=0, noise=0.5)], 0, small_world, CostLedger())

    def test_rank_mc_extremes(self):
        w = build_world(WorldConfig(alphabet_size=2, horizon=3, dim=4,
                                    prompt_universe=16,
                                    stochastic_noise_grid=(0.0, 0.25), seed=9))
        rng = derive_rng(0, "mc")
        perfect = w.teacher
        x = 3
        wrong_key = w.theta_key ^ (1 << w.index_of(x, w.config.horizon))
        hopeless = ModelId(key=wrong_key, noise=0.0)
        for _ in range(16):
            assert rank_mc([perfect], x, w, 64, rng, CostLedger()) == 1
            assert rank_mc([hopeless], x, w, 64, rng, CostLedger()) == 0

    def test_rank_mc_near_threshold_acceptance_rate(self):
        # member accuracy 19/20 should register at least 19/20 of the time
        w = build_world(WorldConfig(alphabet_size=20, horizon=2, dim=4,
                                    prompt_universe=8,
                                    stochastic_noise_grid=(0.0, 1 / 19), seed=2))
        x = 1
        member = ModelId(key=w.theta_key, noise=1 / 19)
        # acc = 1 - q + q/20 = 1 - q*19/20 = 0.95 exactly at q = 1/19
        rng = derive_rng(1, "near")
        n = 3000
        hits = sum(rank_mc([member], x, w, 128, rng, CostLedger()) for _ in range(n))
        rate = hits / n
        sigma = math.sqrt(0.95 * 0.05 / n)
        assert rate >= 19 / 20 - 4 * sigma

    def test_rank_mc_ledger_charges(self, small_world):
        w = build_world(WorldConfig(alphabet_size=2, horizon=3, dim=2,
                                    prompt_universe=4,
                                    stochastic_noise_grid=(0.0, 0.5), seed=5))
        ledger = CostLedger()
        rank_mc([w.teacher, ModelId(key=0, noise=0.5)], 0, w, 32,
                derive_rng(0, "x"), ledger)
        assert ledger.learner_rollouts == 64
        assert ledger.verifier_calls == 64


class TestMcSampleValidation:
    def test_default_is_clean(self):
        assert validate_mc_sample_count(128) == []

    def test_tiny_count_warns(self):
        with pytest.warns(UserWarning):
            problems = validate_mc_sample_count(5)
        assert problems
