"""VCG scoring mechanism tests."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lendmech import vcg
from lendmech.errors import (
    MissingOutcome,
    OutcomeForUnfundedBorrower,
    ReserveRecommenderHasNoPayment,
    ShapeMismatch,
)
from lendmech.priors import UniformIID
from lendmech.vcg import VcgInstance

BELIEFS = [[0.7, 0.4], [0.4, 0.85], [0.6, 0.4]]


def table_instance(**kwargs):
    defaults = dict(n=3, m=2, K=1, reserve_threshold=0.5, weights=(1 / 3, 1 / 3, 1 / 3))
    defaults.update(kwargs)
    return VcgInstance(**defaults)


def brute_force_best(inst, reports):
    scores = vcg.aggregate_scores(inst, reports)
    items = [float(s) for s in scores] + [inst.reserve_threshold] * inst.n_reserves
    best = 0.0
    for size in range(min(inst.K, len(items)) + 1):
        for combo in itertools.combinations(range(len(items)), size):
            best = max(best, sum(items[j] for j in combo))
    return best


class TestAllocate:
    def test_best_real_borrower_beats_reserve(self):
        alloc = vcg.allocate(table_instance(), BELIEFS)
        assert alloc.real == (1, 0)
        assert alloc.reserves_funded == 0

    def test_zero_reports_fund_only_reserves(self):
        alloc = vcg.allocate(table_instance(K=2, m=2), np.zeros((3, 2)))
        assert alloc.real == (0, 0)
        assert alloc.reserves_funded == 2

    def test_no_reserve_and_slack_cap_funds_everyone(self):
        inst = table_instance(reserve_threshold=0.0, K=2, m=2)
        alloc = vcg.allocate(inst, np.zeros((3, 2)))
        assert alloc.real == (1, 1)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            vcg.allocate(table_instance(), [[0.5], [0.5], [0.5]])

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 100_000))
    def test_matches_brute_force_welfare(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 9))
        K = int(rng.integers(1, m + 1))
        c = float(rng.uniform(0, 0.9)) if rng.random() < 0.7 else 0.0
        w = rng.random(n)
        w = w / w.sum()
        inst = VcgInstance(n=n, m=m, K=K, reserve_threshold=c, weights=tuple(w))
        reports = rng.random((n, m))
        alloc = vcg.allocate(inst, reports)
        scores = vcg.aggregate_scores(inst, reports)
        achieved = sum(float(scores[q]) for q in alloc.funded_real)
        achieved += alloc.reserves_funded * c
        assert achieved == pytest.approx(brute_force_best(inst, reports), abs=1e-12)

    def test_alpha_does_not_change_allocation(self):
        rng = np.random.default_rng(3)
        reports = rng.random((3, 2))
        for alpha in (0.01, 0.5, 1.0, 7.0):
            assert vcg.allocate(table_instance(alpha=alpha), reports) == vcg.allocate(
                table_instance(), reports
            )


class TestPivotPayment:
    def test_worked_pivot(self):
        # without recommender 1 the reserve (0.5) beats borrower 0 (0.4333)
        t = vcg.pivot_payment(table_instance(), BELIEFS, 1)
        assert t == pytest.approx(0.5 - (0.7 + 0.6) / 3, abs=1e-12)

    def test_identical_reports_no_reserve_gives_zero_pivots(self):
        inst = table_instance(reserve_threshold=0.0)
        reports = [[0.6, 0.3]] * 3
        for i in range(3):
            assert vcg.pivot_payment(inst, reports, i) == pytest.approx(0.0, abs=1e-12)

    def test_single_recommender_pays_reserve_value(self):
        inst = VcgInstance(n=1, m=1, K=1, reserve_threshold=0.5, weights=(1.0,))
        assert vcg.pivot_payment(inst, [[0.8]], 0) == pytest.approx(0.5, abs=1e-12)

    def test_reserve_recommender_not_addressable(self):
        with pytest.raises(ReserveRecommenderHasNoPayment):
            vcg.pivot_payment(table_instance(), BELIEFS, 3)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 100_000))
    def test_pivot_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        n, m = int(rng.integers(1, 5)), int(rng.integers(1, 6))
        K = int(rng.integers(1, m + 1))
        c = float(rng.uniform(0, 0.9))
        w = rng.random(n)
        w = w / w.sum()
        inst = VcgInstance(n=n, m=m, K=K, reserve_threshold=c, weights=tuple(w))
        reports = rng.random((n, m))
        for i in range(n):
            assert vcg.pivot_payment(inst, reports, i) >= -1e-12


class TestTcomp:
    def test_worked_worst_case(self):
        # forcing borrower 1 in is the most damaging achievable swing
        others = np.delete(np.asarray(BELIEFS), 1, axis=0)
        got = vcg.tcomp(table_instance(), others, 1)
        assert got == pytest.approx(0.5 - (0.4 + 0.4) / 3, abs=1e-12)

    def test_zero_weight_recommender(self):
        inst = table_instance(weights=(0.5, 0.0, 0.5))
        others = np.delete(np.asarray(BELIEFS), 1, axis=0)
        assert vcg.tcomp(inst, others, 1) == 0.0

    def test_single_recommender_worst_case_is_reserve(self):
        inst = VcgInstance(n=1, m=1, K=1, reserve_threshold=0.5, weights=(1.0,))
        assert vcg.tcomp(inst, np.empty((0, 1)), 0) == pytest.approx(0.5, abs=1e-12)

    def test_dominates_every_grid_report_pivot(self):
        rng = np.random.default_rng(11)
        inst = table_instance(K=2, reserve_threshold=0.35)
        reports = rng.random((3, 2))
        others = np.delete(reports, 0, axis=0)
        bound = vcg.tcomp(inst, others, 0)
        for r0 in np.linspace(0, 1, 21):
            for r1 in np.linspace(0, 1, 21):
                trial = reports.copy()
                trial[0] = (r0, r1)
                assert vcg.pivot_payment(inst, trial, 0) <= bound + 1e-12


class TestSettle:
    def test_realized_utility_on_repayment(self):
        settlement = vcg.settle(table_instance(), BELIEFS, {0: 1})
        assert settlement.realized_utility(1) == pytest.approx(1 / 3 - 0.0667, abs=5e-5)

    def test_outcomes_must_cover_funded_real(self):
        with pytest.raises(MissingOutcome):
            vcg.settle(table_instance(), BELIEFS, {})
        with pytest.raises(OutcomeForUnfundedBorrower):
            vcg.settle(table_instance(), BELIEFS, {0: 1, 1: 1})

    def test_reserve_rows_generate_no_payments(self):
        settlement = vcg.settle(table_instance(), np.zeros((3, 2)), {})
        assert settlement.allocation.reserves_funded == 1
        assert settlement.contingent == {}
        assert vcg.deficit(settlement) == pytest.approx(0.0, abs=1e-12)

    def test_alpha_scales_all_payments(self):
        base = vcg.settle(table_instance(tcomp_enabled=True), BELIEFS, {0: 1})
        scaled = vcg.settle(
            table_instance(alpha=0.01, tcomp_enabled=True), BELIEFS, {0: 1}
        )
        for i in range(3):
            assert scaled.immediate[i] == pytest.approx(0.01 * base.immediate[i], rel=1e-12)
            assert scaled.tcomp[i] == pytest.approx(0.01 * base.tcomp[i], rel=1e-12)
        for key, value in base.contingent.items():
            assert scaled.contingent[key] == pytest.approx(0.01 * value, rel=1e-12)

    def test_rebate_makes_every_outcome_nonnegative(self):
        inst = table_instance(tcomp_enabled=True)
        for outcome in (0, 1):
            settlement = vcg.settle(inst, BELIEFS, {0: outcome})
            for i in range(3):
                assert settlement.realized_utility(i) >= -1e-12


class TestDeficit:
    def test_no_repayments_without_rebate_is_surplus(self):
        settlement = vcg.settle(table_instance(), BELIEFS, {0: 0})
        assert vcg.deficit(settlement) == pytest.approx(-sum(settlement.immediate), abs=1e-12)

    def test_all_repay_equal_weights_zero_pivots(self):
        # identical reports, no reserve: deficit is alpha * K
        inst = table_instance(reserve_threshold=0.0, K=2, alpha=0.25)
        reports = [[0.9, 0.8]] * 3
        settlement = vcg.settle(inst, reports, {0: 1, 1: 1})
        assert vcg.deficit(settlement) == pytest.approx(0.25 * 2, abs=1e-12)

    def test_halving_alpha_halves_deficit_exactly(self):
        rng = np.random.default_rng(9)
        reports = rng.random((3, 2))
        alloc = vcg.allocate(table_instance(), reports)
        outcomes = {q: 1 for q in alloc.funded_real}
        full = vcg.deficit(vcg.settle(table_instance(alpha=1.0, tcomp_enabled=True), reports, outcomes))
        half = vcg.deficit(vcg.settle(table_instance(alpha=0.5, tcomp_enabled=True), reports, outcomes))
        assert half == 0.5 * full


class TestExpostUtility:
    def test_matches_value_minus_pivot(self):
        inst = table_instance()
        arr = np.asarray(BELIEFS)
        got = vcg.expost_utility(inst, arr, 1, arr[1])
        assert got == pytest.approx((1 / 3) * 0.4 - vcg.pivot_payment(inst, arr, 1), abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 100_000))
    def test_truthful_utility_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        n, m = int(rng.integers(1, 5)), int(rng.integers(1, 6))
        K = int(rng.integers(1, m + 1))
        c = float(rng.uniform(0, 0.9))
        w = rng.random(n)
        w = w / w.sum()
        inst = VcgInstance(n=n, m=m, K=K, reserve_threshold=c, weights=tuple(w))
        profile = rng.random((n, m))
        for i in range(n):
            assert vcg.expost_utility(inst, profile, i, profile[i]) >= -1e-12


class TestInterimEngine:
    def test_matches_scalar_path(self):
        from lendmech.priors import sample_others

        inst = table_instance(K=2, reserve_threshold=0.3)
        rng = np.random.default_rng(21)
        others = sample_others(UniformIID(), 3, 2, 2, 32, rng)
        engine = vcg.InterimEngine(inst, 2, others)
        belief, report = (0.7, 0.2), (0.5, 0.45)
        fast = engine.utilities(belief, report)
        slow = np.array(
            [
                vcg.expost_utility(inst, np.insert(others[s], 2, report, axis=0), 2, belief)
                for s in range(32)
            ]
        )
        assert np.allclose(fast, slow, atol=1e-12)

    def test_interim_utility_deterministic(self):
        inst = table_instance()
        a = vcg.interim_utility(inst, 0, (0.6, 0.4), (0.6, 0.4), UniformIID(), 4000, 5)
        b = vcg.interim_utility(inst, 0, (0.6, 0.4), (0.6, 0.4), UniformIID(), 4000, 5)
        assert a == b
