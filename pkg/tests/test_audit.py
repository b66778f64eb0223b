"""Audit engine tests: strategies, verdict logic, oracle agreement."""

import dataclasses

import numpy as np
import pytest

from lendmech import audit, winkler
from lendmech.aggregation import WeightVector, WeightedLinear
from lendmech.errors import ReproductionMismatch
from lendmech.priors import DegenerateAt, ProductGrid, UniformIID, enumerate_others
from lendmech.vcg import VcgInstance
from lendmech.winkler import WinklerInstance

BELIEFS = ((0.7, 0.4), (0.4, 0.85), (0.6, 0.4))


def winkler_instance(n=3, m=2, c=0.5):
    return WinklerInstance(
        n=n, m=m, threshold=c, aggregator=WeightedLinear(WeightVector.equal(n))
    )


def capped_instance():
    return audit.CappedWinklerInstance(base=winkler_instance(), cap=1)


class TestStrategies:
    def test_equal_shift_detection(self):
        assert audit.is_equal_shift((0.3, 0.5), (0.4, 0.6))
        assert not audit.is_equal_shift((0.3, 0.5), (0.4, 0.61))
        assert audit.is_equal_shift((0.3,), (0.9,))  # one coordinate is always a shift

    def test_grid_excludes_truth(self):
        rng = np.random.default_rng(0)
        candidates = audit.generate_misreports(
            (0.5, 0.25), audit.SingleCoordinateGrid(101), rng
        )
        assert len(candidates) == 200  # 0.5 and 0.25 sit on the grid
        assert all(c.row != (0.5, 0.25) for c in candidates)
        assert all(c.coordinate in (0, 1) for c in candidates)

    def test_equal_shift_clamping_flagged(self):
        rng = np.random.default_rng(0)
        candidates = audit.generate_misreports(
            (0.95, 0.5), audit.EqualShift((0.1,)), rng
        )
        assert len(candidates) == 1
        assert candidates[0].clamped
        assert not candidates[0].equal_shift  # clamping broke the pure shift

    def test_random_rows_seeded(self):
        a = audit.generate_misreports((0.5,), audit.FullRowRandom(5), np.random.default_rng(3))
        b = audit.generate_misreports((0.5,), audit.FullRowRandom(5), np.random.default_rng(3))
        assert [c.row for c in a] == [c.row for c in b]

    def test_strategy_config_parsing(self):
        strategies = audit.strategies_from_config(
            {"single_coordinate_grid": 11, "equal_shift": [0.1], "targeted": [[0.0, 1.0]]}
        )
        kinds = {type(s) for s in strategies}
        assert kinds == {audit.SingleCoordinateGrid, audit.EqualShift, audit.Targeted}


class TestInterimOracleAgreement:
    def test_monte_carlo_matches_exact_enumeration(self):
        # finite-support prior: enumerate the exact interim expectation and
        # require the Monte Carlo estimate to land within 3 standard errors
        support_cell = (0.1, 0.3, 0.5, 0.7, 0.9)
        n, m = 3, 2
        prior = ProductGrid(tuple(tuple(support_cell for _ in range(m)) for _ in range(n)))
        inst = winkler_instance(n=n, m=m)
        true_row, report_row = (0.62, 0.34), (0.5, 0.4)
        profiles, probs = enumerate_others(prior, n, m, 0, )
        engine = winkler.ColumnEngine(inst, 0, profiles)
        exact = float(engine.utilities(true_row, report_row) @ probs)
        mean, se = audit.interim_utility(
            inst, 0, true_row, report_row, prior, samples=1_000_000, seed=77
        )
        assert abs(mean - exact) <= 3 * se

    def test_degenerate_prior_is_noise_free(self):
        inst = capped_instance()
        mean, se = audit.interim_utility(
            inst, 1, BELIEFS[1], BELIEFS[1], DegenerateAt(BELIEFS), samples=999, seed=1
        )
        assert se == 0.0
        assert mean == pytest.approx(0.0650224702328767, abs=1e-9)

    def test_misreport_value_on_worked_example(self):
        inst = capped_instance()
        mean, se = audit.interim_utility(
            inst, 1, BELIEFS[1], (0.0, 0.85), DegenerateAt(BELIEFS), samples=1, seed=1
        )
        assert se == 0.0
        assert mean == pytest.approx(0.1711937892708008, abs=1e-9)


class TestBestResponseSearch:
    def test_capped_winkler_weak_epic_violation(self):
        verdict = audit.best_response_search(
            capped_instance(),
            1,
            BELIEFS[1],
            DegenerateAt(BELIEFS),
            (audit.SingleCoordinateGrid(101), audit.Targeted(((0.0, 0.85),))),
            samples=1,
            seed=0,
            desideratum="weak-epic",
        )
        assert verdict.verdict == "violation"
        assert verdict.witness.candidate.row[0] == 0.0
        assert verdict.witness.mean_gain == pytest.approx(0.1062, abs=5e-4)

    def test_uncapped_winkler_weak_epic_passes_same_profile(self):
        verdict = audit.best_response_search(
            winkler_instance(),
            1,
            BELIEFS[1],
            DegenerateAt(BELIEFS),
            audit.SingleCoordinateGrid(101),
            samples=1,
            seed=0,
            desideratum="weak-epic",
        )
        assert verdict.verdict == "pass"

    def test_winkler_strict_epic_above_anchor(self):
        # others fixed, own beliefs comfortably above both anchors: truth is
        # the unique grid maximizer on every coordinate
        verdict = audit.best_response_search(
            winkler_instance(),
            0,
            (0.73, 0.81),
            DegenerateAt(((0.73, 0.81), (0.5, 0.55), (0.65, 0.5))),
            audit.SingleCoordinateGrid(101),
            samples=1,
            seed=0,
            desideratum="strict-epic",
        )
        assert verdict.verdict == "pass"

    def test_vcg_weak_epic_exact(self):
        inst = VcgInstance(n=3, m=2, K=1, reserve_threshold=0.5, weights=(1 / 3,) * 3)
        verdict = audit.best_response_search(
            inst,
            1,
            BELIEFS[1],
            DegenerateAt(BELIEFS),
            audit.SingleCoordinateGrid(101),
            samples=1,
            seed=0,
            desideratum="weak-epic",
        )
        assert verdict.verdict == "pass"
        assert verdict.counts.wins == 0

    def test_equal_shift_ties_without_reserve(self):
        inst = VcgInstance(n=3, m=2, K=1, reserve_threshold=0.0, weights=(1 / 3,) * 3)
        verdict = audit.best_response_search(
            inst,
            0,
            (0.6, 0.35),
            UniformIID(),
            audit.EqualShift((-0.1, 0.1)),
            samples=20_000,
            seed=5,
        )
        assert verdict.counts.equal_shift_candidates == 2
        assert verdict.counts.equal_shift_ties == 2
        assert verdict.verdict == "inconclusive"  # nothing but shifts searched

    def test_half_weight_precondition_matters_at_boundary(self):
        # max weight 1/2 (two equal recommenders): at the dictatorial belief
        # row the audit finds ties that are not equal shifts; a third
        # recommender restores strictness on the same row
        strategy = audit.SingleCoordinateGrid(101)
        two = VcgInstance(n=2, m=2, K=1, reserve_threshold=0.0, weights=(0.5, 0.5))
        verdict = audit.best_response_search(
            two, 0, (1.0, 0.0), UniformIID(), strategy, samples=100_000, seed=42
        )
        assert verdict.verdict == "inconclusive"
        assert verdict.counts.ties > 0 and verdict.counts.equal_shift_ties == 0

        three = VcgInstance(n=3, m=2, K=1, reserve_threshold=0.0, weights=(1 / 3,) * 3)
        verdict = audit.best_response_search(
            three, 0, (1.0, 0.0), UniformIID(), strategy, samples=100_000, seed=42
        )
        assert verdict.verdict == "pass"

    def test_determinism(self):
        inst = winkler_instance(n=4)
        args = (inst, 0, (0.6, 0.3), UniformIID(), audit.SingleCoordinateGrid(21), 5000, 9)
        assert audit.best_response_search(*args) == audit.best_response_search(*args)

    def test_workers_do_not_change_results(self):
        inst = winkler_instance(n=4)
        a = audit.best_response_search(
            inst, 0, (0.6, 0.3), UniformIID(), audit.SingleCoordinateGrid(21), 5000, 9, workers=1
        )
        b = audit.best_response_search(
            inst, 0, (0.6, 0.3), UniformIID(), audit.SingleCoordinateGrid(21), 5000, 9, workers=4
        )
        assert a == b


class TestGrainOfNoVeto:
    def test_two_recommenders_high_threshold_impossible(self):
        report = audit.grain_of_no_veto(
            winkler_instance(n=2, c=0.6), UniformIID(), 5000, 1
        )
        assert not report.all_positive
        assert len(report.zero_pairs) == 4

    def test_three_recommenders_moderate_threshold_possible(self):
        report = audit.grain_of_no_veto(
            winkler_instance(n=3, c=0.5), UniformIID(), 5000, 1
        )
        assert report.all_positive
        # analytic oracle: P[(p1+p2)/3 > 1/2] = P[p1+p2 > 1.5] = 0.125
        assert report.estimates[0][0] == pytest.approx(0.125, abs=0.02)

    def test_lopsided_weights(self):
        inst = WinklerInstance(
            n=2,
            m=1,
            threshold=0.5,
            aggregator=WeightedLinear(WeightVector((0.9, 0.1))),
        )
        report = audit.grain_of_no_veto(inst, UniformIID(), 5000, 2)
        assert report.estimates[0][0] == 0.0  # others' weight 0.1 < 0.5
        assert report.estimates[1][0] > 0.0  # others' weight 0.9 > 0.5

    def test_minimum_sample_size_enforced(self):
        with pytest.raises(ValueError):
            audit.grain_of_no_veto(winkler_instance(), UniformIID(), 10, 0)


class TestChecks:
    def test_efficiency_on_worked_instance(self):
        inst = VcgInstance(n=3, m=2, K=1, reserve_threshold=0.5, weights=(1 / 3,) * 3)
        assert audit.allocative_efficiency_check(inst, np.asarray(BELIEFS))

    def test_ex_post_ir(self):
        inst = VcgInstance(n=3, m=2, K=1, reserve_threshold=0.5, weights=(1 / 3,) * 3)
        ok, worst, _ = audit.ex_post_ir_check(inst, np.asarray(BELIEFS))
        assert ok and worst >= 0.0

    def test_strong_ir_needs_rebate(self):
        base = VcgInstance(n=3, m=2, K=2, reserve_threshold=0.3, weights=(0.6, 0.3, 0.1))
        profile = np.asarray(((0.9, 0.2), (0.4, 0.8), (0.5, 0.6)))
        without = audit.strong_ex_post_ir_check(base, profile)
        with_rebate = audit.strong_ex_post_ir_check(
            dataclasses.replace(base, tcomp_enabled=True), profile
        )
        assert with_rebate[0]
        assert with_rebate[1] >= 0.0
        # the all-default outcome charges the pivot with no contingent income
        assert without[1] <= with_rebate[1]


class TestWeightMonotonicity:
    def test_worked_example(self):
        inst = VcgInstance(n=3, m=2, K=1, reserve_threshold=0.5, weights=(1 / 3,) * 3)
        verdict = audit.weight_monotonicity_check(
            inst, 1, w_low=1 / 3, w_high=0.5, reports=BELIEFS
        )
        assert verdict.verdict == "pass"
        assert verdict.counts.losses == 1  # "loses" means the raise strictly helped

    def test_zero_value_profiles_skipped(self):
        inst = VcgInstance(n=2, m=1, K=1, reserve_threshold=0.5, weights=(0.5, 0.5))
        verdict = audit.weight_monotonicity_check(
            inst, 0, 0.5, 0.9, reports=((0.0,), (0.0,))
        )
        assert verdict.counts.candidates == 0
        assert "skipped 1" in verdict.notes[0]

    def test_random_instances_all_improve(self):
        inst = VcgInstance(n=3, m=3, K=2, reserve_threshold=0.4, weights=(1 / 3,) * 3)
        verdict = audit.weight_monotonicity_check(
            inst, 0, 1 / 3, 0.5, trials=50, seed=4
        )
        assert verdict.verdict == "pass"
        assert verdict.counts.losses == verdict.counts.candidates


class TestReproduction:
    def test_reproduce_table1(self):
        report = audit.reproduce_table1()
        assert report.honest_funded == 0
        assert report.misreport_funded == 1
        assert report.max_abs_error < 0.005

    def test_mismatch_raises_with_cell_context(self):
        fixture = audit._load_bundled_fixture("table1")
        fixture["reference"]["honest_utilities"] = [0.12, 0.2, 0.09]
        with pytest.raises(ReproductionMismatch, match="honest utility"):
            audit.reproduce_reference(fixture)
