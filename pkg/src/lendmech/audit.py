"""Empirical verification of the mechanisms' incentive claims.

Every desideratum (efficiency, weak/strict ex post truthfulness, strict
interim truthfulness, participation rationality) is an executable check.
Ex post checks fix the co-reports and use exact expectations over the
recommender's own beliefs, so they are noise-free. Interim checks are
seeded Monte Carlo over a prior on co-reports; truth and each misreport
are evaluated on the same sampled co-reports, and the decision statistic
is the paired per-sample difference with its standard error. Verdicts are
pass / violation / inconclusive, never coerced: a violation always carries
a replayable witness, and statistical ties are surfaced as inconclusive.
"""

from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence, Union

import numpy as np

from . import vcg as vcg_mod
from . import winkler as winkler_mod
from .aggregation import WeightedLinear
from .errors import ReproductionMismatch
from .priors import DegenerateAt, PriorSpec, is_degenerate, sample_others, sample_profiles
from .vcg import VcgInstance
from .winkler import WinklerInstance

EXACT_TOL = 1e-9
EQUAL_SHIFT_TOL = 1e-9
SE_MULTIPLIER = 2.0


# ── misreport strategies ──────────────────────────────────────────────


@dataclass(frozen=True)
class SingleCoordinateGrid:
    """Deviate one borrower coordinate at a time over an evenly spaced grid."""

    points: int = 101


@dataclass(frozen=True)
class FullRowRandom:
    """Uniformly random full report rows."""

    count: int = 200


@dataclass(frozen=True)
class EqualShift:
    """Shift every coordinate by the same delta, clamped into [0, 1].

    A clamped shift is no longer a pure equal shift and is flagged as such.
    """

    deltas: tuple[float, ...] = (-0.2, -0.1, -0.05, 0.05, 0.1, 0.2)


@dataclass(frozen=True)
class Targeted:
    """Explicit misreport rows, e.g. witness profiles from known failures."""

    rows: tuple[tuple[float, ...], ...]


MisreportStrategy = Union[SingleCoordinateGrid, FullRowRandom, EqualShift, Targeted]


def is_equal_shift(true_row: Sequence[float], row: Sequence[float], tol: float = EQUAL_SHIFT_TOL) -> bool:
    """True when the row sits at a constant offset from the truth."""
    offsets = [r - t for r, t in zip(row, true_row)]
    return max(offsets) - min(offsets) <= tol


@dataclass(frozen=True)
class Candidate:
    row: tuple[float, ...]
    kind: str
    coordinate: Optional[int] = None
    equal_shift: bool = False
    clamped: bool = False


def generate_misreports(
    true_row: Sequence[float],
    strategies: Union[MisreportStrategy, Sequence[MisreportStrategy]],
    rng: np.random.Generator,
) -> list[Candidate]:
    """Expand strategies into concrete misreport rows (truth excluded)."""
    if not isinstance(strategies, (list, tuple)):
        strategies = (strategies,)
    truth = tuple(float(v) for v in true_row)
    m = len(truth)
    out: list[Candidate] = []

    def push(row: tuple[float, ...], kind: str, coordinate: Optional[int], clamped: bool) -> None:
        if max(abs(r - t) for r, t in zip(row, truth)) <= 1e-12:
            return
        out.append(
            Candidate(
                row=row,
                kind=kind,
                coordinate=coordinate,
                equal_shift=is_equal_shift(truth, row),
                clamped=clamped,
            )
        )

    for strategy in strategies:
        if isinstance(strategy, SingleCoordinateGrid):
            grid = np.linspace(0.0, 1.0, strategy.points)
            for q in range(m):
                for value in grid:
                    if abs(value - truth[q]) <= 1e-12:
                        continue
                    row = truth[:q] + (float(value),) + truth[q + 1 :]
                    push(row, "single-coordinate", q, False)
        elif isinstance(strategy, FullRowRandom):
            rows = rng.random((strategy.count, m))
            for r in rows:
                push(tuple(float(v) for v in r), "random-row", None, False)
        elif isinstance(strategy, EqualShift):
            for delta in strategy.deltas:
                shifted = [min(1.0, max(0.0, t + delta)) for t in truth]
                clamped = any(abs((s - t) - delta) > 1e-12 for s, t in zip(shifted, truth))
                push(tuple(shifted), "equal-shift", None, clamped)
        elif isinstance(strategy, Targeted):
            for r in strategy.rows:
                push(tuple(float(v) for v in r), "targeted", None, False)
        else:
            raise TypeError(f"unknown misreport strategy {strategy!r}")
    return out


def strategies_from_config(cfg: dict) -> tuple[MisreportStrategy, ...]:
    """Build strategies from a scenario's audit parameter block."""
    out: list[MisreportStrategy] = []
    if "single_coordinate_grid" in cfg:
        out.append(SingleCoordinateGrid(int(cfg["single_coordinate_grid"])))
    if "full_row_random" in cfg:
        out.append(FullRowRandom(int(cfg["full_row_random"])))
    if "equal_shift" in cfg:
        out.append(EqualShift(tuple(float(d) for d in cfg["equal_shift"])))
    if "targeted" in cfg:
        out.append(Targeted(tuple(tuple(float(v) for v in row) for row in cfg["targeted"])))
    if not out:
        out = [SingleCoordinateGrid(), FullRowRandom()]
    return tuple(out)


# ── instances the audits understand ───────────────────────────────────


@dataclass(frozen=True)
class CappedWinklerInstance:
    """Truncated Winkler with a liquidity cap bolted on.

    This is not a recommended mechanism: the cap breaks the marginal
    thresholds' meaning and with them truthfulness. It exists so the audits
    can demonstrate that failure. Allocation funds the top-`cap` borrowers
    by aggregate among those above the profit threshold; settlement reuses
    the uncapped thresholds, which is exactly the broken part.
    """

    base: WinklerInstance
    cap: int

    def __post_init__(self) -> None:
        if not 1 <= self.cap <= self.base.m:
            raise ValueError(f"need 1 <= cap <= m, got cap={self.cap}, m={self.base.m}")


AuditableInstance = Union[WinklerInstance, CappedWinklerInstance, VcgInstance]


def capped_allocate(inst: CappedWinklerInstance, reports) -> tuple[int, ...]:
    from .aggregation import aggregate

    arr = np.asarray(reports, dtype=float)
    scores = [aggregate(inst.base.aggregator, tuple(arr[:, q])) for q in range(inst.base.m)]
    eligible = sorted(
        (q for q in range(inst.base.m) if scores[q] > inst.base.threshold),
        key=lambda q: (-scores[q], q),
    )
    funded = [0] * inst.base.m
    for q in eligible[: inst.cap]:
        funded[q] = 1
    return tuple(funded)


def capped_settle(inst: CappedWinklerInstance, reports, outcomes) -> winkler_mod.Settlement:
    """Settle the capped demo variant: capped allocation, uncapped anchors."""
    from .errors import MissingOutcome, OutcomeForUnfundedBorrower

    arr = np.asarray(reports, dtype=float)
    funded = capped_allocate(inst, arr)
    funded_set = {q for q, f in enumerate(funded) if f}
    for q in outcomes:
        if q not in funded_set:
            raise OutcomeForUnfundedBorrower(f"borrower {q} received no loan")
    for q in funded_set:
        if q not in outcomes:
            raise MissingOutcome(f"no outcome supplied for funded borrower {q}")
    thresholds = winkler_mod.marginal_thresholds(inst.base, arr)
    contingent: dict[tuple[int, int], float] = {}
    for q in sorted(funded_set):
        for i in range(inst.base.n):
            t = thresholds[i, q]
            if math.isinf(t):
                contingent[(i, q)] = 0.0
            else:
                contingent[(i, q)] = winkler_mod.winkler_log_score(
                    float(arr[i, q]), float(t), outcomes[q]
                )
    return winkler_mod.Settlement(
        allocation=funded,
        immediate=tuple(0.0 for _ in range(inst.base.n)),
        contingent=contingent,
    )


def _exact_value(
    inst: AuditableInstance, i: int, belief_row: Sequence[float], report_row, others: np.ndarray
) -> float:
    """Utility of one report against fixed co-reports, exact over own beliefs."""
    full = np.insert(others, i, np.asarray(report_row, dtype=float), axis=0)
    if isinstance(inst, WinklerInstance):
        return winkler_mod.expost_utility(inst, full, i, belief_row)
    if isinstance(inst, VcgInstance):
        return vcg_mod.expost_utility(inst, full, i, belief_row)
    funded = capped_allocate(inst, full)
    thresholds = winkler_mod.marginal_thresholds(inst.base, full)
    total = 0.0
    for q in range(inst.base.m):
        if not funded[q]:
            continue
        t = thresholds[i, q]
        if math.isinf(t):
            continue
        total += winkler_mod.expected_winkler_log(float(belief_row[q]), float(full[i, q]), float(t))
    return total


class _SlowEngine:
    """Per-sample python fallback for instances without a vectorized engine."""

    def __init__(self, inst: AuditableInstance, i: int, others: np.ndarray) -> None:
        self.inst = inst
        self.i = i
        self.others = others
        self.samples = others.shape[0]

    def utilities(self, belief_row, report_row) -> np.ndarray:
        return np.array(
            [
                _exact_value(self.inst, self.i, belief_row, report_row, self.others[s])
                for s in range(self.samples)
            ]
        )


def _make_engine(inst: AuditableInstance, i: int, others: np.ndarray):
    if isinstance(inst, WinklerInstance) and isinstance(inst.aggregator, WeightedLinear):
        return winkler_mod.ColumnEngine(inst, i, others)
    if isinstance(inst, VcgInstance):
        return vcg_mod.InterimEngine(inst, i, others)
    return _SlowEngine(inst, i, others)


def _instance_shape(inst: AuditableInstance) -> tuple[int, int]:
    if isinstance(inst, CappedWinklerInstance):
        return inst.base.n, inst.base.m
    return inst.n, inst.m


# ── verdicts ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class MisreportOutcome:
    candidate: Candidate
    mean_gain: float  # misreport mean minus truthful mean
    std_error: float  # of the paired per-sample difference
    classification: str  # "loses" | "ties" | "wins"


@dataclass(frozen=True)
class SearchCounts:
    candidates: int = 0
    wins: int = 0
    losses: int = 0
    ties: int = 0
    equal_shift_candidates: int = 0
    equal_shift_wins: int = 0
    equal_shift_losses: int = 0
    equal_shift_ties: int = 0


@dataclass(frozen=True)
class AuditVerdict:
    desideratum: str
    verdict: str  # "pass" | "violation" | "inconclusive"
    truth_mean: float
    truth_std_error: float
    samples: int
    seed: Optional[int]
    counts: SearchCounts
    witness: Optional[MisreportOutcome]
    details: tuple[MisreportOutcome, ...]
    notes: tuple[str, ...] = ()


def _paired_stats(diff: np.ndarray) -> tuple[float, float]:
    """Mean and standard error of truth-minus-misreport samples.

    Infinite differences (a misreport hitting a log score of -inf) are
    decisively in truth's favor and reported as (inf, 0).
    """
    if np.isinf(diff).any():
        if np.isneginf(diff).any():
            return -math.inf, 0.0
        return math.inf, 0.0
    mean = float(diff.mean())
    se = float(diff.std(ddof=1) / math.sqrt(len(diff))) if len(diff) > 1 else 0.0
    return mean, se


def _classify(mean_diff: float, se: float, exact: bool) -> str:
    """Truth-minus-misreport difference -> misreport classification."""
    if exact:
        if mean_diff > EXACT_TOL:
            return "loses"
        if mean_diff < -EXACT_TOL:
            return "wins"
        return "ties"
    margin = SE_MULTIPLIER * se
    if mean_diff > margin and mean_diff > 0.0:
        return "loses"
    if mean_diff < -margin and mean_diff < 0.0:
        return "wins"
    return "ties"


def _assemble_verdict(
    desideratum: str,
    outcomes: list[MisreportOutcome],
    truth_mean: float,
    truth_se: float,
    samples: int,
    seed: Optional[int],
    notes: tuple[str, ...] = (),
    details_limit: int = 512,
) -> AuditVerdict:
    wins = [o for o in outcomes if o.classification == "wins"]
    losses = [o for o in outcomes if o.classification == "loses"]
    ties = [o for o in outcomes if o.classification == "ties"]
    es = [o for o in outcomes if o.candidate.equal_shift]
    counts = SearchCounts(
        candidates=len(outcomes),
        wins=len(wins),
        losses=len(losses),
        ties=len(ties),
        equal_shift_candidates=len(es),
        equal_shift_wins=sum(1 for o in es if o.classification == "wins"),
        equal_shift_losses=sum(1 for o in es if o.classification == "loses"),
        equal_shift_ties=sum(1 for o in es if o.classification == "ties"),
    )
    non_es_ties = counts.ties - counts.equal_shift_ties

    if counts.wins > 0:
        verdict = "violation"
        witness = max(wins, key=lambda o: o.mean_gain)
    elif desideratum == "weak-epic":
        verdict = "pass"
        witness = None
    elif non_es_ties == 0 and counts.candidates > counts.equal_shift_candidates:
        # strict truthfulness up to equal shifts: every genuine deviation lost
        verdict = "pass"
        witness = None
    else:
        verdict = "inconclusive"
        witness = None

    interesting = wins + ties
    shown = interesting + losses[: max(0, details_limit - len(interesting))]
    return AuditVerdict(
        desideratum=desideratum,
        verdict=verdict,
        truth_mean=truth_mean,
        truth_std_error=truth_se,
        samples=samples,
        seed=seed,
        counts=counts,
        witness=witness,
        details=tuple(shown[:details_limit]),
        notes=notes,
    )


# ── interim utility and best-response search ──────────────────────────


def interim_utility(
    inst: AuditableInstance,
    i: int,
    true_row: Sequence[float],
    report_row: Sequence[float],
    prior: PriorSpec,
    samples: int,
    seed: int,
) -> tuple[float, float]:
    """(mean, standard error) of interim utility; exact for point priors."""
    n, m = _instance_shape(inst)
    if is_degenerate(prior):
        others, _ = _degenerate_others(prior, i)
        return _exact_value(inst, i, true_row, report_row, others), 0.0
    if samples < 1:
        raise ValueError(f"need samples >= 1, got {samples}")
    rng = np.random.default_rng(seed)
    others = sample_others(prior, n, m, i, samples, rng)
    values = _make_engine(inst, i, others).utilities(true_row, report_row)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return mean, se


def _degenerate_others(prior: DegenerateAt, i: int) -> tuple[np.ndarray, np.ndarray]:
    profile = np.asarray(prior.profile, dtype=float)
    return np.delete(profile, i, axis=0), profile[i]


def _candidate_values(
    engine,
    inst: AuditableInstance,
    true_row: Sequence[float],
    truth_values: np.ndarray,
    truth_columns: Optional[list[np.ndarray]],
    candidate: Candidate,
) -> np.ndarray:
    # Single-coordinate deviations against the column-decomposed truncated
    # Winkler engine only need the changed column recomputed.
    if (
        truth_columns is not None
        and candidate.coordinate is not None
        and isinstance(engine, winkler_mod.ColumnEngine)
    ):
        q = candidate.coordinate
        new_col = engine.column_contribution(q, float(true_row[q]), candidate.row[q])
        return truth_values - truth_columns[q] + new_col
    return engine.utilities(true_row, candidate.row)


def best_response_search(
    inst: AuditableInstance,
    i: int,
    true_row: Sequence[float],
    prior: PriorSpec,
    strategy: Union[MisreportStrategy, Sequence[MisreportStrategy]],
    samples: int,
    seed: int,
    desideratum: str = "strict-iic",
    workers: int = 1,
) -> AuditVerdict:
    """Search misreports for recommender i and judge the desideratum.

    Point priors make this an exact ex post check (no sampling noise, the
    1e-9 tolerance decides); otherwise truth and every candidate share the
    same seeded co-report samples and each comparison uses the paired
    difference and its standard error.
    """
    n, m = _instance_shape(inst)
    seq = np.random.SeedSequence(seed)
    rng_samples, rng_candidates = (np.random.default_rng(s) for s in seq.spawn(2))
    candidates = generate_misreports(true_row, strategy, rng_candidates)

    exact = is_degenerate(prior)
    if exact:
        others = _degenerate_others(prior, i)[0][np.newaxis, :, :]
        effective_samples = 1
    else:
        if samples < 100:
            raise ValueError(f"need samples >= 100 for a Monte Carlo verdict, got {samples}")
        others = sample_others(prior, n, m, i, samples, rng_samples)
        effective_samples = samples

    engine = _make_engine(inst, i, others)
    truth_columns = None
    if isinstance(engine, winkler_mod.ColumnEngine):
        truth_columns = [
            engine.column_contribution(q, float(true_row[q]), float(true_row[q]))
            for q in range(m)
        ]
        truth_values = np.sum(truth_columns, axis=0)
    else:
        truth_values = engine.utilities(true_row, true_row)
    truth_mean = float(truth_values.mean())
    truth_se = (
        float(truth_values.std(ddof=1) / math.sqrt(effective_samples))
        if effective_samples > 1
        else 0.0
    )

    def evaluate(candidate: Candidate) -> MisreportOutcome:
        values = _candidate_values(engine, inst, true_row, truth_values, truth_columns, candidate)
        mean_diff, se = _paired_stats(truth_values - values)
        return MisreportOutcome(
            candidate=candidate,
            mean_gain=-mean_diff,
            std_error=se,
            classification=_classify(mean_diff, se, exact),
        )

    if exact and isinstance(engine, vcg_mod.InterimEngine) and candidates:
        # single co-report sample: evaluate the whole candidate batch at once
        rows = np.asarray([c.row for c in candidates], dtype=float)
        values_all = engine.utilities_grid(true_row, rows)
        truth_value = float(truth_values[0])
        outcomes = [
            MisreportOutcome(
                candidate=c,
                mean_gain=float(v) - truth_value,
                std_error=0.0,
                classification=_classify(truth_value - float(v), 0.0, True),
            )
            for c, v in zip(candidates, values_all)
        ]
    elif workers > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(evaluate, candidates))
    else:
        outcomes = [evaluate(c) for c in candidates]

    notes = ()
    if exact:
        notes = ("point prior: exact ex post evaluation, no sampling noise",)
    return _assemble_verdict(
        desideratum, outcomes, truth_mean, truth_se, effective_samples, seed, notes
    )


# ── grain of no veto ──────────────────────────────────────────────────


@dataclass(frozen=True)
class GrainReport:
    """Estimated probability that others' reports alone fund a borrower."""

    estimates: tuple[tuple[float, ...], ...]
    zero_pairs: tuple[tuple[int, int], ...]
    samples: int
    seed: int

    @property
    def all_positive(self) -> bool:
        return not self.zero_pairs


def grain_of_no_veto(
    inst: WinklerInstance, prior: PriorSpec, samples: int, seed: int
) -> GrainReport:
    """Per (recommender, borrower): P[aggregate with their report at 0 > c]."""
    if samples < 1000 and not is_degenerate(prior):
        raise ValueError(f"need samples >= 1000 for a stable estimate, got {samples}")
    rng = np.random.default_rng(seed)
    profiles = sample_profiles(prior, inst.n, inst.m, samples, rng)
    estimates = np.zeros((inst.n, inst.m))
    if isinstance(inst.aggregator, WeightedLinear):
        w = np.asarray(inst.aggregator.weights.weights)
        totals = np.einsum("j,sjm->sm", w, profiles)
        for i in range(inst.n):
            others = totals - w[i] * profiles[:, i, :]
            estimates[i, :] = (others > inst.threshold).mean(axis=0)
    else:
        from .aggregation import aggregate

        for s in range(samples):
            for i in range(inst.n):
                col = profiles[s].copy()
                col[i, :] = 0.0
                for q in range(inst.m):
                    estimates[i, q] += aggregate(inst.aggregator, tuple(col[:, q])) > inst.threshold
        estimates /= samples
    zero_pairs = tuple(
        (i, q) for i in range(inst.n) for q in range(inst.m) if estimates[i, q] == 0.0
    )
    return GrainReport(
        estimates=tuple(tuple(float(v) for v in row) for row in estimates),
        zero_pairs=zero_pairs,
        samples=samples,
        seed=seed,
    )


# ── efficiency and participation checks ───────────────────────────────


def brute_force_welfare(inst: VcgInstance, reports) -> float:
    """Best feasible welfare by enumerating every funding set (small m only)."""
    import itertools as it

    scores = vcg_mod.aggregate_scores(inst, reports)
    c, n_res = inst.reserve_threshold, inst.n_reserves
    items = [float(s) for s in scores] + [c] * n_res
    best = 0.0
    for size in range(min(inst.K, len(items)) + 1):
        for combo in it.combinations(range(len(items)), size):
            best = max(best, sum(items[j] for j in combo))
    return best


def allocative_efficiency_check(inst: VcgInstance, reports, tol: float = 1e-12) -> bool:
    """Chosen allocation achieves the brute-force maximum welfare."""
    alloc = vcg_mod.allocate(inst, reports)
    scores = vcg_mod.aggregate_scores(inst, reports)
    achieved = sum(float(scores[q]) for q in alloc.funded_real)
    achieved += alloc.reserves_funded * inst.reserve_threshold
    return abs(achieved - brute_force_welfare(inst, reports)) <= tol


def ex_post_ir_check(
    inst: AuditableInstance, profile, tol: float = EXACT_TOL
) -> tuple[bool, float, Optional[int]]:
    """Truthful expected utility is nonnegative for every recommender.

    Returns (ok, worst utility, worst recommender).
    """
    n, _ = _instance_shape(inst)
    arr = np.asarray(profile, dtype=float)
    worst, worst_i = math.inf, None
    for i in range(n):
        others = np.delete(arr, i, axis=0)
        value = _exact_value(inst, i, arr[i], arr[i], others)
        if value < worst:
            worst, worst_i = value, i
    return worst >= -tol, worst, worst_i


def strong_ex_post_ir_check(
    inst: VcgInstance, reports, tol: float = EXACT_TOL
) -> tuple[bool, float, Optional[tuple[int, tuple[int, ...]]]]:
    """Realized utility >= 0 for every recommender and every outcome vector.

    Enumerates all 2^(funded) outcome vectors, so keep K small. Requires
    the rebate to be enabled on the instance to have any chance of passing.
    """
    import itertools as it

    arr = np.asarray(reports, dtype=float)
    alloc = vcg_mod.allocate(inst, arr)
    funded = alloc.funded_real
    worst, witness = math.inf, None
    for bits in it.product((0, 1), repeat=len(funded)):
        outcomes = dict(zip(funded, bits))
        settlement = vcg_mod.settle(inst, arr, outcomes)
        for i in range(inst.n):
            value = settlement.realized_utility(i)
            if value < worst:
                worst, witness = value, (i, bits)
    if not funded:
        settlement = vcg_mod.settle(inst, arr, {})
        for i in range(inst.n):
            value = settlement.realized_utility(i)
            if value < worst:
                worst, witness = value, (i, ())
    return worst >= -tol, worst, witness


# ── weight incentive check ────────────────────────────────────────────


def weight_monotonicity_check(
    inst: VcgInstance,
    i: int,
    w_low: float,
    w_high: float,
    reports=None,
    trials: int = 0,
    seed: int = 0,
    tol: float = 1e-12,
) -> AuditVerdict:
    """Raising recommender i's weight (no renormalization) must strictly
    raise their truthful utility whenever they value the funded set.

    Checks the supplied report profile and `trials` uniform random ones.
    Profiles where i's value on the low-weight allocation is zero are the
    documented edge case and are skipped (counted in the notes).
    """
    if not 0.0 < w_low < w_high:
        raise ValueError(f"need 0 < w_low < w_high, got {w_low}, {w_high}")
    rng = np.random.default_rng(seed)
    profiles = []
    if reports is not None:
        profiles.append(np.asarray(reports, dtype=float))
    for _ in range(trials):
        profiles.append(rng.random((inst.n, inst.m)))

    increases, skipped = 0, 0
    outcomes: list[MisreportOutcome] = []
    for profile in profiles:
        low = dataclasses.replace(
            inst, weights=inst.weights[:i] + (w_low,) + inst.weights[i + 1 :]
        )
        high = dataclasses.replace(
            inst, weights=inst.weights[:i] + (w_high,) + inst.weights[i + 1 :]
        )
        alloc_low = vcg_mod.allocate(low, profile)
        value_low = sum(float(profile[i, q]) for q in alloc_low.funded_real)
        if value_low <= 0.0:
            skipped += 1
            continue
        u_low = vcg_mod.expost_utility(low, profile, i, profile[i])
        u_high = vcg_mod.expost_utility(high, profile, i, profile[i])
        gain = u_high - u_low
        classification = "loses" if gain > tol else ("wins" if gain < -tol else "ties")
        if classification == "loses":
            increases += 1
        outcomes.append(
            MisreportOutcome(
                candidate=Candidate(row=tuple(profile[i]), kind="weight-raise"),
                mean_gain=-gain,
                std_error=0.0,
                classification=classification,
            )
        )

    notes = (f"skipped {skipped} profiles with zero value on the funded set",)
    return _assemble_verdict(
        "weight-monotonicity", outcomes, 0.0, 0.0, len(profiles), seed, notes
    )


# ── bundled counterexample reproduction ───────────────────────────────


@dataclass(frozen=True)
class Table1Report:
    """Computed vs expected values for the bundled capped-Winkler fixture."""

    aggregates: tuple[float, ...]
    thresholds: tuple[tuple[float, ...], ...]
    honest_utilities: tuple[float, ...]
    misreport_utilities: tuple[float, ...]
    honest_funded: int
    misreport_funded: int
    misreporter: int
    expected: dict
    max_abs_error: float


def _load_bundled_fixture(name: str) -> dict:
    path = resources.files("lendmech").joinpath(f"scenarios/{name}.scenario")
    return json.loads(path.read_text())


def reproduce_table1() -> Table1Report:
    """Recompute the bundled capped-Winkler counterexample from first
    principles and compare every cell against its reference value.

    Raises ReproductionMismatch naming the first offending cell.
    """
    return reproduce_reference(_load_bundled_fixture("table1"))


def reproduce_reference(fixture: dict) -> Table1Report:
    """Verify a scenario's reference block against freshly computed values."""
    expected = fixture["reference"]
    tol = float(expected["tolerance"])
    beliefs = np.asarray(fixture["beliefs"], dtype=float)
    n, m = beliefs.shape
    from .aggregation import WeightVector

    weights_cfg = fixture.get("weights", "equal")
    if weights_cfg == "equal":
        weights = WeightVector.equal(n)
    else:
        weights = WeightVector(tuple(float(w) for w in weights_cfg))
    base = WinklerInstance(
        n=n,
        m=m,
        threshold=float(fixture["c"]),
        aggregator=WeightedLinear(weights),
    )
    inst = CappedWinklerInstance(base=base, cap=int(fixture["K"]))
    audit_cfg = fixture["audit"]["weak-epic"]
    misreporter = int(audit_cfg["recommender"])
    misreport_row = tuple(float(v) for v in audit_cfg["targeted"][0])

    w = np.asarray(base.aggregator.weights.weights)
    aggregates = tuple(float(v) for v in w @ beliefs)
    thresholds_arr = winkler_mod.marginal_thresholds(base, beliefs)
    thresholds = tuple(tuple(float(v) for v in row) for row in thresholds_arr)

    honest_alloc = capped_allocate(inst, beliefs)
    honest_funded = honest_alloc.index(1)
    honest_utilities = tuple(
        _exact_value(inst, i, beliefs[i], beliefs[i], np.delete(beliefs, i, axis=0))
        for i in range(n)
    )

    deviated = beliefs.copy()
    deviated[misreporter] = misreport_row
    misreport_alloc = capped_allocate(inst, deviated)
    misreport_funded = misreport_alloc.index(1)
    misreport_utilities = []
    for i in range(n):
        report_row = deviated[i]
        misreport_utilities.append(
            _exact_value(inst, i, beliefs[i], report_row, np.delete(deviated, i, axis=0))
        )

    report = Table1Report(
        aggregates=aggregates,
        thresholds=thresholds,
        honest_utilities=honest_utilities,
        misreport_utilities=tuple(misreport_utilities),
        honest_funded=honest_funded,
        misreport_funded=misreport_funded,
        misreporter=misreporter,
        expected=expected,
        max_abs_error=0.0,
    )

    max_err = 0.0

    def compare(label: str, computed: Sequence[float], reference: Sequence[float]) -> float:
        worst = 0.0
        for idx, (a, b) in enumerate(zip(computed, reference)):
            err = abs(a - b)
            worst = max(worst, err)
            if err > tol:
                raise ReproductionMismatch(
                    f"{label}[{idx}]: computed {a:.6f}, reference {b}, tolerance {tol}"
                )
        return worst

    max_err = max(max_err, compare("aggregate", report.aggregates, expected["aggregates"]))
    for i in range(n):
        max_err = max(
            max_err, compare(f"threshold row {i}", report.thresholds[i], expected["thresholds"][i])
        )
    max_err = max(
        max_err, compare("honest utility", report.honest_utilities, expected["honest_utilities"])
    )
    max_err = max(
        max_err,
        compare(
            "misreport utility", report.misreport_utilities, expected["misreport_utilities"]
        ),
    )
    if honest_funded != int(expected["honest_funded"]):
        raise ReproductionMismatch(
            f"honest allocation funds borrower {honest_funded}, reference "
            f"{expected['honest_funded']}"
        )
    if misreport_funded != int(expected["misreport_funded"]):
        raise ReproductionMismatch(
            f"misreport allocation funds borrower {misreport_funded}, reference "
            f"{expected['misreport_funded']}"
        )
    return dataclasses.replace(report, max_abs_error=max_err)
