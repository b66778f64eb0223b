"""VCG scoring mechanism for lending under a liquidity cap.

Outcome-contingent payments use a constant rule (alpha * w_i on repayment,
nothing on default), which gives every recommender a value for funding
borrower q proportional to their reported belief. Funding then maximizes
total reported value subject to the cap. A profit threshold c > 0 is
encoded by K imaginary reserve borrowers backed by an internal reserve
recommender of weight 1 who values reserves at c and real borrowers at 0;
the reserve recommender is counted in welfare but never paid or charged.
On top sit standard pivot payments, and optionally a report-independent
rebate equal to each recommender's worst-case pivot, which makes realized
utility nonnegative for every outcome. All payments scale linearly in
alpha; the allocation does not depend on it.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    MissingOutcome,
    OutcomeForUnfundedBorrower,
    ReserveRecommenderHasNoPayment,
    ShapeMismatch,
)
from .priors import PriorSpec, sample_others

# Above this many borrowers-plus-reserves the worst-case pivot search stops
# enumerating every boost set and falls back to a documented one-sided family.
TCOMP_EXACT_LIMIT = 20


@dataclass(frozen=True)
class VcgInstance:
    """n recommenders, m borrowers, cap K, reserve threshold c in [0, 1).

    c = 0 disables the reserve construction entirely. Weights are not
    required to sum to 1 at this level: the mechanism is well defined for
    any nonnegative weights, and the weight-incentive audit deliberately
    raises a single weight without renormalizing. Scenario files do enforce
    the sum-to-1 convention.
    """

    n: int
    m: int
    K: int
    reserve_threshold: float
    weights: tuple[float, ...]
    alpha: float = 1.0
    tcomp_enabled: bool = False

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 1:
            raise ValueError(f"need n >= 1 and m >= 1, got ({self.n}, {self.m})")
        if not 1 <= self.K <= self.m:
            raise ValueError(f"need 1 <= K <= m, got K={self.K}, m={self.m}")
        if not 0.0 <= self.reserve_threshold < 1.0:
            raise ValueError(
                f"reserve threshold must lie in [0, 1), got {self.reserve_threshold}"
            )
        if len(self.weights) != self.n:
            raise ValueError(f"need {self.n} weights, got {len(self.weights)}")
        if any(w < 0.0 for w in self.weights):
            raise ValueError(f"weights must be nonnegative, got {self.weights}")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def n_reserves(self) -> int:
        return self.K if self.reserve_threshold > 0.0 else 0


@dataclass(frozen=True)
class Allocation:
    """Funding decision over real borrowers plus reserve slots."""

    real: tuple[int, ...]
    reserves_funded: int

    @property
    def funded_real(self) -> tuple[int, ...]:
        return tuple(q for q, f in enumerate(self.real) if f)


@dataclass(frozen=True)
class Settlement:
    """Pivot charges, realized constant-rule payments, optional rebates."""

    allocation: Allocation
    immediate: tuple[float, ...]
    contingent: dict[tuple[int, int], float]
    tcomp: Optional[tuple[float, ...]]
    alpha: float

    def realized_utility(self, i: int) -> float:
        paid = sum(v for (j, _), v in self.contingent.items() if j == i)
        rebate = self.tcomp[i] if self.tcomp is not None else 0.0
        return paid + rebate - self.immediate[i]


def _as_report_matrix(inst: VcgInstance, reports) -> np.ndarray:
    arr = np.asarray(reports, dtype=float)
    if arr.shape != (inst.n, inst.m):
        raise ShapeMismatch(f"reports shape {arr.shape} != ({inst.n}, {inst.m})")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("reports must lie in [0, 1]")
    return arr


def _select(scores: Sequence[float], c: float, n_reserves: int, K: int) -> Allocation:
    """Welfare-maximizing feasible allocation with a deterministic tie-break.

    Sorts by score descending, then real borrowers before reserves, then
    lower index, and funds the first min(K, available) items. All scores
    are nonnegative, so funding up to the cap is always weakly optimal.
    """
    items = [(-float(s), 0, q) for q, s in enumerate(scores)]
    items += [(-c, 1, r) for r in range(n_reserves)]
    items.sort()
    k = min(K, len(items))
    real = [0] * len(scores)
    reserves = 0
    for _, is_reserve, idx in items[:k]:
        if is_reserve:
            reserves += 1
        else:
            real[idx] = 1
    return Allocation(real=tuple(real), reserves_funded=reserves)


def _welfare(scores: np.ndarray, c: float, alloc: Allocation) -> float:
    real = sum(float(scores[q]) for q in alloc.funded_real)
    return real + alloc.reserves_funded * c


def aggregate_scores(inst: VcgInstance, reports) -> np.ndarray:
    """Per-borrower total weighted reports (the welfare coefficient)."""
    arr = _as_report_matrix(inst, reports)
    return np.asarray(inst.weights) @ arr


def allocate(inst: VcgInstance, reports) -> Allocation:
    """Fund the top-K entries among real borrowers and reserve slots."""
    return _select(aggregate_scores(inst, reports), inst.reserve_threshold, inst.n_reserves, inst.K)


def _check_real_recommender(inst: VcgInstance, i: int) -> None:
    if i == inst.n:
        raise ReserveRecommenderHasNoPayment(
            "the internal reserve recommender is never paid or charged"
        )
    if not 0 <= i < inst.n:
        raise ValueError(f"recommender index {i} out of range for n={inst.n}")


def _others_scores(inst: VcgInstance, arr: np.ndarray, i: int) -> np.ndarray:
    w_others = np.delete(np.asarray(inst.weights), i)
    return w_others @ np.delete(arr, i, axis=0)


def pivot_payment(inst: VcgInstance, reports, i: int) -> float:
    """Charge to i: others' best welfare without i minus their welfare at
    the chosen allocation. Nonnegative; alpha-scaled like every payment."""
    _check_real_recommender(inst, i)
    arr = _as_report_matrix(inst, reports)
    c, n_res, K = inst.reserve_threshold, inst.n_reserves, inst.K
    others = _others_scores(inst, arr, i)
    chosen = _select(np.asarray(inst.weights) @ arr, c, n_res, K)
    without_i = _select(others, c, n_res, K)
    return inst.alpha * (_welfare(others, c, without_i) - _welfare(others, c, chosen))


def _tcomp_boost_sets(m: int, K: int, base: np.ndarray, exact: bool):
    if exact:
        for size in range(min(K, m) + 1):
            yield from itertools.combinations(range(m), size)
        return
    # Reduced family: no boost, single-borrower swings, and prefixes of the
    # lowest-scoring borrowers (the cheapest borrowers for others are the
    # most damaging ones to force in).
    yield ()
    for q in range(m):
        yield (q,)
    order = np.argsort(base, kind="stable")
    for size in range(2, min(K, m) + 1):
        yield tuple(int(q) for q in order[:size])


def tcomp(inst: VcgInstance, others_reports, i: int) -> float:
    """Worst-case pivot payment of i over all reports, given others' reports.

    Welfare is linear in i's report and the allocation set is finite, so
    the minimum of others' welfare over achievable allocations is attained
    by boosting some set of at most K borrowers to a report of 1 and the
    rest to 0. Exact for m + reserves <= TCOMP_EXACT_LIMIT; beyond that a
    reduced boost family is searched and the result is a lower bound.
    """
    _check_real_recommender(inst, i)
    w_i = float(inst.weights[i])
    if w_i == 0.0:
        return 0.0
    arr = np.asarray(others_reports, dtype=float)
    if arr.shape != (inst.n - 1, inst.m):
        raise ShapeMismatch(f"others' reports shape {arr.shape} != ({inst.n - 1}, {inst.m})")
    w_others = np.delete(np.asarray(inst.weights), i)
    base = w_others @ arr
    c, n_res, K = inst.reserve_threshold, inst.n_reserves, inst.K
    exact = inst.m + n_res <= TCOMP_EXACT_LIMIT
    if not exact:
        warnings.warn(
            f"tcomp boost search is approximate for m + reserves > {TCOMP_EXACT_LIMIT}",
            RuntimeWarning,
            stacklevel=2,
        )
    without_i = _welfare(base, c, _select(base, c, n_res, K))
    worst = without_i
    for boost in _tcomp_boost_sets(inst.m, K, base, exact):
        boosted = base.copy()
        for q in boost:
            boosted[q] += w_i
        alloc = _select(boosted, c, n_res, K)
        worst = min(worst, _welfare(base, c, alloc))
    return inst.alpha * (without_i - worst)


def settle(inst: VcgInstance, reports, outcomes: Mapping[int, int]) -> Settlement:
    """Pivot charges plus realized constant-rule payments (and rebates).

    `outcomes` must cover exactly the funded real borrowers; reserve slots
    are bookkeeping rows with no outcomes.
    """
    arr = _as_report_matrix(inst, reports)
    alloc = allocate(inst, arr)
    funded = set(alloc.funded_real)
    for q in outcomes:
        if q not in funded:
            raise OutcomeForUnfundedBorrower(f"borrower {q} received no loan")
    for q in funded:
        if q not in outcomes:
            raise MissingOutcome(f"no outcome supplied for funded borrower {q}")
    for q, o in outcomes.items():
        if o not in (0, 1):
            raise ValueError(f"outcome for borrower {q} must be 0 or 1, got {o}")

    immediate = tuple(pivot_payment(inst, arr, i) for i in range(inst.n))
    contingent = {
        (i, q): inst.alpha * inst.weights[i] * outcomes[q]
        for i in range(inst.n)
        for q in sorted(funded)
    }
    rebates: Optional[tuple[float, ...]] = None
    if inst.tcomp_enabled:
        rebates = tuple(
            tcomp(inst, np.delete(arr, i, axis=0), i) for i in range(inst.n)
        )
    return Settlement(
        allocation=alloc,
        immediate=immediate,
        contingent=contingent,
        tcomp=rebates,
        alpha=inst.alpha,
    )


def deficit(settlement: Settlement) -> float:
    """Net payment out of the mechanism this round (negative = surplus)."""
    out = sum(settlement.contingent.values())
    if settlement.tcomp is not None:
        out += sum(settlement.tcomp)
    return float(out - sum(settlement.immediate))


def expost_utility(inst: VcgInstance, reports, i: int, belief_row: Sequence[float]) -> float:
    """i's utility at these reports, expectation over own repayment beliefs.

    Excludes the tcomp rebate: the rebate is report-independent, so it
    shifts utilities without affecting any incentive comparison.
    """
    arr = _as_report_matrix(inst, reports)
    alloc = allocate(inst, arr)
    value = inst.alpha * sum(
        inst.weights[i] * float(belief_row[q]) for q in alloc.funded_real
    )
    return value - pivot_payment(inst, arr, i)


def select_batch(scores: np.ndarray, c: float, n_reserves: int, K: int) -> np.ndarray:
    """Row-wise top-K over real scores plus constant reserve slots.

    Returns a boolean mask of shape (rows, m + n_reserves). Ties are broken
    arbitrarily but deterministically; exact ties have measure zero under
    the continuous priors the Monte Carlo paths feed this.
    """
    rows, m = scores.shape
    total = m + n_reserves
    k = min(K, total)
    if n_reserves:
        full = np.concatenate([scores, np.full((rows, n_reserves), c)], axis=1)
    else:
        full = scores
    mask = np.zeros((rows, total), dtype=bool)
    if k == total:
        mask[:] = True
        return mask
    idx = np.argpartition(-full, k - 1, axis=1)[:, :k]
    np.put_along_axis(mask, idx, True, axis=1)
    return mask


class InterimEngine:
    """Vectorized interim utility for one recommender over sampled others."""

    def __init__(self, inst: VcgInstance, i: int, others: np.ndarray) -> None:
        _check_real_recommender(inst, i)
        self.inst = inst
        self.w_i = float(inst.weights[i])
        w_others = np.delete(np.asarray(inst.weights), i)
        # others: (samples, n-1, m)
        self.scores_others = np.einsum("j,sjm->sm", w_others, others)
        self.samples = others.shape[0]
        c, n_res, K = inst.reserve_threshold, inst.n_reserves, inst.K
        mask = select_batch(self.scores_others, c, n_res, K)
        self.best_without_i = self._others_welfare(mask, self.scores_others)

    def _others_welfare(self, mask: np.ndarray, scores_others: np.ndarray) -> np.ndarray:
        m = self.inst.m
        real = (mask[:, :m] * scores_others).sum(axis=1)
        return real + mask[:, m:].sum(axis=1) * self.inst.reserve_threshold

    def utilities(self, belief_row: Sequence[float], report_row: Sequence[float]) -> np.ndarray:
        """Per-sample utility of reporting `report_row` with beliefs
        `belief_row` (rebate excluded; it cancels in comparisons)."""
        inst = self.inst
        full = self.scores_others + self.w_i * np.asarray(report_row, dtype=float)
        mask = select_batch(full, inst.reserve_threshold, inst.n_reserves, inst.K)
        welfare_others = self._others_welfare(mask, self.scores_others)
        value = mask[:, : inst.m] @ (self.w_i * np.asarray(belief_row, dtype=float))
        return inst.alpha * (value + welfare_others - self.best_without_i)

    def utilities_grid(self, belief_row: Sequence[float], report_rows: np.ndarray) -> np.ndarray:
        """Exact utilities for a batch of candidate reports against a single
        fixed co-report sample (used by the noise-free ex post checks)."""
        if self.samples != 1:
            raise ValueError("grid evaluation requires exactly one co-report sample")
        inst = self.inst
        full = self.scores_others[0] + self.w_i * np.asarray(report_rows, dtype=float)
        mask = select_batch(full, inst.reserve_threshold, inst.n_reserves, inst.K)
        scores = np.broadcast_to(self.scores_others[0], (full.shape[0], inst.m))
        welfare_others = self._others_welfare(mask, scores)
        value = mask[:, : inst.m] @ (self.w_i * np.asarray(belief_row, dtype=float))
        return inst.alpha * (value + welfare_others - self.best_without_i[0])


def interim_utility(
    inst: VcgInstance,
    i: int,
    true_row: Sequence[float],
    report_row: Sequence[float],
    prior: PriorSpec,
    samples: int,
    seed: int,
) -> tuple[float, float]:
    """Monte Carlo (mean, standard error) of interim utility under truthful
    co-reports drawn from the prior. Deterministic per seed."""
    if samples < 1:
        raise ValueError(f"need samples >= 1, got {samples}")
    rng = np.random.default_rng(seed)
    others = sample_others(prior, inst.n, inst.m, i, samples, rng)
    values = InterimEngine(inst, i, others).utilities(true_row, report_row)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    return mean, se
