"""Proper scoring rules for binary repayment outcomes.

Higher scores mean better forecasts. The quadratic rule is the linear
(Brier) equivalent with truthful expectation p^2 + (1-p)^2; the
logarithmic rule is ln(report probability of the realized outcome).
The asymmetrized (Winkler) variant of a symmetric rule rescales it so
the truthful expected score is exactly zero at a chosen threshold c,
which lets a lender anchor "no payment" at its profit threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Union

from .errors import NonFiniteScore, TruncatedRegion

MechanismVariant = Literal["trunc-winkler-log", "trunc-quadratic-with-transfer"]


def _check_threshold(c: float) -> None:
    # Open interval: the asymmetrizing denominator degenerates at 0 and 1.
    if not 0.0 < c < 1.0:
        raise ValueError(f"threshold must lie strictly inside (0, 1), got {c}")


def _check_outcome(outcome: int) -> None:
    if outcome not in (0, 1):
        raise ValueError(f"outcome must be 0 (default) or 1 (repayment), got {outcome}")


@dataclass(frozen=True)
class Quadratic:
    """Brier-style rule: s(r, 1) = 2r - r^2 - (1-r)^2, s(r, 0) mirrored."""


@dataclass(frozen=True)
class Logarithmic:
    """Log rule: s(r, 1) = ln r, s(r, 0) = ln(1 - r)."""


@dataclass(frozen=True)
class Winkler:
    """Asymmetrized rule (s(r,o) - s(c,o)) / T(c,r), zero at report c.

    T(c, r) = s(0,0) - s(c,0) for r <= c and s(1,1) - s(c,1) for r > c,
    so the rescaling is per-branch and properness of the base rule carries
    over. Both branches are implemented; truncated mechanisms only consume
    the upper one.
    """

    base: Union[Quadratic, Logarithmic]
    threshold: float

    def __post_init__(self) -> None:
        if not isinstance(self.base, (Quadratic, Logarithmic)):
            raise ValueError("asymmetrization requires a strictly proper symmetric base rule")
        _check_threshold(self.threshold)


@dataclass(frozen=True)
class TruncatedQuadratic:
    """Quadratic rule scored only above the threshold (no-loan region unpaid)."""

    threshold: float

    def __post_init__(self) -> None:
        _check_threshold(self.threshold)


@dataclass(frozen=True)
class TruncatedWinklerLog:
    """Log-based Winkler rule scored only above the threshold."""

    threshold: float

    def __post_init__(self) -> None:
        _check_threshold(self.threshold)


@dataclass(frozen=True)
class ConstantWeight:
    """Report-independent rule paying the weight on repayment, 0 on default."""

    weight: float

    def __post_init__(self) -> None:
        if self.weight < 0:
            raise ValueError(f"constant payment weight must be >= 0, got {self.weight}")


ScoringRule = Union[
    Quadratic, Logarithmic, Winkler, TruncatedQuadratic, TruncatedWinklerLog, ConstantWeight
]


def _quadratic_score(report: float, outcome: int) -> float:
    hit = report if outcome == 1 else 1.0 - report
    return 2.0 * hit - report * report - (1.0 - report) * (1.0 - report)


def _log_score(report: float, outcome: int) -> float:
    p_realized = report if outcome == 1 else 1.0 - report
    if p_realized == 0.0:
        raise NonFiniteScore(
            f"log score is -inf: report {report} puts zero mass on outcome {outcome}"
        )
    return math.log(p_realized)


def _base_score(base: Union[Quadratic, Logarithmic], report: float, outcome: int) -> float:
    if isinstance(base, Quadratic):
        return _quadratic_score(report, outcome)
    return _log_score(report, outcome)


def score(rule: ScoringRule, report: float, outcome: int) -> float:
    """Realized score of `report` under `rule` once `outcome` is observed.

    Raises TruncatedRegion if a truncated rule is queried at a report inside
    its unpaid region, and NonFiniteScore if a log argument of 0 is hit on
    the realized branch.
    """
    _check_outcome(outcome)
    if not 0.0 <= report <= 1.0:
        raise ValueError(f"report must lie in [0, 1], got {report}")

    if isinstance(rule, Quadratic):
        return _quadratic_score(report, outcome)
    if isinstance(rule, Logarithmic):
        return _log_score(report, outcome)
    if isinstance(rule, ConstantWeight):
        return rule.weight if outcome == 1 else 0.0
    if isinstance(rule, TruncatedQuadratic):
        if report <= rule.threshold:
            raise TruncatedRegion(
                f"truncated quadratic has no score at report {report} <= {rule.threshold}"
            )
        return _quadratic_score(report, outcome)
    if isinstance(rule, TruncatedWinklerLog):
        if report <= rule.threshold:
            raise TruncatedRegion(
                f"truncated Winkler has no score at report {report} <= {rule.threshold}"
            )
        return score(Winkler(Logarithmic(), rule.threshold), report, outcome)
    if isinstance(rule, Winkler):
        c = rule.threshold
        numerator = _base_score(rule.base, report, outcome) - _base_score(rule.base, c, outcome)
        if report <= c:
            denom = _base_score(rule.base, 0.0, 0) - _base_score(rule.base, c, 0)
        else:
            denom = _base_score(rule.base, 1.0, 1) - _base_score(rule.base, c, 1)
        return numerator / denom
    raise TypeError(f"unknown scoring rule {rule!r}")


def expected_score(rule: ScoringRule, belief: float, report: float) -> float:
    """Expectation of score(rule, report, o) with o ~ Bernoulli(belief).

    A branch carrying zero belief mass is never evaluated, so e.g. a full
    confidence report of 1.0 under the log rule has expected score ln(1)=0
    rather than 0 * (-inf).
    """
    if not 0.0 <= belief <= 1.0:
        raise ValueError(f"belief must lie in [0, 1], got {belief}")
    total = 0.0
    if belief > 0.0:
        total += belief * score(rule, report, 1)
    if belief < 1.0:
        total += (1.0 - belief) * score(rule, report, 0)
    return total


def truthful_mechanism_utility(
    threshold: float, belief: float, variant: MechanismVariant
) -> float:
    """Expected utility of truthful reporting in a single-pair mechanism.

    trunc-winkler-log: zero payment below the threshold (no loan, no
    transfer), the truthful expected Winkler-log score above it.

    trunc-quadratic-with-transfer: the truncated quadratic rule plus an
    immediate transfer of c^2 + (1-c)^2 paid to the recommender whenever the
    report stays at or below the threshold, which makes the expected payment
    continuous across the threshold.
    """
    _check_threshold(threshold)
    if not 0.0 <= belief <= 1.0:
        raise ValueError(f"belief must lie in [0, 1], got {belief}")
    if variant == "trunc-winkler-log":
        if belief <= threshold:
            return 0.0
        return expected_score(Winkler(Logarithmic(), threshold), belief, belief)
    if variant == "trunc-quadratic-with-transfer":
        if belief <= threshold:
            return threshold * threshold + (1.0 - threshold) * (1.0 - threshold)
        return belief * belief + (1.0 - belief) * (1.0 - belief)
    raise ValueError(f"unknown mechanism variant {variant!r}")


def utility_curve(
    threshold: float, variant: MechanismVariant, grid_size: int
) -> list[tuple[float, float]]:
    """Truthful utility sampled on `grid_size` evenly spaced beliefs in [0, 1]."""
    if grid_size < 2:
        raise ValueError(f"grid_size must be >= 2, got {grid_size}")
    step = 1.0 / (grid_size - 1)
    points = []
    for k in range(grid_size):
        belief = min(1.0, k * step)
        points.append((belief, truthful_mechanism_utility(threshold, belief, variant)))
    return points
