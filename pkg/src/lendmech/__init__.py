"""Outcome-verified belief elicitation for community lending.

Two mechanisms pay community members for reports on borrowers' repayment
chances: a truncated asymmetric (Winkler) scoring mechanism for lenders
without a liquidity cap, and a VCG scoring mechanism that stays truthful
under a cap by pricing allocation swings. The package also ships linear
belief aggregation with outcome-based weights, a seeded Monte Carlo
incentive-audit engine, a multi-round simulator, and a CLI.
"""

from .aggregation import (
    MonotoneCustom,
    ObservedLoan,
    RoundHistory,
    WeightVector,
    WeightedLinear,
    aggregate,
    budescu_quality,
    budescu_weights,
)
from .priors import BetaIID, DegenerateAt, ProductGrid, UniformIID
from .scoring import (
    ConstantWeight,
    Logarithmic,
    Quadratic,
    TruncatedQuadratic,
    TruncatedWinklerLog,
    Winkler,
    expected_score,
    score,
    truthful_mechanism_utility,
    utility_curve,
)
from .vcg import VcgInstance
from .winkler import WinklerInstance

__version__ = "0.1.0"

__all__ = [
    "BetaIID",
    "ConstantWeight",
    "DegenerateAt",
    "Logarithmic",
    "MonotoneCustom",
    "ObservedLoan",
    "ProductGrid",
    "Quadratic",
    "RoundHistory",
    "TruncatedQuadratic",
    "TruncatedWinklerLog",
    "UniformIID",
    "VcgInstance",
    "WeightVector",
    "WeightedLinear",
    "Winkler",
    "WinklerInstance",
    "aggregate",
    "budescu_quality",
    "budescu_weights",
    "expected_score",
    "score",
    "truthful_mechanism_utility",
    "utility_curve",
]
