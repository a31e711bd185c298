"""Top-down pricing of cash CLO tranches from a market implied scenario distribution."""

from .deal import (
    DealQuotes,
    Scenario,
    ScenarioSet,
    TranchePVMatrix,
    load_pv_matrix,
    load_quotes,
    load_scenarios,
)
from .entropy import (
    MISD,
    ConstraintSpec,
    MaxEntropyDistribution,
    MinCrossEntropyDistribution,
    SolveDiagnostics,
    SolverSettings,
    solve_maxent,
    solve_min_cross_entropy,
)
from .exceptions import (
    CLOError,
    InfeasibleTarget,
    MissingMarketLoanPrice,
    NonConvergence,
    PinnedTrancheUnknown,
    PriorSupportConflict,
    SolverError,
    ValidationError,
)
from .pricing import (
    BespokeSpec,
    CalibratedIndex,
    ImpliedQuantities,
    calibrate_index,
    implied_basis,
    implied_expectations,
    map_bespoke,
    price_tranches,
)
from .risk import BumpConfig, RiskReport, loan_price_delta, quote_bump_recalibration, tranche01
from .synthetic import SyntheticDealSpec, SyntheticTranche, build_pv_matrix, load_synthetic_spec, synth_tranche_pv

__version__ = "0.1.0"

__all__ = [
    "DealQuotes", "Scenario", "ScenarioSet", "TranchePVMatrix",
    "load_pv_matrix", "load_quotes", "load_scenarios",
    "MISD", "ConstraintSpec", "SolverSettings", "SolveDiagnostics",
    "MaxEntropyDistribution", "MinCrossEntropyDistribution",
    "solve_maxent", "solve_min_cross_entropy",
    "CLOError", "ValidationError", "MissingMarketLoanPrice", "PinnedTrancheUnknown",
    "SolverError", "InfeasibleTarget", "PriorSupportConflict", "NonConvergence",
    "BespokeSpec", "CalibratedIndex", "ImpliedQuantities",
    "calibrate_index", "implied_basis", "implied_expectations", "map_bespoke", "price_tranches",
    "BumpConfig", "RiskReport", "loan_price_delta", "quote_bump_recalibration", "tranche01",
    "SyntheticDealSpec", "SyntheticTranche", "build_pv_matrix", "load_synthetic_spec", "synth_tranche_pv",
]
