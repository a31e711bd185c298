"""Index calibration, implied quantities and bespoke mapping.

The index deal's quotes pin down a maximum-entropy MISD. A bespoke deal
on the same scenario grid is priced from a cross-entropy perturbation of
that MISD which reproduces the bespoke loan price (shifted by the index
basis) and any tranche prices the desk can observe directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .deal import DealQuotes, ScenarioSet, TranchePVMatrix, validate_quotes
from .entropy import (
    MISD,
    ConstraintSpec,
    SolveDiagnostics,
    SolverSettings,
    solve_maxent,
    solve_min_cross_entropy,
)
from .exceptions import MissingMarketLoanPrice, PinnedTrancheUnknown, ValidationError

__all__ = [
    "ImpliedQuantities",
    "CalibratedIndex",
    "IndexSnapshot",
    "BespokeSpec",
    "BespokeResult",
    "calibrate_index",
    "implied_expectations",
    "implied_basis",
    "map_bespoke",
    "price_tranches",
    "LOAN_CONSTRAINT",
]

LOAN_CONSTRAINT = "collateral"


@dataclass(frozen=True)
class ImpliedQuantities:
    """Expected CADR/CAPR/CRR (fractions) and collateral price (points)."""

    cadr: float
    capr: float
    crr: float
    collateral_price: float

    def to_dict(self) -> dict:
        return {
            "cadr": self.cadr,
            "capr": self.capr,
            "crr": self.crr,
            "collateral_price": self.collateral_price,
        }


def price_tranches(misd: MISD, pv: TranchePVMatrix) -> dict[str, float]:
    """Expected PV of every tranche under ``misd``, in points."""
    if len(misd) != pv.n_scenarios:
        raise ValidationError(f"MISD has {len(misd)} scenarios, PV matrix has {pv.n_scenarios}")
    prices = misd.expectation(pv.values)
    return {name: float(v) for name, v in zip(pv.tranche_names, prices)}


def implied_expectations(misd: MISD, scenarios: ScenarioSet, collateral) -> ImpliedQuantities:
    collateral = np.asarray(collateral, dtype=float)
    if len(misd) != len(scenarios) or collateral.shape != (len(scenarios),):
        raise ValidationError(
            f"length mismatch: MISD {len(misd)}, scenarios {len(scenarios)}, "
            f"collateral {collateral.shape}"
        )
    w = misd.weights
    return ImpliedQuantities(
        cadr=float(w @ scenarios.cadr),
        capr=float(w @ scenarios.capr),
        crr=float(w @ scenarios.crr),
        collateral_price=float(w @ collateral),
    )


def implied_basis(implied_collateral: float, market_loan_price: float) -> float:
    """Tranche-implied collateral price minus the market loan average (points)."""
    return float(implied_collateral) - float(market_loan_price)


@dataclass(frozen=True)
class CalibratedIndex:
    misd: MISD
    quotes: DealQuotes
    pv: TranchePVMatrix
    implied: ImpliedQuantities
    diagnostics: SolveDiagnostics

    @property
    def basis(self) -> float:
        if self.quotes.market_loan_price is None:
            raise MissingMarketLoanPrice("index quotes carry no market_loan_price")
        return implied_basis(self.implied.collateral_price, self.quotes.market_loan_price)

    @property
    def prices(self) -> dict[str, float]:
        return price_tranches(self.misd, self.pv)

    @property
    def scenarios(self) -> ScenarioSet:
        return self.pv.scenarios


@dataclass(frozen=True)
class IndexSnapshot:
    """The parts of a calibrated index that mapping needs, e.g. restored from a report."""

    misd: MISD
    scenarios: ScenarioSet
    basis_value: float | None = None

    @property
    def basis(self) -> float:
        if self.basis_value is None:
            raise MissingMarketLoanPrice("index snapshot carries no basis")
        return self.basis_value


def calibrate_index(
    pv: TranchePVMatrix, quotes: DealQuotes, settings: SolverSettings | None = None
) -> CalibratedIndex:
    """Maximum-entropy MISD repricing every quoted tranche of the index deal."""
    validate_quotes(quotes, pv)
    constraints = [ConstraintSpec(pv.column(name), price, name) for name, price in quotes.prices.items()]
    misd, diag = solve_maxent(constraints, pv.n_scenarios, settings)
    implied = implied_expectations(misd, pv.scenarios, pv.collateral)
    return CalibratedIndex(misd, quotes, pv, implied, diag)


@dataclass(frozen=True)
class BespokeSpec:
    """Bespoke deal inputs.

    ``market_loan_price`` of ``None`` drops the loan constraint altogether;
    ``pinned_tranches`` maps tranche names to directly observed prices.
    """

    pv: TranchePVMatrix
    market_loan_price: float | None = None
    manager_adjustment: float = 0.0
    pinned_tranches: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        pins = {str(k): float(v) for k, v in self.pinned_tranches.items()}
        unknown = [k for k in pins if k not in self.pv.tranche_names]
        if unknown:
            raise PinnedTrancheUnknown(f"pinned tranches not in bespoke PV matrix: {unknown}")
        object.__setattr__(self, "pinned_tranches", pins)
        if self.market_loan_price is not None:
            object.__setattr__(self, "market_loan_price", float(self.market_loan_price))
        object.__setattr__(self, "manager_adjustment", float(self.manager_adjustment))

    def replace(self, **changes) -> "BespokeSpec":
        kw = dict(
            pv=self.pv,
            market_loan_price=self.market_loan_price,
            manager_adjustment=self.manager_adjustment,
            pinned_tranches=self.pinned_tranches,
        )
        kw.update(changes)
        return BespokeSpec(**kw)


@dataclass(frozen=True)
class BespokeResult:
    misd: MISD
    prices: dict[str, float]
    implied: ImpliedQuantities
    diagnostics: SolveDiagnostics
    loan_target: float | None


def loan_target(index: CalibratedIndex | IndexSnapshot, bespoke: BespokeSpec) -> float | None:
    """Collateral expectation the bespoke MISD must hit, or None without a loan price."""
    if bespoke.market_loan_price is None:
        return None
    return index.basis + bespoke.market_loan_price + bespoke.manager_adjustment


def map_bespoke(
    index: CalibratedIndex | IndexSnapshot,
    bespoke: BespokeSpec,
    settings: SolverSettings | None = None,
    *,
    pin_weight: float | None = None,
) -> BespokeResult:
    """Cross-entropy mapping of the index MISD onto a bespoke deal.

    ``pin_weight`` softens the pinned-tranche constraints into quadratic
    penalties; the loan constraint always stays exact.
    """
    if bespoke.pv.scenarios != index.scenarios:
        raise ValidationError("bespoke and index PV matrices must share one scenario set")
    constraints = []
    target = loan_target(index, bespoke)
    if target is not None:
        constraints.append(ConstraintSpec(bespoke.pv.collateral, target, LOAN_CONSTRAINT))
    for name, price in bespoke.pinned_tranches.items():
        constraints.append(ConstraintSpec(bespoke.pv.column(name), price, name, weight=pin_weight))
    misd, diag = solve_min_cross_entropy(index.misd, constraints, settings)
    prices = price_tranches(misd, bespoke.pv)
    implied = implied_expectations(misd, bespoke.pv.scenarios, bespoke.pv.collateral)
    return BespokeResult(misd, prices, implied, diag, target)
