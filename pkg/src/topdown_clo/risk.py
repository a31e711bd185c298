"""Bump-remap-reprice risk: loan-price deltas and tranche01.

Constraint modes decide what happens to pinned bespoke tranches while
something else is bumped:

``hard``
    pinned prices stay exactly at their targets.
``soft``
    pins become quadratic penalties of ``soft_weight`` (scaled units); the
    loan constraint stays exact.
``co-bump``
    pins stay exact, but a pinned bespoke tranche's target moves with the
    bump when the bumped index tranche has the same name. Loan-price bumps
    move no index tranche, so loan deltas equal the hard-mode ones.
"""

from __future__ import annotations

import io
import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .deal import DealQuotes, TranchePVMatrix
from .entropy import SolverSettings
from .exceptions import InfeasibleTarget, SolverError, ValidationError
from .pricing import BespokeSpec, CalibratedIndex, calibrate_index, map_bespoke

__all__ = [
    "BumpConfig",
    "RiskReport",
    "loan_price_delta",
    "tranche01",
    "quote_bump_recalibration",
]

MODES = ("hard", "soft", "co-bump")
SCHEMES = ("forward", "central")


@dataclass(frozen=True)
class BumpConfig:
    bump_size: float = 1.0
    scheme: str = "forward"
    constraint_mode: str = "hard"
    soft_weight: float = 30.0

    def __post_init__(self):
        if not self.bump_size > 0:
            raise ValidationError("bump_size must be > 0")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}")
        if self.constraint_mode not in MODES:
            raise ValidationError(f"constraint_mode must be one of {MODES}")
        if not self.soft_weight > 0:
            raise ValidationError("soft_weight must be > 0")

    @property
    def pin_weight(self) -> float | None:
        return self.soft_weight if self.constraint_mode == "soft" else None

    def to_dict(self) -> dict:
        d = {
            "bump_size": self.bump_size,
            "scheme": self.scheme,
            "constraint_mode": self.constraint_mode,
        }
        if self.constraint_mode == "soft":
            d["soft_weight"] = self.soft_weight
        return d


@dataclass
class RiskReport:
    config: BumpConfig
    deltas: dict[str, float] | None = None
    tranche01: np.ndarray | None = None
    bespoke_tranches: tuple[str, ...] = ()
    index_tranches: tuple[str, ...] = ()
    failures: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out: dict = {"config": self.config.to_dict()}
        if self.deltas is not None:
            out["deltas"] = dict(self.deltas)
        if self.tranche01 is not None:
            out["tranche01"] = {
                "rows": list(self.bespoke_tranches),
                "columns": list(self.index_tranches),
                "values": [[None if np.isnan(v) else float(v) for v in row] for row in self.tranche01],
            }
        if self.failures:
            out["failures"] = dict(self.failures)
        return out

    def tranche01_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bespoke", *self.index_tranches])
        for name, row in zip(self.bespoke_tranches, self.tranche01):
            w.writerow([name, *("" if np.isnan(v) else format(v, ".12g") for v in row)])
        return buf.getvalue()


def _pool_map(fn, items, n_jobs):
    if n_jobs is None or n_jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(fn, items))


def loan_price_delta(
    index: CalibratedIndex,
    bespoke: BespokeSpec,
    config: BumpConfig | None = None,
    settings: SolverSettings | None = None,
) -> dict[str, float]:
    """Bespoke tranche price change per point of bespoke average loan price.

    The index basis is held fixed, so the bump moves the bespoke loan target
    one-for-one.
    """
    config = config or BumpConfig()
    if bespoke.market_loan_price is None:
        raise ValidationError("loan-price delta needs a bespoke market_loan_price")
    h = config.bump_size
    mb = bespoke.market_loan_price

    def prices(m):
        return map_bespoke(index, bespoke.replace(market_loan_price=m), settings, pin_weight=config.pin_weight).prices

    up = prices(mb + h)
    if config.scheme == "forward":
        base = prices(mb)
        return {k: (up[k] - base[k]) / h for k in up}
    down = prices(mb - h)
    return {k: (up[k] - down[k]) / (2 * h) for k in up}


def quote_bump_recalibration(
    pv: TranchePVMatrix,
    quotes: DealQuotes,
    tranche: str,
    bump: float,
    settings: SolverSettings | None = None,
) -> CalibratedIndex:
    """Recalibrate the index with one quote shifted by ``bump`` points.

    ``tranche`` may be a tranche name or a rating label such as ``"AA"``.
    """
    name = quotes.resolve(tranche)
    new_price = quotes.prices[name] + bump
    if new_price < 0:
        resid = np.zeros(len(quotes.prices))
        resid[list(quotes.prices).index(name)] = -new_price
        raise InfeasibleTarget(
            f"bumped price of {name} is {new_price:g}; PVs are non-negative so no distribution reprices it",
            residuals=resid,
        )
    return calibrate_index(pv, quotes.with_price(name, new_price), settings)


def tranche01(
    pv: TranchePVMatrix,
    quotes: DealQuotes,
    bespoke: BespokeSpec,
    config: BumpConfig | None = None,
    settings: SolverSettings | None = None,
    *,
    n_jobs: int | None = None,
) -> RiskReport:
    """Sensitivity of each bespoke tranche to each index tranche quote.

    Entry ``(b, j)`` is the bespoke tranche ``b`` price change per point of
    index quote ``j``, after recalibrating the index (index market loan
    price fixed, so the basis moves) and remapping. Columns whose bumped
    recalibration fails are NaN and listed in ``failures``.
    """
    config = config or BumpConfig()
    index = calibrate_index(pv, quotes, settings)
    h = config.bump_size
    names = list(quotes.prices)
    pin_weight = config.pin_weight

    def bumped_prices(name, bump):
        idx = quote_bump_recalibration(pv, quotes, name, bump, settings)
        spec = bespoke
        if config.constraint_mode == "co-bump" and name in bespoke.pinned_tranches:
            pins = dict(bespoke.pinned_tranches)
            pins[name] += bump
            spec = bespoke.replace(pinned_tranches=pins)
        return map_bespoke(idx, spec, settings, pin_weight=pin_weight).prices

    def column(name):
        try:
            up = bumped_prices(name, h)
            if config.scheme == "forward":
                return {k: (up[k] - base[k]) / h for k in up}, None
            down = bumped_prices(name, -h)
            return {k: (up[k] - down[k]) / (2 * h) for k in up}, None
        except SolverError as exc:
            return None, f"{type(exc).__name__}: {exc}"

    base = map_bespoke(index, bespoke, settings, pin_weight=pin_weight).prices
    rows = bespoke.pv.tranche_names
    matrix = np.full((len(rows), len(names)), np.nan)
    failures = {}
    for j, (col, err) in enumerate(_pool_map(column, names, n_jobs)):
        if err is not None:
            failures[names[j]] = err
            continue
        matrix[:, j] = [col[r] for r in rows]
    return RiskReport(
        config=config,
        tranche01=matrix,
        bespoke_tranches=tuple(rows),
        index_tranches=tuple(names),
        failures=failures,
    )
