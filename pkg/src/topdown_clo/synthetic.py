"""Synthetic index tranches priced off the aggregated portfolio loss.

Tranches are funded notes on a unit portfolio. Losses write tranches down
from the bottom of the capital structure; recoveries and prepayments
amortise them from the top. Each note pays the riskless rate plus its
spread (continuously compounded) on outstanding notional, and the whole
scenario grid produces a PV matrix in the same shape as the cash deal
tables.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .deal import Scenario, ScenarioSet, TranchePVMatrix
from .exceptions import ValidationError

__all__ = [
    "SyntheticTranche",
    "SyntheticDealSpec",
    "LossPath",
    "loss_path",
    "tranche_writedowns",
    "synth_tranche_pv",
    "build_pv_matrix",
    "load_synthetic_spec",
]


@dataclass(frozen=True)
class SyntheticTranche:
    name: str
    attachment: float
    detachment: float
    coupon_spread: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.attachment < self.detachment <= 1.0):
            raise ValidationError(
                f"tranche {self.name}: need 0 <= attachment < detachment <= 1, "
                f"got [{self.attachment}, {self.detachment}]"
            )

    @property
    def width(self) -> float:
        return self.detachment - self.attachment


@dataclass(frozen=True)
class SyntheticDealSpec:
    tranches: tuple[SyntheticTranche, ...]
    maturity: float = 5.0
    payment_frequency: int = 4
    portfolio_spread: float = 0.0
    discount_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "tranches", tuple(self.tranches))
        if not self.tranches:
            raise ValidationError("no tranches")
        names = [t.name for t in self.tranches]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate tranche names {names}")
        if not self.maturity > 0:
            raise ValidationError("maturity must be > 0")
        if self.payment_frequency < 1:
            raise ValidationError("payment_frequency must be >= 1")

    @property
    def tiles(self) -> bool:
        """True when the tranches cover [0, 1] exactly, without overlap."""
        edges = sorted((t.attachment, t.detachment) for t in self.tranches)
        if edges[0][0] != 0.0 or edges[-1][1] != 1.0:
            return False
        return all(np.isclose(a[1], b[0], rtol=0, atol=1e-15) for a, b in zip(edges, edges[1:]))

    @property
    def default_periods(self) -> int:
        return max(1, int(round(self.maturity * self.payment_frequency)))


@dataclass(frozen=True)
class LossPath:
    """Portfolio state at the start (index 0) and end of each period."""

    times: np.ndarray
    outstanding: np.ndarray
    cumulative_loss: np.ndarray
    cumulative_recovered: np.ndarray


def loss_path(scenario: Scenario, maturity: float, periods: int) -> LossPath:
    if periods < 1:
        raise ValidationError("periods must be >= 1")
    dt = maturity / periods
    d = 1.0 - (1.0 - scenario.cadr) ** dt
    p = 1.0 - (1.0 - scenario.capr) ** dt
    if d + p > 1.0:
        raise ValidationError(
            f"default {d:.4f} + prepay {p:.4f} exceed the outstanding notional in one period; "
            "use more periods"
        )
    outstanding = (1.0 - d - p) ** np.arange(periods + 1)
    start = outstanding[:-1]
    loss = np.concatenate([[0.0], np.cumsum(start * d * (1.0 - scenario.crr))])
    recovered = np.concatenate([[0.0], np.cumsum(start * (d * scenario.crr + p))])
    return LossPath(np.arange(periods + 1) * dt, outstanding, loss, recovered)


def _clip(x, lo, hi):
    return np.minimum(np.maximum(x, lo), hi)


def tranche_writedowns(spec: SyntheticDealSpec, path: LossPath) -> np.ndarray:
    """Cumulative write-downs, shape (periods + 1, n_tranches), as portfolio fractions."""
    L = path.cumulative_loss[:, None]
    a = np.array([t.attachment for t in spec.tranches])
    w = np.array([t.width for t in spec.tranches])
    return _clip(L - a, 0.0, w)


def _tranche_amortisation(spec: SyntheticDealSpec, path: LossPath) -> np.ndarray:
    R = path.cumulative_recovered[:, None]
    d = np.array([t.detachment for t in spec.tranches])
    w = np.array([t.width for t in spec.tranches])
    return _clip(R - (1.0 - d), 0.0, w)


def _note_pv(outstanding, retired, written_down, times, rate, spread):
    """PV of funded notes with defaults and prepayments at mid-period.

    Survivors are paid their coupon at period end. Notional retired or
    written down during a period receives accrued interest to mid-period;
    retired notional is also repaid then. Arrays are (periods + 1, k).
    """
    dt = times[1] - times[0]
    df_end = np.exp(-rate * times[1:])
    df_mid = np.exp(-rate * (times[1:] - 0.5 * dt))
    full = np.expm1((rate + spread) * dt)
    half = np.expm1((rate + spread) * 0.5 * dt)
    d_ret = np.diff(retired, axis=0)
    d_wd = np.diff(written_down, axis=0)
    pv = df_end @ (outstanding[1:] * full)
    pv = pv + df_mid @ (d_ret * (1.0 + half) + d_wd * half)
    return pv + np.exp(-rate * times[-1]) * outstanding[-1]


def synth_tranche_pv(spec: SyntheticDealSpec, scenario: Scenario, periods: int | None = None):
    """Tranche prices and collateral price (points) under one scenario.

    Returns ``(prices, collateral)`` with ``prices`` keyed by tranche name.
    """
    periods = spec.default_periods if periods is None else periods
    path = loss_path(scenario, spec.maturity, periods)
    r = spec.discount_rate

    width = np.array([t.width for t in spec.tranches])
    spreads = np.array([t.coupon_spread for t in spec.tranches])
    amort = _tranche_amortisation(spec, path)
    wd = tranche_writedowns(spec, path)
    pv = _note_pv(width - wd - amort, amort, wd, path.times, r, spreads)
    prices = {t.name: float(100.0 * v / t.width) for t, v in zip(spec.tranches, pv)}

    # the whole pool is one note: recoveries and prepayments retire it
    col = _note_pv(
        path.outstanding[:, None],
        path.cumulative_recovered[:, None],
        path.cumulative_loss[:, None],
        path.times,
        r,
        np.array([spec.portfolio_spread]),
    )
    return prices, float(100.0 * col[0])


def build_pv_matrix(spec: SyntheticDealSpec, scenarios: ScenarioSet, periods: int | None = None) -> TranchePVMatrix:
    rows, cols = [], []
    for s in scenarios:
        prices, col = synth_tranche_pv(spec, s, periods)
        rows.append([prices[t.name] for t in spec.tranches])
        cols.append(col)
    return TranchePVMatrix(scenarios, tuple(t.name for t in spec.tranches), np.array(rows), np.array(cols))


def load_synthetic_spec(path) -> SyntheticDealSpec:
    """Read an INI file with a ``[deal]`` section and ``[tranche:NAME]`` sections."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"{path}: no such file")
    cp = configparser.ConfigParser()
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if "deal" not in cp:
        raise ValidationError(f"{path}: missing [deal] section")

    def num(section, key, default=None, kind=float):
        if key not in cp[section]:
            if default is None:
                raise ValidationError(f"{path}: [{section}] missing {key}")
            return default
        try:
            return kind(cp[section][key])
        except ValueError:
            raise ValidationError(f"{path}: [{section}] {key} is not a number") from None

    tranches = []
    for section in cp.sections():
        if section.startswith("tranche:"):
            tranches.append(
                SyntheticTranche(
                    section.split(":", 1)[1].strip(),
                    num(section, "attachment"),
                    num(section, "detachment"),
                    num(section, "coupon_spread", 0.0),
                )
            )
    return SyntheticDealSpec(
        tuple(tranches),
        maturity=num("deal", "maturity"),
        payment_frequency=num("deal", "payment_frequency", 4, int),
        portfolio_spread=num("deal", "portfolio_spread", 0.0),
        discount_rate=num("deal", "discount_rate", 0.0),
    )
