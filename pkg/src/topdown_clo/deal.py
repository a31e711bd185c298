"""Scenarios, tranche PV matrices and deal quotes, with CSV ingestion.

Files carry rates in percent and prices in points (percent of notional);
in memory rates are fractions and prices stay in points.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .exceptions import ValidationError

__all__ = [
    "Scenario",
    "ScenarioSet",
    "TranchePVMatrix",
    "DealQuotes",
    "load_scenarios",
    "load_pv_matrix",
    "load_quotes",
    "write_scenarios",
    "write_pv_matrix",
    "write_quotes",
    "validate_quotes",
]

COLLATERAL_COLUMN = "COL"
_KEY_DECIMALS = 9


def _fmt(x: float) -> str:
    # 15 significant digits survive a float round trip for decimal input
    return format(float(x), ".15g")


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.flags.writeable = False
    return arr


def _key(pct: float) -> float:
    return round(float(pct), _KEY_DECIMALS)


@dataclass(frozen=True)
class Scenario:
    """One loan-market state: constant annual default, prepay and recovery rates."""

    id: int
    cadr: float
    capr: float
    crr: float

    def __post_init__(self):
        for name in ("cadr", "capr", "crr"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0.0 or v > 1.0:
                raise ValidationError(f"scenario {self.id}: {name}={v!r} outside [0, 1]")

    @property
    def key(self) -> float:
        """CADR in percent; the scenario key used by PV files."""
        return _key(self.cadr * 100.0)


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[Scenario, ...]

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        if not self.scenarios:
            raise ValidationError("scenario set is empty")
        ids = [s.id for s in self.scenarios]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise ValidationError("scenario ids must be strictly increasing")

    @classmethod
    def from_percent(cls, rows: Iterable[Sequence[float]]) -> "ScenarioSet":
        """Build from ``(cadr, capr, crr)`` rows given in percent."""
        return cls(
            tuple(
                Scenario(i, r[0] / 100.0, r[1] / 100.0, r[2] / 100.0)
                for i, r in enumerate(rows)
            )
        )

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self) -> Iterator[Scenario]:
        return iter(self.scenarios)

    def __getitem__(self, i: int) -> Scenario:
        return self.scenarios[i]

    @property
    def ids(self) -> np.ndarray:
        return np.array([s.id for s in self.scenarios], dtype=int)

    @property
    def cadr(self) -> np.ndarray:
        return np.array([s.cadr for s in self.scenarios])

    @property
    def capr(self) -> np.ndarray:
        return np.array([s.capr for s in self.scenarios])

    @property
    def crr(self) -> np.ndarray:
        return np.array([s.crr for s in self.scenarios])

    @property
    def keys(self) -> list[float]:
        return [s.key for s in self.scenarios]


@dataclass(frozen=True, eq=False)
class TranchePVMatrix:
    """Per-scenario tranche PVs (points) plus the collateral price column.

    Rows follow the order of ``scenarios``; columns follow ``tranche_names``.
    """

    scenarios: ScenarioSet
    tranche_names: tuple[str, ...]
    values: np.ndarray
    collateral: np.ndarray

    def __post_init__(self):
        names = tuple(str(n) for n in self.tranche_names)
        object.__setattr__(self, "tranche_names", names)
        values = _frozen(self.values)
        collateral = _frozen(self.collateral)
        n = len(self.scenarios)
        if values.ndim != 2 or values.shape != (n, len(names)):
            raise ValidationError(
                f"PV values have shape {values.shape}, expected ({n}, {len(names)})"
            )
        if collateral.shape != (n,):
            raise ValidationError(f"collateral column has shape {collateral.shape}, expected ({n},)")
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate tranche names in {names}")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(collateral))):
            raise ValidationError("PV matrix contains non-finite values")
        if np.any(values < 0) or np.any(collateral < 0):
            raise ValidationError("PV matrix contains negative values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "collateral", collateral)

    @property
    def scenario_ids(self) -> np.ndarray:
        return self.scenarios.ids

    @property
    def n_scenarios(self) -> int:
        return len(self.scenarios)

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.tranche_names.index(name)
        except ValueError:
            raise ValidationError(f"no tranche {name!r} in PV matrix {self.tranche_names}") from None
        return self.values[:, j]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TranchePVMatrix):
            return NotImplemented
        return (
            self.scenarios == other.scenarios
            and self.tranche_names == other.tranche_names
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.collateral, other.collateral)
        )

    __hash__ = None


@dataclass(frozen=True)
class DealQuotes:
    """Observed tranche prices (points) plus informational deal metadata.

    ``tranche_info`` keeps every listed tranche, quoted or not, with its
    extra columns (coupon, notional, rating, ...). Pricing never reads it
    except to resolve a rating label such as ``"AA"`` to a tranche name.
    """

    prices: Mapping[str, float]
    market_loan_price: float | None = None
    metadata: Mapping[str, str] = field(default_factory=dict)
    tranche_info: Mapping[str, Mapping[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        prices = {str(k): float(v) for k, v in self.prices.items()}
        if not prices:
            raise ValidationError("no tranche prices")
        for name, v in prices.items():
            if not np.isfinite(v) or v < 0:
                raise ValidationError(f"tranche {name}: price {v!r} must be finite and >= 0")
        object.__setattr__(self, "prices", prices)
        if self.market_loan_price is not None:
            mlp = float(self.market_loan_price)
            if not np.isfinite(mlp):
                raise ValidationError("market_loan_price must be finite")
            object.__setattr__(self, "market_loan_price", mlp)
        object.__setattr__(self, "metadata", dict(self.metadata))
        object.__setattr__(
            self, "tranche_info", {k: dict(v) for k, v in self.tranche_info.items()}
        )

    @property
    def tranche_names(self) -> tuple[str, ...]:
        return tuple(self.prices)

    def resolve(self, label: str) -> str:
        """Map a tranche name or a rating (e.g. ``"AA"``) to a quoted tranche name."""
        if label in self.prices:
            return label
        hits = [n for n, info in self.tranche_info.items() if info.get("rating") == label]
        if len(hits) == 1 and hits[0] in self.prices:
            return hits[0]
        raise ValidationError(f"{label!r} is neither a quoted tranche nor a unique rating")

    def with_price(self, name: str, price: float) -> "DealQuotes":
        prices = dict(self.prices)
        prices[name] = price
        return DealQuotes(prices, self.market_loan_price, self.metadata, self.tranche_info)


def validate_quotes(quotes: DealQuotes, pv: TranchePVMatrix) -> None:
    missing = [n for n in quotes.prices if n not in pv.tranche_names]
    if missing:
        raise ValidationError(f"quoted tranches without a PV column: {missing}")


def _read_rows(path) -> list[tuple[int, list[str]]]:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"{p}: no such file")
    with open(p, newline="", encoding="utf-8") as fh:
        rows = [
            (i, [c.strip() for c in row])
            for i, row in enumerate(csv.reader(fh), start=1)
            if row and any(c.strip() for c in row)
        ]
    if not rows:
        raise ValidationError(f"{p}: empty file")
    return rows


def _number(text: str, where: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ValidationError(f"{where}: {text!r} is not a number") from None
    if not np.isfinite(v):
        raise ValidationError(f"{where}: non-finite value {text!r}")
    return v


def load_scenarios(path) -> ScenarioSet:
    """Read a ``cadr,capr,crr`` CSV in percent; ids follow row order."""
    rows = _read_rows(path)
    header = [h.lower() for h in rows[0][1]]
    if header != ["cadr", "capr", "crr"]:
        raise ValidationError(f"{path}: header must be cadr,capr,crr, got {rows[0][1]}")
    if len(rows) == 1:
        raise ValidationError(f"{path}: no scenarios")
    out = []
    for i, (lineno, row) in enumerate(rows[1:]):
        where = f"{path}:{lineno}"
        if len(row) != 3:
            raise ValidationError(f"{where}: expected 3 fields, got {len(row)}")
        vals = [_number(c, where) for c in row]
        for v in vals:
            if v < 0 or v > 100:
                raise ValidationError(f"{where}: {v} outside [0, 100] percent")
        out.append(Scenario(i, vals[0] / 100.0, vals[1] / 100.0, vals[2] / 100.0))
    return ScenarioSet(tuple(out))


def load_pv_matrix(path, scenarios: ScenarioSet) -> TranchePVMatrix:
    """Read a PV table keyed by CADR percent and align it to ``scenarios``.

    The last column must be ``COL``; rows may come in any order.
    """
    rows = _read_rows(path)
    header = rows[0][1]
    if len(header) < 3 or header[-1].upper() != COLLATERAL_COLUMN:
        raise ValidationError(f"{path}: header must be key, tranche columns..., COL")
    names = header[1:-1]
    if len(set(names)) != len(names):
        raise ValidationError(f"{path}: duplicate tranche names {names}")
    by_key: dict[float, list[float]] = {}
    for lineno, row in rows[1:]:
        where = f"{path}:{lineno}"
        if len(row) != len(header):
            raise ValidationError(f"{where}: expected {len(header)} fields, got {len(row)}")
        key = _key(_number(row[0], where))
        vals = [_number(c, where) for c in row[1:]]
        if any(v < 0 for v in vals):
            raise ValidationError(f"{where}: negative PV")
        if key in by_key:
            raise ValidationError(f"{where}: duplicate scenario key {key:g}")
        by_key[key] = vals
    wanted = scenarios.keys
    if len(set(wanted)) != len(wanted):
        raise ValidationError("scenario set has duplicate CADR keys; PV files cannot be aligned")
    missing = [k for k in wanted if k not in by_key]
    extra = sorted(set(by_key) - set(wanted))
    if missing or extra:
        raise ValidationError(
            f"{path}: misaligned scenario keys (missing {missing}, unexpected {extra})"
        )
    table = np.array([by_key[k] for k in wanted])
    return TranchePVMatrix(scenarios, tuple(names), table[:, :-1], table[:, -1])


def load_quotes(path) -> DealQuotes:
    """Read a quotes CSV.

    Optional ``key,value`` metadata lines precede a header row starting with
    ``tranche,price``. Further header columns are kept as tranche metadata.
    A blank price lists the tranche without quoting it.
    """
    rows = _read_rows(path)
    metadata: dict[str, str] = {}
    header_at = None
    for idx, (lineno, row) in enumerate(rows):
        if row[0].lower() == "tranche":
            header_at = idx
            break
        if len(row) < 2 or len(row) > 2 and any(row[2:]):
            raise ValidationError(f"{path}:{lineno}: metadata lines must be key,value")
        if row[0] in metadata:
            raise ValidationError(f"{path}:{lineno}: duplicate metadata key {row[0]!r}")
        metadata[row[0]] = row[1]
    if header_at is None:
        raise ValidationError(f"{path}: missing 'tranche,price' header")
    header = rows[header_at][1]
    if len(header) < 2 or header[1].lower() != "price":
        raise ValidationError(f"{path}: second header column must be 'price'")
    extra_cols = header[2:]

    market_loan_price = None
    if "market_loan_price" in metadata:
        market_loan_price = _number(metadata.pop("market_loan_price"), f"{path}: market_loan_price")

    prices: dict[str, float] = {}
    info: dict[str, dict[str, str]] = {}
    for lineno, row in rows[header_at + 1 :]:
        where = f"{path}:{lineno}"
        if len(row) > len(header):
            raise ValidationError(f"{where}: too many fields")
        row = row + [""] * (len(header) - len(row))
        name = row[0]
        if not name:
            raise ValidationError(f"{where}: empty tranche name")
        if name in info:
            raise ValidationError(f"{where}: duplicate tranche {name!r}")
        info[name] = dict(zip(extra_cols, row[2:]))
        if row[1] != "":
            price = _number(row[1], where)
            if price < 0:
                raise ValidationError(f"{where}: negative price {price}")
            prices[name] = price
    if not prices:
        raise ValidationError(f"{path}: no tranche prices")
    return DealQuotes(prices, market_loan_price, metadata, info)


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    try:
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def _csv_text(rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def write_scenarios(scenarios: ScenarioSet, path) -> None:
    rows = [["cadr", "capr", "crr"]]
    rows += [[_fmt(s.cadr * 100), _fmt(s.capr * 100), _fmt(s.crr * 100)] for s in scenarios]
    _atomic_write(path, _csv_text(rows))


def pv_matrix_csv(pv: TranchePVMatrix) -> str:
    rows = [["cadr", *pv.tranche_names, COLLATERAL_COLUMN]]
    for s, vals, col in zip(pv.scenarios, pv.values, pv.collateral):
        rows.append([_fmt(s.key), *(_fmt(v) for v in vals), _fmt(col)])
    return _csv_text(rows)


def write_pv_matrix(pv: TranchePVMatrix, path) -> None:
    _atomic_write(path, pv_matrix_csv(pv))


def write_quotes(quotes: DealQuotes, path) -> None:
    rows: list[list[str]] = []
    if quotes.market_loan_price is not None:
        rows.append(["market_loan_price", _fmt(quotes.market_loan_price)])
    rows += [[k, v] for k, v in quotes.metadata.items()]
    extra: list[str] = []
    for info in quotes.tranche_info.values():
        extra += [c for c in info if c not in extra]
    rows.append(["tranche", "price", *extra])
    names = list(quotes.tranche_info) + [n for n in quotes.prices if n not in quotes.tranche_info]
    for name in names:
        price = quotes.prices.get(name)
        info = quotes.tranche_info.get(name, {})
        rows.append([name, "" if price is None else _fmt(price), *(info.get(c, "") for c in extra)])
    _atomic_write(path, _csv_text(rows))
