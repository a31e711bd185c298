"""JSON run reports and MISD CSV output."""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .deal import ScenarioSet, _atomic_write, _csv_text
from .entropy import MISD
from .exceptions import ValidationError
from .pricing import IndexSnapshot

SIG_DIGITS = 12


def _num(x: float):
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(format(x, f".{SIG_DIGITS}g"))


def clean(obj: Any):
    """Recursively round floats to 12 significant digits for serialization."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


def dumps(report: dict) -> str:
    return json.dumps(clean(report), indent=2) + "\n"


def scenarios_block(scenarios: ScenarioSet) -> list[dict]:
    return [{"id": s.id, "cadr": s.cadr, "capr": s.capr, "crr": s.crr} for s in scenarios]


def misd_block(misd: MISD, scenarios: ScenarioSet) -> dict:
    return {"cadr_key": scenarios.keys, "weight": list(misd.weights)}


def misd_csv(misd: MISD, scenarios: ScenarioSet) -> str:
    rows = [["cadr_key", "weight"]]
    rows += [[format(k, "g"), format(w, f".{SIG_DIGITS}g")] for k, w in zip(scenarios.keys, misd.weights)]
    return _csv_text(rows)


def write_outputs(files: dict) -> None:
    """Write ``{path: text}``; call only after every result is computed."""
    for path, text in files.items():
        _atomic_write(path, text)


def load_index_snapshot(path) -> IndexSnapshot:
    """Restore the index MISD, scenario grid and basis from a calibrate report."""
    try:
        with open(path, encoding="utf-8") as fh:
            rep = json.load(fh)
        scen = ScenarioSet.from_percent(
            (s["cadr"] * 100, s["capr"] * 100, s["crr"] * 100) for s in rep["scenarios"]
        )
        w = np.array(rep["misd"]["weight"], dtype=float)
        basis = rep.get("basis")
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: not a usable index report ({exc})") from None
    if w.shape != (len(scen),) or np.any(w < 0) or not w.sum() > 0:
        raise ValidationError(f"{path}: MISD weights do not match the scenario grid")
    # weights were rounded to 12 digits on the way out
    return IndexSnapshot(MISD(w / w.sum()), scen, basis)
