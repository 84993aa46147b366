"""Measure reports: canonical JSON plus flat and long-format CSV."""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd

from . import __version__
from .core_model import UNDEFINED, MeasureResult
from .synth_scenarios import PRNG

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 12


def round_sig(value: float, digits: int = SIGNIFICANT_DIGITS) -> float:
    if value == 0 or not math.isfinite(value):
        return value
    return float(f"{value:.{digits}g}")


def to_jsonable(value: Any) -> Any:
    """Floats to 12 significant digits, NaN/inf to null, numpy scalars and arrays to Python."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if not math.isfinite(value) else round_sig(value)
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


@dataclass
class MeasureReport:
    """Every score of one evaluation, traceable to (measure, variant, params)."""

    dataset: str
    run: str
    config_hash: str
    results: List[MeasureResult] = field(default_factory=list)
    effectiveness: Dict[str, float] = field(default_factory=dict)
    id_maps: Dict[str, List[str]] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)
    version: str = __version__
    prng: str = PRNG

    def add(self, results: Iterable[MeasureResult]) -> "MeasureReport":
        for res in results:
            if res.score is not None and isinstance(res.score, float) and math.isnan(res.score):
                res.warnings.setdefault(UNDEFINED, True)
            self.results.append(res)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return to_jsonable(
            {
                "dataset": self.dataset,
                "run": self.run,
                "tool_version": self.version,
                "config_hash": self.config_hash,
                "prng": self.prng,
                "threads": os.environ.get("RFE_THREADS"),
                "effectiveness": dict(sorted(self.effectiveness.items())),
                "measures": [r.to_dict() for r in self.results],
                "id_maps": self.id_maps,
                **self.extra,
            }
        )

    def to_frame(self) -> pd.DataFrame:
        """One row per measure and variant."""
        rows = []
        for r in self.results:
            rows.append(
                {
                    "measure": r.measure,
                    "variant": r.variant,
                    "score": to_jsonable(r.score),
                    "direction": r.direction.value,
                    "params": json.dumps(to_jsonable(r.params), sort_keys=True),
                    "warnings": ";".join(
                        code if v is True else f"{code}={to_jsonable(v)}" for code, v in sorted(r.warnings.items())
                    ),
                }
            )
        for name, score in sorted(self.effectiveness.items()):
            rows.append({"measure": name, "variant": "mean", "score": to_jsonable(score), "direction": "higher", "params": "{}", "warnings": ""})
        return pd.DataFrame(rows, columns=["measure", "variant", "score", "direction", "params", "warnings"])

    @property
    def warning_codes(self) -> Dict[str, List[str]]:
        out: Dict[str, List[str]] = {}
        for r in self.results:
            for code in r.warnings:
                out.setdefault(code, []).append(f"{r.measure}/{r.variant}")
        return out


class ReportWriter:
    """Single sink for every artifact written by one command."""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written: Dict[str, str] = {}

    def _path(self, name: str) -> Path:
        return self.out_dir / name

    def json(self, name: str, payload: Any) -> Path:
        path = self._path(name)
        text = json.dumps(to_jsonable(payload), sort_keys=True, indent=2, allow_nan=False)
        path.write_text(text + "\n", encoding="utf-8")
        self.written[name] = str(path)
        logger.info("wrote %s", path)
        return path

    def csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self._path(name)
        frame.to_csv(path, index=False, float_format=f"%.{SIGNIFICANT_DIGITS}g")
        self.written[name] = str(path)
        logger.info("wrote %s", path)
        return path

    def report(self, report: MeasureReport, fmt: str = "json", stem: str = "report") -> Dict[str, str]:
        files = {}
        if fmt in ("json", "both"):
            files["json"] = str(self.json(f"{stem}.json", report.to_dict()))
        if fmt in ("csv", "both"):
            files["csv"] = str(self.csv(f"{stem}.csv", report.to_frame()))
        return files


def load_report(path: Union[str, Path]) -> Dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def report_scores(report: Dict[str, Any], variant: Optional[str] = None) -> Dict[str, float]:
    """``measure`` or ``measure/variant`` -> score from a loaded JSON report."""
    scores: Dict[str, float] = {}
    for entry in report.get("measures", []):
        if variant is not None and entry["variant"] != variant:
            continue
        key = entry["measure"] if variant is not None else f"{entry['measure']}/{entry['variant']}"
        scores[key] = math.nan if entry["score"] is None else float(entry["score"])
    for name, score in report.get("effectiveness", {}).items():
        scores[name] = math.nan if score is None else float(score)
    return scores
