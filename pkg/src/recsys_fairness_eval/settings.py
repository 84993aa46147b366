"""Run configuration: measure parameters, evaluation config and scenario specs.

Config files are JSON or YAML. Values given on the command line override the
file; the canonical JSON of the merged config is hashed into every report.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, field_validator, model_validator

from .errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_SEED = 42


class MeasureParams(BaseModel):
    """Per-measure parameters, validated against each measure's domain."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    gamma_exposure: float = Field(0.8, gt=0, lt=1, description="patience for II-D/AI-D and II-F/AI-F")
    gamma_hd: float = Field(0.9, gt=0, lt=1, description="RBP patience for HD")
    vocd_alpha: float = Field(2.0, gt=0)
    vocd_beta: float = Field(0.0, ge=0)
    atkinson_epsilon: float = Field(0.5, ge=0)
    peu_epsilon: float = Field(0.05, ge=0)
    log_base: Optional[float] = Field(None, gt=0)
    thresholds: Tuple[float, float] = (1.1, 0.9)
    gce: Tuple[float, float, float] = (2.0, 0.95, 1e-4)
    uf_gamma: float = Field(0.8, ge=0, le=1)
    uf_threshold: Optional[float] = None
    similarity: Literal["cosine", "jaccard", "uf"] = "jaccard"

    @field_validator("log_base")
    @classmethod
    def _log_base(cls, v):
        if v is not None and v == 1:
            raise ValueError("log base must differ from 1")
        return v

    @field_validator("thresholds")
    @classmethod
    def _thresholds(cls, v):
        best, worst = v
        if not (best > 1 and 0 < worst < 1):
            raise ValueError("IBO/IWO thresholds need best > 1 and 0 < worst < 1")
        return v

    @field_validator("gce")
    @classmethod
    def _gce(cls, v):
        b, lam, c = v
        if b in (0, 1) or not 0 < lam <= 1 or c <= 0:
            raise ValueError("GCE needs B not in {0, 1}, 0 < lambda <= 1 and c > 0")
        return v


class EvalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k: int = Field(10, ge=1)
    rerank_depth: int = Field(25, ge=1, description="k'")
    rounds: int = Field(1, ge=1, description="W")
    variants: List[Literal["original", "corrected"]] = ["original", "corrected"]
    exposure_measures: List[str] = ["Jain", "QF", "Ent", "Gini", "Gini-w", "FSat", "II-D", "AI-D"]
    joint_measures: bool = True
    effectiveness_measures: List[str] = ["HR", "MRR", "P", "R", "MAP", "NDCG"]
    user_measures: bool = True
    group_attributes: Optional[List[str]] = None
    params: MeasureParams = MeasureParams()
    exclude_single_relevant: bool = False
    run: List[str] = []
    qrels: Optional[str] = None
    interactions: Optional[str] = None
    catalog: Optional[str] = None
    groups: Optional[str] = None
    similarity: Optional[str] = None
    seed: int = DEFAULT_SEED
    output_format: Literal["json", "csv", "both"] = "json"

    @model_validator(mode="after")
    def _depth(self):
        if self.rerank_depth < self.k:
            raise ValueError(f"rerank depth k'={self.rerank_depth} must be at least k={self.k}")
        return self


class ScenarioSpec(BaseModel):
    """A synthetic scenario; the seed is one of its fields."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    scenario: Literal[
        "most_fair", "most_unfair", "insert_le_relevant", "vary_relevance", "sample_similarity", "model_suite"
    ]
    m: int = Field(100, ge=1)
    n: Optional[int] = Field(None, ge=1)
    k: int = Field(10, ge=1)
    mode: Literal["repeatable", "nonrepeatable"] = "repeatable"
    fraction: float = Field(0.0, ge=0, le=1)
    distribution: Literal["weibull", "normal"] = "weibull"
    shape: float = Field(1.0, gt=0)
    size: int = Field(8, ge=2)
    seed: int = DEFAULT_SEED


class RerankSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    method: Literal["combmnz", "borda", "greedy_substitution"] = "greedy_substitution"
    k: int = Field(10, ge=1)
    depth: int = Field(25, ge=1)
    beta: float = Field(0.05, gt=0, le=0.5)
    cap: float = Field(0.25, ge=0, le=1)


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in (".yaml", ".yml"):
        data = yaml.safe_load(text) or {}
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return data


def _merge(base: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = _merge(dict(out[key]), value)
        else:
            out[key] = value
    return out


def build_model(model, path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None):
    """Validate file values merged with overrides into ``model``; ``None`` overrides are ignored."""
    data = read_config_file(path) if path else {}
    data = _merge(data, overrides or {})
    try:
        return model.model_validate(data)
    except PydanticValidationError as e:
        raise ConfigError(str(e)) from e


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None) -> EvalConfig:
    config = build_model(EvalConfig, path, overrides)
    logger.debug("config hash %s", config_hash(config))
    return config


def canonical_json(config: BaseModel) -> str:
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def config_hash(config: BaseModel) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()
