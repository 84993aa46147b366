"""Agreement between model rankings induced by different measures."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import kendalltau
from statsmodels.stats.multitest import multipletests

from .core_model import EXACT_TEST_UNAVAILABLE, Direction
from .errors import ConfigError, ValidationError

logger = logging.getLogger(__name__)

EQUIVALENCE_THRESHOLD = 0.9
TIE_TOLERANCE = 1e-12
EXACT_TEST_MIN_MODELS = 10
CORRECTIONS = ("fdr_bh", "bonferroni")


@dataclass(frozen=True)
class ModelRanking:
    """Models ordered best first under one measure, with tie groups."""

    measure: str
    direction: Direction
    models: Tuple[str, ...]
    scores: Tuple[float, ...]
    tie_groups: Tuple[Tuple[str, ...], ...]

    @property
    def group_of(self) -> Dict[str, int]:
        return {model: g for g, group in enumerate(self.tie_groups) for model in group}

    @property
    def is_single_tie(self) -> bool:
        return len(self.tie_groups) <= 1


@dataclass(frozen=True)
class TauResult:
    tau: float
    p_value: float
    undefined: bool = False


def rank_models(scores: Mapping[str, float], measure: str, direction: Direction) -> ModelRanking:
    """Order models by score, fairest or most relevant first.

    Models whose score is undefined are left out of the ranking. Consecutive
    scores within 1e-12 of the first member of their group share a tie group.
    """
    direction = Direction(direction)
    defined = {m: float(s) for m, s in scores.items() if s is not None and not math.isnan(float(s))}
    dropped = sorted(set(scores) - set(defined))
    if dropped:
        logger.warning("measure %s is undefined for models %s, leaving them out of the ranking", measure, dropped)
    sign = -1.0 if direction == Direction.HIGHER else 1.0
    models = sorted(defined, key=lambda m: (sign * defined[m], m))
    groups: List[List[str]] = []
    for model in models:
        if groups and abs(defined[model] - defined[groups[-1][0]]) <= TIE_TOLERANCE:
            groups[-1].append(model)
        else:
            groups.append([model])
    return ModelRanking(
        measure=measure,
        direction=direction,
        models=tuple(models),
        scores=tuple(defined[m] for m in models),
        tie_groups=tuple(tuple(g) for g in groups),
    )


def kendall_tau_b(a: ModelRanking, b: ModelRanking) -> TauResult:
    """Tie-aware Kendall tau-b between two best-first rankings.

    Each ranking is compared through its tie-group positions, so direction does
    not matter. Undefined (flagged) when either ranking is one tie group.
    """
    if set(a.models) != set(b.models):
        missing = sorted(set(a.models) ^ set(b.models))
        raise ValidationError(f"rankings {a.measure} and {b.measure} cover different models: {missing}")
    if a.is_single_tie or b.is_single_tie:
        logger.warning("tau between %s and %s is undefined, one ranking is a single tie group", a.measure, b.measure)
        return TauResult(math.nan, math.nan, undefined=True)
    models = sorted(a.models)
    ga, gb = a.group_of, b.group_of
    x = [ga[m] for m in models]
    y = [gb[m] for m in models]
    # Normal approximation with tie-adjusted variance at every size.
    tau, p_value = kendalltau(x, y, variant="b", method="asymptotic")
    return TauResult(float(tau), float(p_value))


def equivalence(tau: float, threshold: float = EQUIVALENCE_THRESHOLD) -> bool:
    """Two rankings are treated as equivalent when tau reaches the threshold."""
    if tau is None or math.isnan(tau):
        return False
    return bool(tau >= threshold - 1e-12)


def bh_correct(p_values: Sequence[float], alpha: float = 0.05, method: str = "fdr_bh") -> np.ndarray:
    """Significance flags in input order after BH step-up (or Bonferroni)."""
    if method not in CORRECTIONS:
        raise ConfigError(f"unknown correction {method!r}, expected one of {CORRECTIONS}")
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    p = np.asarray(p_values, dtype=float)
    if p.size == 0:
        return np.zeros(0, dtype=bool)
    if np.any(np.isnan(p)) or np.any((p < 0) | (p > 1)):
        raise ValidationError("p-values must lie in [0, 1]")
    reject, _, _, _ = multipletests(p, alpha=alpha, method=method)
    return np.asarray(reject, dtype=bool)


@dataclass(frozen=True, eq=False)
class AgreementMatrix:
    measures: Tuple[str, ...]
    tau: np.ndarray
    p_values: np.ndarray
    significant: np.ndarray
    n_models: int
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    def to_frame(self) -> pd.DataFrame:
        """Long format: one row per ordered measure pair."""
        rows = []
        for a, ma in enumerate(self.measures):
            for b, mb in enumerate(self.measures):
                rows.append(
                    {
                        "measure_a": ma,
                        "measure_b": mb,
                        "tau": self.tau[a, b],
                        "p_value": self.p_values[a, b],
                        "significant": bool(self.significant[a, b]),
                        "equivalent": equivalence(self.tau[a, b]),
                    }
                )
        return pd.DataFrame(rows)

    def tau_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.tau, index=list(self.measures), columns=list(self.measures))


def agreement_matrix(
    rankings: Sequence[ModelRanking], alpha: float = 0.05, method: str = "fdr_bh"
) -> AgreementMatrix:
    """Pairwise tau-b with BH-corrected significance over the off-diagonal cells."""
    if len(rankings) < 2:
        raise ConfigError("an agreement matrix needs at least two rankings")
    r = len(rankings)
    tau = np.full((r, r), np.nan)
    p = np.full((r, r), np.nan)
    for a in range(r):
        tau[a, a] = np.nan if rankings[a].is_single_tie else 1.0
        for b in range(a + 1, r):
            result = kendall_tau_b(rankings[a], rankings[b])
            tau[a, b] = tau[b, a] = result.tau
            p[a, b] = p[b, a] = result.p_value

    significant = np.zeros((r, r), dtype=bool)
    rows, cols = np.triu_indices(r, k=1)
    tested = ~np.isnan(p[rows, cols])
    if tested.any():
        flags = bh_correct(p[rows, cols][tested], alpha=alpha, method=method)
        significant[rows[tested], cols[tested]] = flags
        significant[cols[tested], rows[tested]] = flags

    n_models = len(rankings[0].models)
    warnings = []
    if n_models < EXACT_TEST_MIN_MODELS:
        logger.info("only %d models, tau p-values use the normal approximation", n_models)
        warnings.append(EXACT_TEST_UNAVAILABLE)
    return AgreementMatrix(
        measures=tuple(rk.measure for rk in rankings),
        tau=tau,
        p_values=p,
        significant=significant,
        n_models=n_models,
        warnings=tuple(warnings),
    )


def best_models(rankings: Sequence[ModelRanking]) -> pd.DataFrame:
    """The top tie group of every ranking."""
    rows = []
    for ranking in rankings:
        if not ranking.models:
            continue
        top = ranking.tie_groups[0]
        rows.append(
            {
                "measure": ranking.measure,
                "direction": ranking.direction.value,
                "best": ",".join(top),
                "score": ranking.scores[0],
                "ties": len(top),
            }
        )
    return pd.DataFrame(rows, columns=["measure", "direction", "best", "score", "ties"])
