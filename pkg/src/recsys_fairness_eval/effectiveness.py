"""Per-user effectiveness (HR, MRR, P, R, MAP, NDCG) over binary qrels."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Tuple

import numpy as np

from .core_model import Direction, Qrels, RunSet
from .errors import ConfigError, ValidationError

logger = logging.getLogger(__name__)

EFFECTIVENESS_MEASURES = ("HR", "MRR", "P", "R", "MAP", "NDCG")


@dataclass
class PerUserScores:
    measure: str
    scores: Dict[str, float]
    direction: Direction = Direction.HIGHER
    excluded: Tuple[str, ...] = ()
    missing: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def users(self) -> Tuple[str, ...]:
        return tuple(self.scores.keys())

    def values(self) -> np.ndarray:
        return np.array([self.scores[u] for u in self.scores], dtype=float)


def _hits(items: Tuple[str, ...], relevant: frozenset) -> np.ndarray:
    return np.array([1.0 if item in relevant else 0.0 for item in items])


def _hr(hits: np.ndarray, n_rel: int, k: int) -> float:
    return 1.0 if hits.any() else 0.0


def _mrr(hits: np.ndarray, n_rel: int, k: int) -> float:
    nz = np.flatnonzero(hits)
    return 1.0 / float(nz[0] + 1) if nz.size else 0.0


def _precision(hits: np.ndarray, n_rel: int, k: int) -> float:
    return float(hits.sum()) / k


def _recall(hits: np.ndarray, n_rel: int, k: int) -> float:
    return float(hits.sum()) / n_rel


def _average_precision(hits: np.ndarray, n_rel: int, k: int) -> float:
    if not hits.any():
        return 0.0
    ranks = np.arange(1, hits.size + 1)
    prec_at = np.cumsum(hits) / ranks
    return float((prec_at * hits).sum()) / min(n_rel, k)


def _ndcg(hits: np.ndarray, n_rel: int, k: int) -> float:
    if not hits.any():
        return 0.0
    dcg = float((hits / np.log2(np.arange(2, hits.size + 2))).sum())
    ideal = float((1.0 / np.log2(np.arange(2, min(n_rel, k) + 2))).sum())
    return dcg / ideal


_KERNELS: Dict[str, Callable[[np.ndarray, int, int], float]] = {
    "HR": _hr,
    "MRR": _mrr,
    "P": _precision,
    "R": _recall,
    "MAP": _average_precision,
    "NDCG": _ndcg,
}


def score_items(measure: str, items, relevant: frozenset, k: int) -> float:
    """Effectiveness of one top-k list against a relevant-item set; 0 when the set is empty."""
    measure = measure.upper()
    if measure not in _KERNELS:
        raise ConfigError(f"unknown effectiveness measure {measure!r}, expected one of {EFFECTIVENESS_MEASURES}")
    if not relevant:
        return 0.0
    return _KERNELS[measure](_hits(tuple(items)[:k], relevant), len(relevant), k)


def per_user_effectiveness(measure: str, run: RunSet, qrels: Qrels, k: int) -> PerUserScores:
    """Score every user in ``qrels`` with at least one relevant item.

    Users without relevant items are excluded; users present in qrels but absent
    from the run score 0 and are listed in ``missing``.
    """
    measure = measure.upper()
    if measure not in _KERNELS:
        raise ConfigError(f"unknown effectiveness measure {measure!r}, expected one of {EFFECTIVENESS_MEASURES}")
    if k < 1:
        raise ConfigError(f"cutoff k must be positive, got {k}")
    kernel = _KERNELS[measure]
    scores: Dict[str, float] = {}
    excluded = []
    missing = []
    for user in qrels.users:
        relevant = qrels.relevant(user)
        if not relevant:
            excluded.append(user)
            continue
        if user not in run.lists:
            missing.append(user)
            scores[user] = 0.0
            continue
        hits = _hits(run.items_of(user, k), relevant)
        scores[user] = kernel(hits, len(relevant), k)
    if not scores:
        raise ValidationError("no evaluable users: qrels hold no relevant items")
    if excluded:
        logger.debug("%s@%d: %d users without relevant items excluded", measure, k, len(excluded))
    if missing:
        logger.warning("%s@%d: %d users in qrels have no recommendation list, scored 0", measure, k, len(missing))
    return PerUserScores(measure, scores, excluded=tuple(excluded), missing=tuple(missing))


def mean_effectiveness(scores: PerUserScores) -> Tuple[float, int]:
    """Arithmetic mean over included users, with the included-user count."""
    if not scores.scores:
        raise ValidationError(f"{scores.measure}: cannot average an empty score map")
    values = scores.values()
    return float(values.mean()), int(values.size)


def evaluate_effectiveness(
    run: RunSet, qrels: Qrels, k: int, measures: Iterable[str] = EFFECTIVENESS_MEASURES
) -> Dict[str, float]:
    """Mean of each requested measure."""
    return {m: mean_effectiveness(per_user_effectiveness(m, run, qrels, k))[0] for m in measures}
