"""Fair re-rankers over a deeper candidate list (top-k' per user).

``combmnz`` and ``borda`` fuse a relevance ranking with an exposure-fairness
ranking; ``greedy_substitution`` swaps over-exposed items for under-exposed ones
at the smallest loss of predicted relevance.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .core_model import RunSet
from .errors import ConfigError, UndefinedMeasureError

logger = logging.getLogger(__name__)

METHODS = ("combmnz", "borda", "greedy_substitution")


@dataclass(frozen=True)
class RerankResult:
    run: RunSet
    method: str
    swaps: int = 0
    skipped: int = 0


def _check_depth(run: RunSet, k: int, depth: int) -> None:
    if depth < k:
        raise ConfigError(f"re-rank depth k'={depth} must be at least k={k}")
    if k < 1:
        raise ConfigError(f"cutoff k must be positive, got {k}")


def _require_scores(run: RunSet, method: str) -> None:
    if run.scores is None:
        raise UndefinedMeasureError(f"{method} needs predicted scores for every user")
    for user, items in run.lists.items():
        scores = run.scores_of(user)
        if scores is None or len(scores) != len(items):
            raise UndefinedMeasureError(f"{method} needs a predicted score for every candidate of user {user}")


def coverage(run: RunSet, k: int) -> Counter:
    """How many users have each item in their top k."""
    return Counter(item for user in run.users for item in run.items_of(user, k))


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values, dtype=float)
    return (values - lo) / (hi - lo)


def _fairness_order(items: Sequence[str], cov: Counter) -> List[str]:
    # Least covered first; ties keep the original rank.
    return [items[j] for j in sorted(range(len(items)), key=lambda j: (cov[items[j]], j))]


def _emit(lists: Dict[str, Tuple[str, ...]], fused: Dict[str, Tuple[float, ...]], k: int) -> RunSet:
    return RunSet({u: items[:k] for u, items in lists.items()}, scores={u: s[:k] for u, s in fused.items()})


def combmnz(run: RunSet, k: int = 10, depth: int = 25) -> RerankResult:
    """CombMNZ fusion of normalised predicted relevance and (1 - normalised coverage).

    The sum is multiplied by the number of the two rankings that place the item
    inside their top k.
    """
    _check_depth(run, k, depth)
    _require_scores(run, "CombMNZ")
    cov = coverage(run, k)
    lists, fused = {}, {}
    for user in run.users:
        items = run.items_of(user, depth)
        rel = _minmax(np.asarray(run.scores_of(user)[: len(items)], dtype=float))
        fair = 1.0 - _minmax(np.asarray([cov[i] for i in items], dtype=float))
        fair_top = set(_fairness_order(items, cov)[:k])
        relevance_order = sorted(range(len(items)), key=lambda j: (-rel[j], j))
        rel_top = {items[j] for j in relevance_order[:k]}
        score = [
            (rel[j] + fair[j]) * ((items[j] in rel_top) + (items[j] in fair_top))
            for j in range(len(items))
        ]
        order = sorted(range(len(items)), key=lambda j: (-score[j], j))
        lists[user] = tuple(items[j] for j in order)
        fused[user] = tuple(float(score[j]) for j in order)
    return RerankResult(_emit(lists, fused, k), "combmnz")


def borda_fuse(rankings: Sequence[Sequence[str]], depth: int) -> List[Tuple[str, float]]:
    """Borda count: an item at position p (0-based) earns depth - p points per ranking.

    Ties go to the earlier position in the first ranking.
    """
    points: Dict[str, float] = {}
    for ranking in rankings:
        for p, item in enumerate(ranking[:depth]):
            points[item] = points.get(item, 0.0) + (depth - p)
    first = {item: p for p, item in enumerate(rankings[0])} if rankings else {}
    return sorted(points.items(), key=lambda kv: (-kv[1], first.get(kv[0], math.inf), kv[0]))


def borda(run: RunSet, k: int = 10, depth: int = 25) -> RerankResult:
    """Borda fusion of the input ranking with the least-covered-first ranking."""
    _check_depth(run, k, depth)
    cov = coverage(run, k)
    lists, fused = {}, {}
    for user in run.users:
        items = run.items_of(user, depth)
        ranked = borda_fuse([list(items), _fairness_order(items, cov)], depth)
        lists[user] = tuple(i for i, _ in ranked)
        fused[user] = tuple(p for _, p in ranked)
    return RerankResult(_emit(lists, fused, k), "borda")


def _popularity_sets(cov: Counter, items: Sequence[str], beta: float) -> Tuple[List[str], List[str]]:
    ranked = sorted(items, key=lambda i: (-cov[i], i))
    size = max(1, math.ceil(beta * len(ranked)))
    return ranked[:size], ranked[-size:]


def greedy_substitution(
    run: RunSet,
    k: int = 10,
    depth: int = 25,
    beta: float = 0.05,
    cap: float = 0.25,
) -> RerankResult:
    """Swap most popular items out of the top k for least popular ones.

    Popularity is top-k' coverage. Every feasible swap (user, popular item in the
    top k, unpopular candidate below k) is costed by the drop in predicted score;
    swaps are applied cheapest first until ``cap`` of the m*k slots have changed.
    Swaps made stale by an earlier one are skipped.
    """
    _check_depth(run, k, depth)
    if not 0 < beta <= 0.5:
        raise ConfigError(f"beta must lie in (0, 0.5], got {beta}")
    if not 0 <= cap <= 1:
        raise ConfigError(f"cap must lie in [0, 1], got {cap}")
    _require_scores(run, "greedy substitution")
    cov = coverage(run, depth)
    popular, unpopular = _popularity_sets(cov, sorted(cov), beta)
    popular_set, unpopular_set = set(popular), set(unpopular) - set(popular)

    candidates = []
    for user in run.users:
        items = run.items_of(user, depth)
        scores = dict(zip(items, run.scores_of(user)))
        head, tail = items[:k], items[k:]
        for out in head:
            if out not in popular_set:
                continue
            for into in tail:
                if into in unpopular_set:
                    candidates.append((scores[out] - scores[into], user, out, into))
    candidates.sort()

    lists = {u: list(run.items_of(u, depth)) for u in run.users}
    budget = int(cap * run.m * k)
    swaps = skipped = 0
    for loss, user, out, into in candidates:
        if swaps >= budget:
            break
        ranked = lists[user]
        head = ranked[:k]
        if out not in head or into in head:
            skipped += 1
            continue
        a, b = ranked.index(out), ranked.index(into)
        ranked[a], ranked[b] = into, out
        swaps += 1
    logger.info("greedy substitution applied %d swaps (budget %d), skipped %d stale", swaps, budget, skipped)
    out_run = RunSet({u: tuple(v) for u, v in lists.items()})
    return RerankResult(out_run, "greedy_substitution", swaps=swaps, skipped=skipped)


def rerank(method: str, run: RunSet, k: int = 10, depth: int = 25, **params) -> RunSet:
    """Dispatch to one re-ranker and return the re-ranked run."""
    if method == "combmnz":
        return combmnz(run, k, depth).run
    if method == "borda":
        return borda(run, k, depth).run
    if method == "greedy_substitution":
        return greedy_substitution(run, k, depth, **params).run
    raise ConfigError(f"unknown re-ranker {method!r}, expected one of {METHODS}")
