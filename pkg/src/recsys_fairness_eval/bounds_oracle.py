"""Exhaustive enumeration of small recommendation outputs.

Used to check closed-form bounds and to find the empirical extremes of measures
that have no closed form. Users are exchangeable under every measure here, so
runs are enumerated as multisets of per-user states.
"""

from __future__ import annotations

import itertools
import logging
import math
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .core_model import BoundsResult, Catalog, Direction, ExamFn, ExamKind, Qrels, RunSet
from .errors import ConfigError, UnsupportedBoundError
from . import exposure_fairness as ef
from . import relevance_aware_fairness as rf

logger = logging.getLogger(__name__)

MAX_STATES = 10 ** 7


def _check_size(per_user: int, m: int) -> int:
    total = math.comb(per_user + m - 1, m)
    if total > MAX_STATES:
        raise UnsupportedBoundError(f"enumeration needs {total} states, above the cap of {MAX_STATES}")
    return total


def _user_lists(k: int, n: int, ordered: bool) -> List[Tuple[int, ...]]:
    pick = itertools.permutations if ordered else itertools.combinations
    return list(pick(range(n), k))


def enumerate_runs(
    k: int, m: int, n: int, ordered: bool = False, rounds: int = 1
) -> Iterator[List[RunSet]]:
    """Every top-k output up to user relabelling, one ``RunSet`` per round.

    ``ordered=False`` enumerates item sets, enough for count-based measures.
    """
    if k > n:
        raise ConfigError(f"cutoff k={k} exceeds catalog size n={n}")
    catalog = Catalog.numbered(n)
    lists = _user_lists(k, n, ordered)
    states = list(itertools.product(lists, repeat=rounds))
    total = _check_size(len(states), m)
    logger.debug("enumerating %d runs (k=%d, m=%d, n=%d, W=%d)", total, k, m, n, rounds)
    users = [f"u{j}" for j in range(1, m + 1)]
    for combo in itertools.combinations_with_replacement(states, m):
        yield [
            RunSet({u: tuple(catalog.items[i] for i in state[w]) for u, state in zip(users, combo)})
            for w in range(rounds)
        ]


def _exposure_score(measure: str, rounds: List[RunSet], catalog: Catalog, k: int, params: Dict) -> float:
    run = rounds[0]
    if measure == "Jain":
        return ef.jain(run, catalog, k).score
    if measure == "QF":
        return ef.qf(run, catalog, k).score
    if measure == "Ent":
        return ef.entropy(run, catalog, k, "defined", params.get("log_base")).score
    if measure == "Gini":
        return ef.gini(rounds, catalog, k).score
    if measure == "Gini-w":
        return ef.gini(rounds, catalog, k, exam=ExamFn(ExamKind.DCG, k)).score
    if measure == "FSat":
        return ef.fsat(run, catalog, k).score
    if measure == "VoCD":
        return ef.vocd(run, catalog, k, params.get("similarity"), params.get("alpha", 2.0), params.get("beta", 0.0)).score
    if measure in ("II-D", "AI-D"):
        return ef.expected_exposure_disparity(measure, rounds, catalog, k, params.get("gamma", 0.8)).score
    raise ConfigError(f"no brute-force evaluator for {measure!r}")


def brute_force_bounds(measure: str, k: int, m: int, n: int, rounds: int = 1, **params) -> BoundsResult:
    """Empirical most unfair / most fair score of an exposure measure over every output."""
    ordered = measure in ("Gini-w", "II-D", "AI-D")
    catalog = Catalog.numbered(n)
    scores = [
        _exposure_score(measure, runs, catalog, k, params)
        for runs in enumerate_runs(k, m, n, ordered=ordered, rounds=rounds)
    ]
    values = np.array([s for s in scores if not math.isnan(s)])
    if values.size == 0:
        raise UnsupportedBoundError(f"{measure} is undefined on every enumerated output")
    direction = ef.DIRECTIONS[measure]
    if direction == Direction.HIGHER:
        return BoundsResult(float(values.min()), float(values.max()), "enumeration", direction)
    return BoundsResult(float(values.max()), float(values.min()), "enumeration", direction)


def enumerate_joint(
    k: int,
    m: int,
    n: int,
    patterns: Optional[Sequence[Tuple[int, ...]]] = None,
    min_relevant: int = 0,
) -> Iterator[Tuple[RunSet, Qrels]]:
    """Every (ranking, binary relevance) pair per user, up to user relabelling."""
    catalog = Catalog.numbered(n)
    lists = _user_lists(k, n, ordered=True)
    if patterns is None:
        patterns = [p for p in itertools.product((0, 1), repeat=n) if sum(p) >= min_relevant]
    states = list(itertools.product(lists, patterns))
    _check_size(len(states), m)
    users = [f"u{j}" for j in range(1, m + 1)]
    for combo in itertools.combinations_with_replacement(states, m):
        run = RunSet({u: tuple(catalog.items[i] for i in ranking) for u, (ranking, _) in zip(users, combo)})
        qrels = Qrels({u: {catalog.items[j]: g for j, g in enumerate(pattern)} for u, (_, pattern) in zip(users, combo)})
        yield run, qrels


def _joint_score(measure: str, run: RunSet, qrels: Qrels, catalog: Catalog, k: int, params: Dict) -> float:
    gamma = params.get("gamma")
    if measure == "HD":
        return rf.hd(run, qrels, catalog, k, 0.9 if gamma is None else gamma).score
    if measure == "MME":
        return rf.mme(run, qrels, catalog, k).score
    if measure in ("IBO", "IWO"):
        best, worst = rf.ibo_iwo(run, qrels, catalog, k, variant=params.get("variant", "corrected"))
        return best.score if measure == "IBO" else worst.score
    if measure in ("II-F", "AI-F"):
        return rf.expected_exposure_fairness(measure, run, qrels, catalog, k, 0.8 if gamma is None else gamma).score
    raise ConfigError(f"no joint brute-force evaluator for {measure!r}")


def brute_force_joint(
    measure: str,
    k: int,
    m: int,
    n: int,
    patterns: Optional[Sequence[Tuple[int, ...]]] = None,
    min_relevant: int = 0,
    accept: Optional[Callable[[RunSet, Qrels], bool]] = None,
    **params,
) -> Tuple[float, float]:
    """(min, max) of a relevance-aware measure over rankings and relevance patterns."""
    catalog = Catalog.numbered(n)
    values = []
    for run, qrels in enumerate_joint(k, m, n, patterns, min_relevant):
        if accept is not None and not accept(run, qrels):
            continue
        score = _joint_score(measure, run, qrels, catalog, k, params)
        if not math.isnan(score):
            values.append(score)
    if not values:
        raise UnsupportedBoundError(f"{measure} is undefined on every enumerated output")
    return float(min(values)), float(max(values))


def brute_force_user(measure: str, k: int, n: int, exclude_single: bool = True) -> Tuple[float, float]:
    """(min, max) per-user IFD score over every binary relevance pattern by rank.

    The ranking is fixed to catalog order, so each pattern is one ranking of
    relevant and irrelevant items. Patterns with no relevant item are skipped.
    """
    if measure not in ("IFD-div", "IFD-mul"):
        raise ConfigError(f"no per-user brute-force evaluator for {measure!r}")
    if 2 ** n > MAX_STATES:
        raise UnsupportedBoundError(f"2^{n} relevance patterns exceed the cap of {MAX_STATES}")
    catalog = Catalog.numbered(n)
    run = RunSet({"u1": catalog.items})
    values = []
    for pattern in itertools.product((0, 1), repeat=n):
        n_rel = sum(pattern)
        if n_rel == 0 or (exclude_single and n_rel == 1 and measure == "IFD-div"):
            continue
        qrels = Qrels({"u1": {catalog.items[j]: g for j, g in enumerate(pattern)}})
        if measure == "IFD-div":
            res = rf.ifd_div(run, qrels, catalog, k, variant="original", include_topk_indicator=True)
        else:
            res = rf.ifd_mul(run, qrels, catalog, k, variant="original")
        values.append(res.score)
    return float(min(values)), float(max(values))
