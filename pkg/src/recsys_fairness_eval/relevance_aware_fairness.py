"""Relevance-aware individual item fairness.

IAA, IFD (divide and multiply forms), HD, MME, IBO/IWO, II-F and AI-F in their
original form, plus corrected variants for IAA, IFD and II-F normalised per user
between the scores of that user's fairest and unfairest rankings. Corrections
apply to a single round and binary relevance only.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .core_model import (
    CLIPPED,
    DEGENERATE,
    EXCLUDED_USERS,
    SINGLE_RELEVANT_USERS,
    UNDEFINED,
    Catalog,
    Direction,
    ExamFn,
    ExamKind,
    JointMeasureResult,
    Qrels,
    RunSet,
    Variant,
    item_order,
    rank_matrix,
    resolve_k,
    round_exposure,
    undefined_result,
)
from .errors import ConfigError, UndefinedMeasureError, ValidationError

logger = logging.getLogger(__name__)

JOINT_MEASURES = ("IAA", "IFD-div", "IFD-mul", "HD", "MME", "IBO", "IWO", "II-F", "AI-F")

# (fairest, unfairest) ranking strategy per correctable measure
STRATEGIES = {
    "IAA": ("top", "bottom"),
    "IFD-div": ("bottom", "half-half"),
    "IFD-mul": ("bottom", "split"),
    "II-F": ("top", "bottom"),
}

RunsArg = Union[RunSet, Sequence[RunSet]]

_TOL = 1e-15


@dataclass(frozen=True)
class NormalizedRelevance:
    """Per-user relevance min-max normalised over the whole catalog; missing items are 0."""

    values: Mapping[str, Mapping[str, float]]

    def matrix(self, users: Sequence[str], catalog: Catalog) -> np.ndarray:
        out = np.zeros((len(users), catalog.n))
        for row, user in enumerate(users):
            for item, value in self.values.get(user, {}).items():
                if item in catalog:
                    out[row, catalog.index[item]] = value
        return out

    @classmethod
    def from_qrels(cls, qrels: Qrels) -> "NormalizedRelevance":
        return cls({u: {i: 1.0 for i in qrels.relevant(u)} for u in qrels.users})

    @classmethod
    def from_graded(cls, raw: Mapping[str, Mapping[str, float]], catalog: Catalog) -> "NormalizedRelevance":
        values: Dict[str, Dict[str, float]] = {}
        for user, grades in raw.items():
            row = np.zeros(catalog.n)
            for item, grade in grades.items():
                row[catalog.index[item]] = float(grade)
            lo, hi = row.min(), row.max()
            if hi == lo:
                raise ValidationError("all relevance values are equal, cannot min-max normalise", user=user)
            scaled = (row - lo) / (hi - lo)
            values[user] = {catalog.items[j]: float(v) for j, v in enumerate(scaled) if v > 0}
        return cls(values)


def _as_rounds(runs: RunsArg) -> List[RunSet]:
    rounds = [runs] if isinstance(runs, RunSet) else list(runs)
    if not rounds:
        raise ConfigError("at least one round of recommendations is required")
    return rounds


def _variant(variant: Union[str, Variant]) -> Variant:
    try:
        return Variant(variant)
    except ValueError:
        raise ConfigError(f"unknown variant {variant!r}") from None


def _single_round(rounds: List[RunSet], measure: str) -> None:
    if len(rounds) > 1:
        raise ConfigError(f"corrected {measure} is only defined for a single round")


def exam_weight(fn: Union[ExamFn, str], position: int, k: int, gamma: float = 0.8) -> float:
    """Weight of rank ``position`` under an examination function."""
    exam = fn if isinstance(fn, ExamFn) else ExamFn(ExamKind(fn), k, gamma=gamma)
    return exam.weight(position)


# ---------------------------------------------------------------------------
# Extreme rankings
# ---------------------------------------------------------------------------


def _strategy_order(
    strategy: str, relevant_mask: np.ndarray, a: Optional[int] = None, middle: str = "top"
) -> np.ndarray:
    """Catalog indices in rank order for a binary relevance row."""
    rel = list(np.flatnonzero(relevant_mask))
    irr = list(np.flatnonzero(~relevant_mask))
    n_rel = len(rel)
    if strategy == "top":
        order = rel + irr
    elif strategy == "bottom":
        order = irr + rel
    elif strategy == "half-half":
        h = n_rel // 2
        head, tail = rel[:h], rel[n_rel - h:]
        mid = rel[h:n_rel - h]
        if middle == "top":
            order = head + mid + irr + tail
        elif middle == "bottom":
            order = head + irr + mid + tail
        else:
            raise ConfigError(f"middle placement must be 'top' or 'bottom', got {middle!r}")
    elif strategy == "split":
        if a is None or not 1 <= a <= n_rel:
            raise ConfigError(f"split strategy needs 1 <= a <= {n_rel}, got {a}")
        order = rel[:a] + irr + rel[a:]
    else:
        raise ConfigError(f"unknown ranking strategy {strategy!r}")
    return np.array(order, dtype=np.int64)


def _positions(order: np.ndarray, n: int) -> np.ndarray:
    pos = np.zeros(n, dtype=np.int64)
    pos[order] = np.arange(1, order.size + 1)
    return pos


def extreme_ranking(
    measure: str,
    strategy: str,
    relevant: Sequence[str],
    catalog: Catalog,
    a: Optional[int] = None,
    middle: str = "top",
) -> Tuple[str, ...]:
    """Full ranking of the catalog that realises a fairest/unfairest strategy for one user.

    Relevant and irrelevant items keep catalog order within their blocks.
    """
    if measure not in STRATEGIES:
        raise ConfigError(f"no extreme ranking strategies for {measure!r}")
    if not relevant:
        raise ConfigError("extreme rankings need at least one relevant item")
    mask = np.zeros(catalog.n, dtype=bool)
    for item in relevant:
        mask[catalog.index[item]] = True
    order = _strategy_order(strategy, mask, a=a, middle=middle)
    return tuple(catalog.items[j] for j in order)


def _normalise(raw: float, lo: float, hi: float) -> Tuple[Optional[float], bool]:
    """Per-user min-max; None when degenerate, flag when clipped."""
    if hi - lo <= _TOL:
        return None, False
    value = (raw - lo) / (hi - lo)
    clipped = value < -1e-12 or value > 1 + 1e-12
    return float(min(max(value, 0.0), 1.0)), clipped


def _finish(
    measure: str,
    variant: Variant,
    direction: Direction,
    per_user: Dict[str, float],
    params: Dict,
    excluded: int = 0,
    degenerate: int = 0,
    clipped: int = 0,
    single: int = 0,
) -> JointMeasureResult:
    if not per_user:
        result = undefined_result(JointMeasureResult, measure, variant.value, direction, **params)
    else:
        score = float(np.mean([per_user[u] for u in per_user]))
        result = JointMeasureResult(measure, variant.value, score, direction, params=params, per_user=per_user)
    if excluded:
        result.warn(EXCLUDED_USERS, excluded)
    if degenerate:
        result.warn(DEGENERATE, degenerate)
    if clipped:
        result.warn(CLIPPED, clipped)
    if single:
        result.warn(SINGLE_RELEVANT_USERS, single)
    return result


# ---------------------------------------------------------------------------
# IAA
# ---------------------------------------------------------------------------


def iaa(
    full_run: RunsArg,
    norm_rel: NormalizedRelevance,
    catalog: Catalog,
    k,
    exam_variant: str = "corrected",
    variant="corrected",
) -> JointMeasureResult:
    """Mean absolute gap between linear examination weight and normalised relevance.

    The corrected variant rescales each user between the rankings sorted by
    decreasing (fairest) and increasing (unfairest) relevance.
    """
    k = resolve_k(k)
    variant = _variant(variant)
    rounds = _as_rounds(full_run)
    kind = ExamKind.LINEAR_NORMALIZED_ORIGINAL if exam_variant == "original" else ExamKind.LINEAR_NORMALIZED_CORRECTED
    exam = ExamFn(kind, k)
    if kind == ExamKind.LINEAR_NORMALIZED_ORIGINAL and k == 1:
        raise UndefinedMeasureError("IAA with the original linear-normalized examination is undefined at k=1")
    users = rounds[0].users
    n = catalog.n
    weights = round_exposure(rounds, users, catalog, exam)
    rel = norm_rel.matrix(users, catalog)
    raw = np.abs(weights - rel).mean(axis=1)
    params = {"k": k, "exam": kind.value, "W": len(rounds)}
    if variant != Variant.CORRECTED:
        per_user = {u: float(v) for u, v in zip(users, raw)}
        return _finish("IAA", variant, Direction.LOWER, per_user, params)
    _single_round(rounds, "IAA")
    per_user: Dict[str, float] = {}
    degenerate = clipped = 0
    for row, user in enumerate(users):
        best = exam.weights(_positions(item_order(catalog, rel[row], descending=True), n))
        worst = exam.weights(_positions(item_order(catalog, rel[row]), n))
        lo = float(np.abs(best - rel[row]).mean())
        hi = float(np.abs(worst - rel[row]).mean())
        value, was_clipped = _normalise(float(raw[row]), lo, hi)
        if value is None:
            degenerate += 1
            continue
        clipped += was_clipped
        per_user[user] = value
    return _finish("IAA", variant, Direction.LOWER, per_user, params, degenerate=degenerate, clipped=clipped)


# ---------------------------------------------------------------------------
# IFD
# ---------------------------------------------------------------------------


def _ifd_div_user(joint: np.ndarray, rel: np.ndarray) -> float:
    """Mean positive gap over pairs with r_i >= r_i' > 0, self pairs included."""
    pairs = rel[:, None] >= rel[None, :]
    gaps = np.maximum(joint[:, None] - joint[None, :], 0.0)
    return float(gaps[pairs].sum() / pairs.sum())


def _ifd_mul_user(joint: np.ndarray) -> float:
    n = joint.size
    return float(2.0 * (n * (joint ** 2).sum() - joint.sum() ** 2) / (n * (n - 1)))


def ifd_div(
    full_run: RunsArg,
    qrels: Qrels,
    catalog: Catalog,
    k,
    variant="corrected",
    include_topk_indicator: Optional[bool] = None,
    exclude_single_relevant: bool = False,
) -> JointMeasureResult:
    """IFD with exposure divided by relevance.

    The original reads DCG exposure over the full ranking and ignores ``k``; the
    corrected form zeroes exposure below ``k`` and rescales each user between
    the bottom and half-half strategies.
    """
    k = resolve_k(k)
    variant = _variant(variant)
    rounds = _as_rounds(full_run)
    indicator = variant == Variant.CORRECTED if include_topk_indicator is None else include_topk_indicator
    exam = ExamFn(ExamKind.DCG, k, truncate=indicator)
    users = rounds[0].users
    n = catalog.n
    weights = round_exposure(rounds, users, catalog, exam)
    rel = qrels.matrix(users, catalog)
    params = {"k": k, "topk_indicator": indicator, "W": len(rounds)}
    if variant == Variant.CORRECTED:
        _single_round(rounds, "IFD-div")
    per_user: Dict[str, float] = {}
    excluded = degenerate = clipped = single = 0
    for row, user in enumerate(users):
        mask = rel[row] > 0
        n_rel = int(mask.sum())
        if n_rel == 0:
            excluded += 1
            continue
        raw = _ifd_div_user(weights[row, mask] / rel[row, mask], rel[row, mask])
        if variant != Variant.CORRECTED:
            per_user[user] = raw
            continue
        if n_rel == 1:
            single += 1
            if not exclude_single_relevant:
                per_user[user] = 0.0
            continue
        ends = []
        for strategy in STRATEGIES["IFD-div"]:
            w = exam.weights(_positions(_strategy_order(strategy, mask), n))
            ends.append(_ifd_div_user(w[mask] / rel[row, mask], rel[row, mask]))
        value, was_clipped = _normalise(raw, ends[0], ends[1])
        if value is None:
            degenerate += 1
            continue
        clipped += was_clipped
        per_user[user] = value
    if excluded:
        logger.info("IFD-div: %d users without relevant items excluded", excluded)
    return _finish("IFD-div", variant, Direction.LOWER, per_user, params, excluded, degenerate, clipped, single)


def ifd_mul(full_run: RunsArg, qrels: Qrels, catalog: Catalog, k, variant="corrected") -> JointMeasureResult:
    """IFD with exposure multiplied by relevance over all item pairs."""
    k = resolve_k(k)
    variant = _variant(variant)
    rounds = _as_rounds(full_run)
    n = catalog.n
    if n < 2:
        raise ConfigError("IFD-mul needs at least two catalog items")
    exam = ExamFn(ExamKind.DCG, k)
    users = rounds[0].users
    weights = round_exposure(rounds, users, catalog, exam)
    rel = qrels.matrix(users, catalog)
    params = {"k": k, "W": len(rounds)}
    if variant == Variant.CORRECTED:
        _single_round(rounds, "IFD-mul")
    per_user: Dict[str, float] = {}
    excluded = degenerate = clipped = 0
    for row, user in enumerate(users):
        mask = rel[row] > 0
        n_rel = int(mask.sum())
        if n_rel == 0:
            excluded += 1
            continue
        raw = _ifd_mul_user(rel[row] * weights[row])
        if variant != Variant.CORRECTED:
            per_user[user] = raw
            continue
        lo = _ifd_mul_user(rel[row] * exam.weights(_positions(_strategy_order("bottom", mask), n)))
        hi = max(
            _ifd_mul_user(rel[row] * exam.weights(_positions(_strategy_order("split", mask, a=a), n)))
            for a in range(1, n_rel + 1)
        )
        value, was_clipped = _normalise(raw, lo, hi)
        if value is None:
            degenerate += 1
            continue
        clipped += was_clipped
        per_user[user] = value
    return _finish("IFD-mul", variant, Direction.LOWER, per_user, params, excluded, degenerate, clipped)


# ---------------------------------------------------------------------------
# HD
# ---------------------------------------------------------------------------


def hd(run: RunSet, qrels: Qrels, catalog: Catalog, k, gamma: float = 0.9) -> JointMeasureResult:
    """Hellinger distance between position-wise relevance and interaction distributions.

    Reference lists sort ground-truth relevance with a stable sort and item-id
    tiebreak, so repeated evaluation is deterministic.
    """
    k = resolve_k(k)
    if not 0.0 < gamma < 1.0:
        raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")
    params = {"k": k, "gamma": gamma}
    users = [u for u in run.users if qrels.relevant(u)]
    excluded = run.m - len(users)
    if not users:
        result = undefined_result(JointMeasureResult, "HD", Variant.ORIGINAL.value, Direction.LOWER, **params)
        return result.warn(EXCLUDED_USERS, excluded)
    rel = qrels.matrix(users, catalog)
    patience = gamma * gamma ** np.arange(k)
    q = np.zeros(k)
    c = np.zeros(k)
    for row, user in enumerate(users):
        reference = item_order(catalog, rel[row], descending=True)[:k]
        q[: reference.size] += rel[row, reference] / rel[row].sum()
        listed = np.array([catalog.index[i] for i in run.items_of(user, k)], dtype=np.int64)
        hit = np.zeros(k)
        hit[: listed.size] = rel[row, listed]
        survive = np.concatenate(([1.0], np.cumprod(1.0 - hit)[:-1]))
        click = hit * patience * survive
        click_total = click.sum()
        click_norm = click / click_total if click_total > 0 else np.zeros(k)
        full = np.zeros(catalog.n)
        full[listed] = click_norm[: listed.size]
        at_ref = np.zeros(k)
        at_ref[: reference.size] = full[reference]
        ref_total = at_ref.sum()
        if ref_total > 0:
            c += at_ref / ref_total
    q /= len(users)
    c /= len(users)
    score = float(np.sqrt(((np.sqrt(q) - np.sqrt(c)) ** 2).sum()) / math.sqrt(2))
    result = JointMeasureResult("HD", Variant.ORIGINAL.value, score, Direction.LOWER, params=params)
    if excluded:
        result.warn(EXCLUDED_USERS, excluded)
    return result


# ---------------------------------------------------------------------------
# Envy-based item measures (inverse examination)
# ---------------------------------------------------------------------------


def _impact_inputs(rounds: List[RunSet], qrels: Qrels, catalog: Catalog, k: int):
    users = rounds[0].users
    exposure = round_exposure(rounds, users, catalog, ExamFn(ExamKind.INVERSE, k)) / len(users)
    rel = qrels.matrix(users, catalog)
    return users, exposure, rel


def mme(full_run: RunsArg, qrels: Qrels, catalog: Catalog, k, block: int = 1024) -> JointMeasureResult:
    """Mean max envy: how much more impact each item would get from another item's allocation."""
    k = resolve_k(k)
    rounds = _as_rounds(full_run)
    users, exposure, rel = _impact_inputs(rounds, qrels, catalog, k)
    own = (rel * exposure).sum(axis=0)
    envy = np.empty(catalog.n)
    for start in range(0, catalog.n, block):
        stop = min(start + block, catalog.n)
        impact = rel[:, start:stop].T @ exposure
        envy[start:stop] = impact.max(axis=1) - own[start:stop]
    score = float(envy.mean())
    return JointMeasureResult(
        "MME", Variant.ORIGINAL.value, score, Direction.LOWER, params={"k": k, "W": len(rounds)}
    )


def ibo_iwo(
    full_run: RunsArg,
    qrels: Qrels,
    catalog: Catalog,
    k,
    variant="corrected",
    threshold_pair: Tuple[float, float] = (1.1, 0.9),
) -> Tuple[JointMeasureResult, JointMeasureResult]:
    """Fractions of items whose impact is well above (IBO) or below (IWO) the uniform-policy impact.

    The corrected variant only counts items relevant to at least one user.
    """
    k = resolve_k(k)
    variant = _variant(variant)
    upper, lower = threshold_pair
    if not lower < upper:
        raise ConfigError(f"IBO/IWO thresholds must satisfy lower < upper, got {threshold_pair}")
    rounds = _as_rounds(full_run)
    users, exposure, rel = _impact_inputs(rounds, qrels, catalog, k)
    m, n = len(users), catalog.n
    own = (rel * exposure).sum(axis=0)
    harmonic = float((1.0 / np.arange(1, min(k, n) + 1)).sum())
    uniform = harmonic * rel.sum(axis=0) / (m * n)
    params = {"k": k, "thresholds": [upper, lower], "W": len(rounds)}

    def _pair(best: float, worst: float) -> Tuple[JointMeasureResult, JointMeasureResult]:
        return (
            JointMeasureResult("IBO", variant.value, float(best), Direction.HIGHER, params=dict(params)),
            JointMeasureResult("IWO", variant.value, float(worst), Direction.LOWER, params=dict(params)),
        )

    if variant == Variant.CORRECTED:
        mask = uniform > 0
        if not mask.any():
            return (
                undefined_result(JointMeasureResult, "IBO", variant.value, Direction.HIGHER, **params),
                undefined_result(JointMeasureResult, "IWO", variant.value, Direction.LOWER, **params),
            )
        best = (own[mask] >= upper * uniform[mask]).mean()
        worst = (own[mask] <= lower * uniform[mask]).mean()
        return _pair(best, worst)
    if (uniform == 0).any():
        logger.debug("IBO/IWO original undefined: %d items relevant to no user", int((uniform == 0).sum()))
        return (
            undefined_result(JointMeasureResult, "IBO", variant.value, Direction.HIGHER, **params),
            undefined_result(JointMeasureResult, "IWO", variant.value, Direction.LOWER, **params),
        )
    ratio = own / uniform
    return _pair((ratio >= upper).mean(), (ratio <= lower).mean())


# ---------------------------------------------------------------------------
# Expected exposure against a relevance-derived target
# ---------------------------------------------------------------------------


def _target_exposure(rel: np.ndarray, gamma: float) -> np.ndarray:
    n_rel = rel.sum(axis=1)
    scale = np.where(n_rel > 0, (1 - gamma ** n_rel) / (1 - gamma) / np.maximum(n_rel, 1), 0.0)
    return rel * scale[:, None]


def expected_exposure_fairness(
    kind: str,
    runs: RunsArg,
    qrels: Qrels,
    catalog: Catalog,
    k,
    gamma: float = 0.8,
    variant="original",
) -> JointMeasureResult:
    """II-F (per user-item) or AI-F (per item) squared deviation from relevance-proportional exposure."""
    k = resolve_k(k)
    variant = _variant(variant)
    if kind not in ("II-F", "AI-F"):
        raise ConfigError(f"unknown expected exposure measure {kind!r}")
    if not 0.0 < gamma < 1.0:
        raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")
    if kind == "AI-F" and variant == Variant.CORRECTED:
        raise ConfigError("AI-F has no corrected variant")
    rounds = _as_rounds(runs)
    users = rounds[0].users
    exam = ExamFn(ExamKind.RBP, k, gamma=gamma)
    exposure = round_exposure(rounds, users, catalog, exam)
    rel = qrels.matrix(users, catalog)
    target = _target_exposure(rel, gamma)
    params = {"k": k, "gamma": gamma, "W": len(rounds)}
    if kind == "AI-F":
        score = float(((exposure.mean(axis=0) - target.mean(axis=0)) ** 2).mean())
        return JointMeasureResult(kind, variant.value, score, Direction.LOWER, params=params)
    per_user_raw = ((exposure - target) ** 2).mean(axis=1)
    if variant != Variant.CORRECTED:
        per_user = {u: float(v) for u, v in zip(users, per_user_raw)}
        return JointMeasureResult(
            kind, variant.value, float(per_user_raw.mean()), Direction.LOWER, params=params, per_user=per_user
        )
    _single_round(rounds, "II-F")
    per_user: Dict[str, float] = {}
    excluded = degenerate = clipped = 0
    for row, user in enumerate(users):
        mask = rel[row] > 0
        if not mask.any():
            excluded += 1
            continue
        ends = []
        for strategy in STRATEGIES["II-F"]:
            w = exam.weights(_positions(_strategy_order(strategy, mask), catalog.n))
            ends.append(float(((w - target[row]) ** 2).mean()))
        value, was_clipped = _normalise(float(per_user_raw[row]), ends[0], ends[1])
        if value is None:
            degenerate += 1
            continue
        clipped += was_clipped
        per_user[user] = value
    return _finish(kind, variant, Direction.LOWER, per_user, params, excluded, degenerate, clipped)


# ---------------------------------------------------------------------------
# Suite
# ---------------------------------------------------------------------------


def evaluate_joint_suite(
    full_run: RunsArg,
    qrels: Qrels,
    catalog: Catalog,
    k,
    variants: Sequence[str] = ("original", "corrected"),
    gamma_exposure: float = 0.8,
    gamma_hd: float = 0.9,
    thresholds: Tuple[float, float] = (1.1, 0.9),
    exclude_single_relevant: bool = False,
    norm_rel: Optional[NormalizedRelevance] = None,
) -> List[JointMeasureResult]:
    """Every relevance-aware measure in each requested variant."""
    k = resolve_k(k)
    rounds = _as_rounds(full_run)
    norm_rel = norm_rel or NormalizedRelevance.from_qrels(qrels)
    variants = [_variant(v) for v in variants]
    single = len(rounds) == 1
    results: List[JointMeasureResult] = []
    for variant in variants:
        if variant == Variant.CORRECTED and not single:
            logger.warning("corrected relevance-aware variants skipped for %d rounds", len(rounds))
            continue
        if variant == Variant.DEFINED:
            continue
        exam_variant = "original" if variant == Variant.ORIGINAL else "corrected"
        try:
            results.append(iaa(rounds, norm_rel, catalog, k, exam_variant=exam_variant, variant=variant))
        except UndefinedMeasureError as e:
            logger.warning("%s", e)
            results.append(undefined_result(JointMeasureResult, "IAA", variant.value, Direction.LOWER, k=k))
        results.append(
            ifd_div(rounds, qrels, catalog, k, variant=variant, exclude_single_relevant=exclude_single_relevant)
        )
        results.append(ifd_mul(rounds, qrels, catalog, k, variant=variant))
        results.extend(ibo_iwo(rounds, qrels, catalog, k, variant=variant, threshold_pair=thresholds))
        results.append(expected_exposure_fairness("II-F", rounds, qrels, catalog, k, gamma_exposure, variant))
    if single:
        results.append(hd(rounds[0], qrels, catalog, k, gamma_hd))
    results.append(mme(rounds, qrels, catalog, k))
    results.append(expected_exposure_fairness("AI-F", rounds, qrels, catalog, k, gamma_exposure))
    return results
