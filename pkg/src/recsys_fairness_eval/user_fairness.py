"""Individual user fairness: dispersion, envy, UF and PUF.

Similarity-free measures (SD, Gini, ME, MME, PEU) only look at effectiveness or
utility values. UF and PUF also take a ``SimilarityMatrix`` between users.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterator, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist, jensenshannon

from .core_model import (
    EXCLUDED_USERS,
    UNDEFINED,
    UNDEFINED_PAIRS,
    Direction,
    Interactions,
    MeasureResult,
    Qrels,
    RunSet,
    undefined_result,
)
from .effectiveness import PerUserScores, per_user_effectiveness, score_items
from .errors import ConfigError, ValidationError
from .exposure_fairness import gini_index

logger = logging.getLogger(__name__)

USER_MEASURES = ("SD", "Gini", "ME", "MME", "PEU", "UF", "PUF")
SIMILARITY_KINDS = ("cosine", "jaccard", "uf")

# Row block size for pairwise sums.
PAIR_BLOCK = 2048


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Symmetric user-by-user similarity. The diagonal is never read."""

    users: Tuple[str, ...]
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        m = len(self.users)
        if values.shape != (m, m):
            raise ValidationError(f"similarity matrix has shape {values.shape}, expected ({m}, {m})")
        if not np.allclose(values, values.T, atol=1e-12, equal_nan=True):
            raise ValidationError("similarity matrix is not symmetric")
        object.__setattr__(self, "users", tuple(str(u) for u in self.users))
        object.__setattr__(self, "values", values)

    @cached_property
    def index(self) -> Dict[str, int]:
        return {u: j for j, u in enumerate(self.users)}

    @property
    def m(self) -> int:
        return len(self.users)

    def get(self, u: str, v: str) -> float:
        return float(self.values[self.index[u], self.index[v]])

    def pair_values(self) -> np.ndarray:
        """Similarities of every unordered pair u < u'."""
        rows, cols = np.triu_indices(self.m, k=1)
        return self.values[rows, cols]

    def restrict(self, users: Sequence[str]) -> "SimilarityMatrix":
        missing = [u for u in users if u not in self.index]
        if missing:
            raise ValidationError(f"{len(missing)} users have no similarity entries, e.g. {missing[:5]}")
        idx = np.array([self.index[u] for u in users], dtype=int)
        return SimilarityMatrix(tuple(users), self.values[np.ix_(idx, idx)], self.normalized)

    def normalize(self) -> "SimilarityMatrix":
        """Min-max normalise over the off-diagonal pairs.

        A constant matrix is returned unchanged (already flagged normalised)
        when its values lie in [0, 1].
        """
        if self.normalized:
            return self
        pairs = self.pair_values()
        if pairs.size == 0:
            return SimilarityMatrix(self.users, self.values.copy(), True)
        lo, hi = float(pairs.min()), float(pairs.max())
        if math.isclose(lo, hi, abs_tol=1e-15):
            if lo < 0 or lo > 1:
                raise ValidationError(f"constant similarity {lo} cannot be normalised into [0, 1]")
            logger.warning("similarity is constant (%s) over all pairs, normalisation skipped", lo)
            return SimilarityMatrix(self.users, self.values.copy(), True)
        scaled = (self.values - lo) / (hi - lo)
        np.fill_diagonal(scaled, 1.0)
        return SimilarityMatrix(self.users, scaled, True)

    def to_triples(self) -> pd.DataFrame:
        rows, cols = np.triu_indices(self.m, k=1)
        users = np.array(self.users, dtype=object)
        return pd.DataFrame({"user": users[rows], "other": users[cols], "sim": self.values[rows, cols]})

    @classmethod
    def from_triples(
        cls, frame: pd.DataFrame, users: Optional[Sequence[str]] = None, normalized: bool = False
    ) -> "SimilarityMatrix":
        """Build from (user, other, sim) rows; absent pairs have similarity 0."""
        frame = frame.astype({"user": str, "other": str})
        if users is None:
            users = sorted(set(frame["user"]) | set(frame["other"]))
        index = {u: j for j, u in enumerate(users)}
        values = np.zeros((len(users), len(users)))
        for u, v, s in frame[["user", "other", "sim"]].itertuples(index=False):
            if u not in index or v not in index:
                continue
            values[index[u], index[v]] = values[index[v], index[u]] = float(s)
        np.fill_diagonal(values, 1.0)
        return cls(tuple(users), values, normalized)

    @classmethod
    def uniform(cls, users: Sequence[str], value: float = 1.0) -> "SimilarityMatrix":
        values = np.full((len(users), len(users)), float(value))
        np.fill_diagonal(values, 1.0)
        return cls(tuple(users), values, True)


@dataclass(frozen=True)
class UtilityConfig:
    """Utility of a list for a user: ``phi`` or any effectiveness measure id."""

    kind: str = "phi"
    k: int = 10

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"utility cutoff k must be positive, got {self.k}")


# ---------------------------------------------------------------------------
# Utility
# ---------------------------------------------------------------------------


def _top_relevant(grades: Mapping[str, int], k: int) -> Tuple[str, ...]:
    """Top-k ground-truth items, by relevance then item id."""
    ranked = sorted(((i, g) for i, g in grades.items() if g > 0), key=lambda kv: (-kv[1], kv[0]))
    return tuple(i for i, _ in ranked[:k])


def phi_utility(
    user: str, items: Sequence[str], qrels: Qrels, k: int, owner: Optional[str] = None
) -> Optional[float]:
    """Ground-truth utility for ``user`` of the list ``items`` recommended to ``owner``.

    The user's gain on the top-k list is divided by the user's gain on the
    owner's top-k ground-truth items. ``owner`` defaults to ``user``. ``None``
    when the denominator is zero.
    """
    grades = qrels.relevance.get(user, {})
    owner_grades = qrels.relevance.get(owner if owner is not None else user, {})
    ideal = float(sum(grades.get(i, 0) for i in _top_relevant(owner_grades, k)))
    if ideal == 0:
        return None
    gain = sum(grades.get(i, 0) for i in list(items)[:k])
    return gain / ideal


def _utility_matrix(run: RunSet, qrels: Qrels, users: Sequence[str], utility: UtilityConfig) -> np.ndarray:
    """``U[a, b]``: utility of user b's list for user a.

    For phi, pairs whose denominator is zero are NaN.
    """
    m = len(users)
    if utility.kind == "phi":
        catalog_items = sorted({i for u in users for i in run.items_of(u, utility.k)} | {
            i for u in users for i in qrels.relevant(u)
        })
        col = {i: j for j, i in enumerate(catalog_items)}
        rel = np.zeros((m, len(col)))
        lists = np.zeros((m, len(col)))
        top = np.zeros((m, len(col)))
        for a, u in enumerate(users):
            grades = qrels.relevance.get(u, {})
            for item, g in grades.items():
                if g and item in col:
                    rel[a, col[item]] = g
            for item in _top_relevant(grades, utility.k):
                top[a, col[item]] = 1.0
            for item in run.items_of(u, utility.k):
                lists[a, col[item]] = 1.0
        gain = rel @ lists.T
        ideal = rel @ top.T
        out = np.full((m, m), np.nan)
        np.divide(gain, ideal, out=out, where=ideal > 0)
        return out
    out = np.zeros((m, m))
    for a, u in enumerate(users):
        relevant = qrels.relevant(u)
        for b, v in enumerate(users):
            out[a, b] = score_items(utility.kind, run.items_of(v, utility.k), relevant, utility.k)
    return out


def _utility_users(run: RunSet, qrels: Qrels) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
    keep, dropped = [], []
    for user in run.users:
        (keep if qrels.relevant(user) else dropped).append(user)
    return tuple(keep), tuple(dropped)


# ---------------------------------------------------------------------------
# Similarity-independent measures
# ---------------------------------------------------------------------------


def dispersion(kind: str, scores: PerUserScores) -> MeasureResult:
    """Population SD or Gini of per-user scores."""
    if kind not in ("SD", "Gini"):
        raise ConfigError(f"unknown dispersion measure {kind!r}")
    values = scores.values()
    measure = f"{kind}-{scores.measure}"
    if values.size < 2:
        logger.warning("%s needs at least two users, got %d", measure, values.size)
        return undefined_result(MeasureResult, measure, "original", Direction.LOWER)
    if kind == "SD":
        return MeasureResult(measure, "original", float(np.std(values)), Direction.LOWER)
    value = gini_index(values)
    if math.isnan(value):
        logger.warning("%s is undefined: every user scores zero", measure)
        return undefined_result(MeasureResult, measure, "original", Direction.LOWER)
    return MeasureResult(measure, "original", value, Direction.LOWER)


def envy_matrix(run: RunSet, qrels: Qrels, utility: UtilityConfig) -> Tuple[Tuple[str, ...], np.ndarray]:
    """Pairwise envy ``max(U[a, b] - U[a, a], 0)``; NaN where U[a, b] is undefined."""
    users, dropped = _utility_users(run, qrels)
    if dropped:
        logger.info("envy: %d users without relevant items excluded", len(dropped))
    util = _utility_matrix(run, qrels, users, utility)
    envy = np.fmax(util - np.diag(util)[:, None], 0.0)
    envy[np.isnan(util)] = np.nan
    np.fill_diagonal(envy, 0.0)
    return users, envy


def envy_family(
    kind: str,
    run: RunSet,
    qrels: Qrels,
    k: int = 10,
    utility: Optional[UtilityConfig] = None,
    epsilon: float = 0.05,
) -> MeasureResult:
    """ME, MME or PEU(epsilon) over users with at least one relevant item."""
    if kind not in ("ME", "MME", "PEU"):
        raise ConfigError(f"unknown envy measure {kind!r}")
    utility = utility or UtilityConfig("phi", k)
    params = {"k": utility.k, "utility": utility.kind}
    if kind == "PEU":
        params["epsilon"] = epsilon
    _, dropped = _utility_users(run, qrels)
    users, envy = envy_matrix(run, qrels, utility)
    m = len(users)
    undefined_pairs = int(np.isnan(envy).sum())
    if undefined_pairs:
        logger.info("%s: %d user pairs with a zero utility denominator count as no envy", kind, undefined_pairs)
        envy = np.nan_to_num(envy, nan=0.0)
    if m < 2:
        result = undefined_result(MeasureResult, kind, "original", Direction.LOWER, **params)
    else:
        per_user_max = envy.max(axis=1)
        if kind == "ME":
            score = 2.0 * float(envy.sum()) / (m * (m - 1))
        elif kind == "MME":
            score = float(per_user_max.mean())
        else:
            score = float((per_user_max > epsilon).mean())
        result = MeasureResult(kind, "original", score, Direction.LOWER, params=params)
    if dropped:
        result.warn(EXCLUDED_USERS, len(dropped))
    if undefined_pairs:
        result.warn(UNDEFINED_PAIRS, undefined_pairs)
    return result


# ---------------------------------------------------------------------------
# Similarity kernels
# ---------------------------------------------------------------------------


def _history_matrix(users: Sequence[str], interactions: Interactions) -> Tuple[np.ndarray, Dict[str, int]]:
    items = sorted({i for u in users for i in interactions.items_of(u)})
    col = {i: j for j, i in enumerate(items)}
    hist = np.zeros((len(users), len(items)))
    for row, user in enumerate(users):
        for item in interactions.items_of(user):
            hist[row, col[item]] = 1.0
    return hist, col


def _feature_distributions(
    users: Sequence[str], interactions: Interactions, item_features: Mapping[str, Union[str, Sequence[str]]]
) -> np.ndarray:
    categories = sorted({c for v in item_features.values() for c in ([v] if isinstance(v, str) else v)})
    col = {c: j for j, c in enumerate(categories)}
    dist = np.zeros((len(users), len(categories)))
    for row, user in enumerate(users):
        for item in interactions.items_of(user):
            cats = item_features.get(item, ())
            for c in [cats] if isinstance(cats, str) else cats:
                dist[row, col[c]] += 1.0
    totals = dist.sum(axis=1, keepdims=True)
    return np.divide(dist, totals, out=np.zeros_like(dist), where=totals > 0)


def similarity(
    kind: str,
    interactions: Interactions,
    users: Optional[Sequence[str]] = None,
    item_features: Optional[Mapping[str, Union[str, Sequence[str]]]] = None,
    gamma: float = 0.8,
    normalize: bool = False,
) -> SimilarityMatrix:
    """Pairwise user similarity from interaction histories.

    ``uf`` mixes Jaccard with one minus the base-2 Jensen-Shannon divergence of
    the users' item-feature distributions, weighted by ``gamma``.
    """
    if kind not in SIMILARITY_KINDS:
        raise ConfigError(f"unknown similarity kind {kind!r}, expected one of {SIMILARITY_KINDS}")
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError(f"gamma must lie in [0, 1], got {gamma}")
    users = tuple(users) if users is not None else tuple(sorted(interactions.users))
    hist, _ = _history_matrix(users, interactions)
    sizes = hist.sum(axis=1)
    empty = sizes == 0
    if empty.any():
        logger.warning("%d users have an empty history, similarity 0 to every other user", int(empty.sum()))
    inter = hist @ hist.T
    if kind == "cosine":
        norms = np.sqrt(np.outer(sizes, sizes))
        values = np.divide(inter, norms, out=np.zeros_like(inter), where=norms > 0)
    else:
        union = sizes[:, None] + sizes[None, :] - inter
        values = np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)
    if kind == "uf":
        if item_features is None:
            raise ConfigError("uf similarity needs item features")
        dist = _feature_distributions(users, interactions, item_features)
        m = len(users)
        js_sim = np.zeros((m, m))
        for a in range(m):
            for b in range(a + 1, m):
                if empty[a] or empty[b]:
                    continue
                divergence = jensenshannon(dist[a], dist[b], base=2) ** 2
                js_sim[a, b] = js_sim[b, a] = 1.0 - divergence
        values = gamma * values + (1.0 - gamma) * js_sim
    values[empty, :] = 0.0
    values[:, empty] = 0.0
    np.fill_diagonal(values, 1.0)
    matrix = SimilarityMatrix(users, values)
    return matrix.normalize() if normalize else matrix


# ---------------------------------------------------------------------------
# Similarity-aware measures
# ---------------------------------------------------------------------------


def _row_blocks(m: int, block: int) -> Iterator[slice]:
    for start in range(0, m, block):
        yield slice(start, min(start + block, m))


def _item_distances(items: Sequence[str], item_vectors: Mapping[str, np.ndarray]) -> np.ndarray:
    dim = len(next(iter(item_vectors.values()))) if item_vectors else 0
    mat = np.array([np.asarray(item_vectors.get(i, np.zeros(dim)), dtype=float) for i in items])
    with np.errstate(invalid="ignore", divide="ignore"):
        dist = cdist(mat, mat, metric="cosine")
    # Zero vectors have no direction; treat them as orthogonal to everything.
    return np.nan_to_num(dist, nan=1.0)


def one_hot_item_vectors(interactions: Interactions, users: Optional[Sequence[str]] = None) -> Dict[str, np.ndarray]:
    """Item columns of the user-item interaction matrix."""
    users = tuple(users) if users is not None else tuple(sorted(interactions.users))
    hist, col = _history_matrix(users, interactions)
    return {item: hist[:, j] for item, j in col.items()}


def uf(
    run: RunSet,
    sim: SimilarityMatrix,
    k: int = 10,
    item_vectors: Optional[Mapping[str, np.ndarray]] = None,
    interactions: Optional[Interactions] = None,
    threshold: Optional[float] = None,
    log_base: Optional[float] = None,
    block: int = PAIR_BLOCK,
) -> MeasureResult:
    """Similarity-weighted recommendation distance of similar user pairs, on a log scale."""
    users = [u for u in run.users if u in sim.index]
    m = len(users)
    n_pairs = m * (m - 1) // 2
    base = float(log_base) if log_base is not None else float(n_pairs)
    params = {"k": k, "log_base": base}
    if m < 2:
        return undefined_result(MeasureResult, "UF", "original", Direction.LOWER, **params)
    sub = sim.restrict(users)
    pairs = sub.pair_values()
    t = float(pairs.mean() + pairs.std()) if threshold is None else float(threshold)
    params["threshold"] = t
    if item_vectors is None:
        if interactions is None:
            raise ConfigError("UF needs item vectors or interactions for one-hot item vectors")
        item_vectors = one_hot_item_vectors(interactions)
    items = sorted({i for u in users for i in run.items_of(u, k)})
    col = {i: j for j, i in enumerate(items)}
    lists = np.zeros((m, len(items)))
    for row, user in enumerate(users):
        for item in run.items_of(user, k):
            lists[row, col[item]] = 1.0
    dist = _item_distances(items, item_vectors)
    total = 0.0
    contributing = 0
    for rows in _row_blocks(m, block):
        d_l = (lists[rows] @ dist @ lists.T) / (k * k)
        s = sub.values[rows]
        upper = np.triu(np.ones((rows.stop - rows.start, m), dtype=bool), k=rows.start + 1)
        mask = upper & (s >= t)
        contributing += int(mask.sum())
        total += float((s * d_l)[mask].sum())
    if contributing == 0:
        logger.warning("UF: no user pair reaches similarity threshold %.6g", t)
        return undefined_result(MeasureResult, "UF", "original", Direction.LOWER, **params)
    if total <= 0 or base <= 0 or base == 1:
        logger.warning("UF: log argument %.6g with base %.6g is undefined", total, base)
        result = undefined_result(MeasureResult, "UF", "original", Direction.LOWER, **params)
        result.params["log_argument"] = total
        return result
    result = MeasureResult("UF", "original", math.log(total) / math.log(base), Direction.LOWER, params=params)
    result.params["pairs"] = contributing
    return result


def puf(scores: PerUserScores, sim: SimilarityMatrix, block: int = PAIR_BLOCK) -> MeasureResult:
    """Similarity-weighted mean absolute effectiveness gap over unordered user pairs."""
    users = list(scores.users)
    values = scores.values()
    m = len(users)
    measure = f"PUF-{scores.measure}"
    if m < 2:
        return undefined_result(MeasureResult, measure, "original", Direction.LOWER)
    if values.min() < 0 or values.max() > 1:
        raise ValidationError(f"{measure}: effectiveness scores must lie in [0, 1]")
    sub = sim.restrict(users)
    if sub.pair_values().min(initial=0.0) < 0 or sub.pair_values().max(initial=0.0) > 1:
        raise ValidationError(f"{measure}: similarity must lie in [0, 1], normalise it first")
    total = 0.0
    for rows in _row_blocks(m, block):
        gaps = np.abs(values[rows, None] - values[None, :])
        total += float((sub.values[rows] * gaps).sum())
    # Every unordered pair was counted twice; the diagonal contributes nothing.
    score = total / (m * (m - 1))
    return MeasureResult(measure, "original", score, Direction.LOWER)


def evaluate_user_suite(
    run: RunSet,
    qrels: Qrels,
    k: int = 10,
    sim: Optional[SimilarityMatrix] = None,
    interactions: Optional[Interactions] = None,
    effectiveness: Sequence[str] = ("P", "NDCG"),
    epsilon: float = 0.05,
    uf_threshold: Optional[float] = None,
) -> Dict[str, MeasureResult]:
    """Every individual user fairness measure applicable to the given inputs."""
    out: Dict[str, MeasureResult] = {}
    for measure in effectiveness:
        per_user = per_user_effectiveness(measure, run, qrels, k)
        for kind in ("SD", "Gini"):
            res = dispersion(kind, per_user)
            out[res.measure] = res
        if sim is not None:
            res = puf(per_user, sim)
            out[res.measure] = res
    for kind in ("ME", "MME", "PEU"):
        out[kind] = envy_family(kind, run, qrels, k, epsilon=epsilon)
    if sim is not None and interactions is not None:
        out["UF"] = uf(run, sim, k, interactions=interactions, threshold=uf_threshold)
    undefined = [name for name, r in out.items() if UNDEFINED in r.warnings]
    if undefined:
        logger.warning("undefined user fairness measures: %s", ", ".join(undefined))
    return out
