"""Shared domain types, input validation and exposure accounting.

Every measure module consumes the immutable containers defined here. Identifiers
are opaque strings; dense integer indices follow the order of the ``Catalog``
(items) and of the ``RunSet`` (users).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, UndefinedMeasureError, ValidationError

logger = logging.getLogger(__name__)

# Machine-readable warning codes carried by every result object.
UNDEFINED = "UNDEFINED"
ALWAYS_FAIR = "ALWAYS_FAIR"
CONSTANT = "CONSTANT"
SINGLE_RELEVANT_USERS = "SINGLE_RELEVANT_USERS"
EXCLUDED_USERS = "EXCLUDED_USERS"
DEGENERATE = "DEGENERATE"
EXACT_TEST_UNAVAILABLE = "EXACT_TEST_UNAVAILABLE"
SKIPPED_REPLACEMENTS = "SKIPPED_REPLACEMENTS"
EARLY_STOP = "EARLY_STOP"
CLIPPED = "CLIPPED"
UNDEFINED_PAIRS = "UNDEFINED_PAIRS"

WARNING_CODES = (
    UNDEFINED,
    ALWAYS_FAIR,
    CONSTANT,
    SINGLE_RELEVANT_USERS,
    EXCLUDED_USERS,
    DEGENERATE,
    EXACT_TEST_UNAVAILABLE,
    SKIPPED_REPLACEMENTS,
    EARLY_STOP,
    CLIPPED,
    UNDEFINED_PAIRS,
)


class Direction(str, Enum):
    HIGHER = "higher"
    LOWER = "lower"


class Variant(str, Enum):
    ORIGINAL = "original"
    DEFINED = "defined"
    CORRECTED = "corrected"


# ---------------------------------------------------------------------------
# Result containers
# ---------------------------------------------------------------------------


@dataclass
class MeasureResult:
    """A single measure score with direction, parameters and warnings."""

    measure: str
    variant: str
    score: float
    direction: Direction
    params: Dict[str, Any] = field(default_factory=dict)
    warnings: Dict[str, Any] = field(default_factory=dict)

    @property
    def undefined(self) -> bool:
        return UNDEFINED in self.warnings or self.score is None or math.isnan(self.score)

    def warn(self, code: str, value: Any = True) -> "MeasureResult":
        self.warnings[code] = value
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "measure": self.measure,
            "variant": self.variant,
            "score": self.score,
            "direction": self.direction.value,
            "params": dict(self.params),
            "warnings": dict(self.warnings),
        }


@dataclass
class ExposureMeasureResult(MeasureResult):
    """Score of an exposure-based item fairness measure."""


@dataclass
class JointMeasureResult(MeasureResult):
    """Score of a relevance-aware measure, with the per-user breakdown when it averages over users."""

    per_user: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        out = super().to_dict()
        if self.per_user:
            out["per_user"] = dict(self.per_user)
        return out


@dataclass(frozen=True)
class BoundsResult:
    most_unfair: float
    most_fair: float
    formula: str
    direction: Direction = Direction.HIGHER

    def to_dict(self) -> Dict[str, Any]:
        return {
            "most_unfair": self.most_unfair,
            "most_fair": self.most_fair,
            "formula": self.formula,
            "direction": self.direction.value,
        }


def undefined_result(cls, measure: str, variant: str, direction: Direction, **params: Any):
    """Result flagged undefined with a NaN score."""
    return cls(measure, variant, float("nan"), direction, params=params, warnings={UNDEFINED: True})


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Catalog:
    items: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(str(i) for i in self.items))
        if not self.items:
            raise ValidationError("catalog must contain at least one item")
        seen = set()
        for item in self.items:
            if item in seen:
                raise ValidationError("duplicate item in catalog", item=item)
            seen.add(item)

    @property
    def n(self) -> int:
        return len(self.items)

    @cached_property
    def index(self) -> Dict[str, int]:
        return {item: j for j, item in enumerate(self.items)}

    def __contains__(self, item: str) -> bool:
        return item in self.index

    @classmethod
    def numbered(cls, n: int, prefix: str = "i") -> "Catalog":
        """Catalog ``i1..in``."""
        return cls(tuple(f"{prefix}{j}" for j in range(1, n + 1)))


@dataclass(frozen=True)
class RunSet:
    """Per-user ranked item lists. Position ``p`` in a list is rank ``p + 1``."""

    lists: Mapping[str, Tuple[str, ...]]
    scores: Optional[Mapping[str, Tuple[float, ...]]] = None
    ranks: Optional[Mapping[str, Tuple[int, ...]]] = None

    def __post_init__(self):
        object.__setattr__(self, "lists", {str(u): tuple(str(i) for i in items) for u, items in self.lists.items()})
        if self.scores is not None:
            object.__setattr__(self, "scores", {u: tuple(float(s) for s in v) for u, v in self.scores.items()})
        if not self.lists:
            raise ValidationError("run must contain at least one user")

    @property
    def users(self) -> Tuple[str, ...]:
        return tuple(self.lists.keys())

    @property
    def m(self) -> int:
        return len(self.lists)

    def items_of(self, user: str, k: Optional[int] = None) -> Tuple[str, ...]:
        items = self.lists.get(user, ())
        return items if k is None else items[:k]

    def scores_of(self, user: str) -> Optional[Tuple[float, ...]]:
        if self.scores is None:
            return None
        return self.scores.get(user)

    def truncate(self, k: int) -> "RunSet":
        scores = None
        if self.scores is not None:
            scores = {u: s[:k] for u, s in self.scores.items()}
        return RunSet({u: items[:k] for u, items in self.lists.items()}, scores=scores)

    @classmethod
    def from_lists(
        cls,
        lists: Mapping[str, Sequence[str]],
        scores: Optional[Mapping[str, Sequence[float]]] = None,
    ) -> "RunSet":
        return cls(
            {u: tuple(items) for u, items in lists.items()},
            scores=None if scores is None else {u: tuple(s) for u, s in scores.items()},
        )


@dataclass(frozen=True)
class Qrels:
    """Binary ground-truth relevance per (user, item)."""

    relevance: Mapping[str, Mapping[str, int]]

    def __post_init__(self):
        clean: Dict[str, Dict[str, int]] = {}
        for user, grades in self.relevance.items():
            row: Dict[str, int] = {}
            for item, grade in grades.items():
                if grade not in (0, 1):
                    raise ValidationError(
                        f"graded relevance {grade!r} is not supported, grades must be 0 or 1",
                        user=str(user),
                        item=str(item),
                    )
                row[str(item)] = int(grade)
            clean[str(user)] = row
        object.__setattr__(self, "relevance", clean)

    @property
    def users(self) -> Tuple[str, ...]:
        return tuple(self.relevance.keys())

    def relevant(self, user: str) -> FrozenSet[str]:
        return frozenset(i for i, g in self.relevance.get(user, {}).items() if g == 1)

    def grade(self, user: str, item: str) -> int:
        return self.relevance.get(user, {}).get(item, 0)

    def is_empty(self) -> bool:
        return not any(self.relevant(u) for u in self.relevance)

    def matrix(self, users: Sequence[str], catalog: Catalog) -> np.ndarray:
        """Dense (len(users), n) relevance matrix in catalog order."""
        out = np.zeros((len(users), catalog.n))
        for row, user in enumerate(users):
            for item in self.relevant(user):
                if item in catalog:
                    out[row, catalog.index[item]] = 1.0
        return out

    @classmethod
    def from_relevant_sets(cls, relevant: Mapping[str, Iterable[str]]) -> "Qrels":
        return cls({u: {i: 1 for i in items} for u, items in relevant.items()})


@dataclass(frozen=True)
class Interactions:
    """Per-user historical items (train/validation), with optional weights and timestamps."""

    history: Mapping[str, FrozenSet[str]]
    weights: Mapping[Tuple[str, str], float] = field(default_factory=dict)
    timestamps: Mapping[Tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "history", {str(u): frozenset(str(i) for i in items) for u, items in self.history.items()})

    @property
    def users(self) -> Tuple[str, ...]:
        return tuple(self.history.keys())

    def items_of(self, user: str) -> FrozenSet[str]:
        return self.history.get(user, frozenset())

    @classmethod
    def empty(cls) -> "Interactions":
        return cls({})

    @classmethod
    def from_sets(cls, history: Mapping[str, Iterable[str]]) -> "Interactions":
        return cls({u: frozenset(items) for u, items in history.items()})


@dataclass(frozen=True)
class GroupTable:
    """Categorical user attributes; ``partition`` derives the groups for a chosen attribute combination."""

    attributes: Mapping[str, Mapping[str, str]]

    @property
    def attribute_names(self) -> Tuple[str, ...]:
        names = set()
        for values in self.attributes.values():
            names.update(values.keys())
        return tuple(sorted(names))

    def partition(self, attributes: Sequence[str]) -> Dict[Tuple[str, ...], Tuple[str, ...]]:
        """Intersectional groups keyed by the tuple of attribute values; empty combinations never appear."""
        if not attributes:
            raise ConfigError("at least one attribute is required to partition users")
        groups: Dict[Tuple[str, ...], List[str]] = {}
        for user, values in self.attributes.items():
            if not all(a in values for a in attributes):
                continue
            key = tuple(str(values[a]) for a in attributes)
            groups.setdefault(key, []).append(user)
        return {key: tuple(members) for key, members in sorted(groups.items())}


class ExamKind(str, Enum):
    UNIFORM = "uniform"
    LINEAR = "linear"
    LINEAR_NORMALIZED_ORIGINAL = "linear-normalized-original"
    LINEAR_NORMALIZED_CORRECTED = "linear-normalized-corrected"
    DCG = "dcg"
    RBP = "rbp"
    INVERSE = "inverse"


_LINEAR_KINDS = (ExamKind.LINEAR, ExamKind.LINEAR_NORMALIZED_ORIGINAL, ExamKind.LINEAR_NORMALIZED_CORRECTED)


@dataclass(frozen=True)
class ExamFn:
    """Examination function: the probability a user sees the item at a rank position."""

    kind: ExamKind
    k: int
    gamma: float = 0.8
    truncate: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", ExamKind(self.kind))
        if self.k < 1:
            raise ConfigError(f"cutoff k must be positive, got {self.k}")
        if self.kind == ExamKind.RBP and not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"RBP patience gamma must lie in (0, 1), got {self.gamma}")

    def weight(self, position: int) -> float:
        if position < 1:
            raise ConfigError(f"rank positions start at 1, got {position}")
        return float(self.weights(np.array([position]))[0])

    def weights(self, positions: np.ndarray) -> np.ndarray:
        """Vectorised weights; position 0 marks an absent item and weighs 0."""
        z = np.asarray(positions, dtype=float)
        present = z >= 1
        safe = np.where(present, z, 1.0)
        k = self.k
        if self.kind == ExamKind.UNIFORM:
            w = np.ones_like(safe)
        elif self.kind == ExamKind.LINEAR:
            w = k + 1 - safe
        elif self.kind == ExamKind.LINEAR_NORMALIZED_ORIGINAL:
            if k == 1:
                raise UndefinedMeasureError("linear-normalized-original examination is undefined at k=1 (division by k-1)")
            w = (k - safe) / (k - 1)
        elif self.kind == ExamKind.LINEAR_NORMALIZED_CORRECTED:
            w = (k + 1 - safe) / k
        elif self.kind == ExamKind.DCG:
            w = 1.0 / np.log2(safe + 1)
        elif self.kind == ExamKind.RBP:
            w = self.gamma ** (safe - 1)
        else:
            w = 1.0 / safe
        if self.truncate or self.kind in _LINEAR_KINDS:
            w = np.where(safe > k, 0.0, w)
        return np.where(present, w, 0.0)


@dataclass(frozen=True)
class Cutoff:
    k: int
    rerank_depth: Optional[int] = None
    rounds: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"cutoff k must be positive, got {self.k}")
        if self.rerank_depth is not None and self.rerank_depth < self.k:
            raise ConfigError(f"rerank depth k'={self.rerank_depth} must be at least k={self.k}")
        if self.rounds < 1:
            raise ConfigError(f"rounds W must be positive, got {self.rounds}")

    def check(self, catalog: Catalog) -> "Cutoff":
        if self.k > catalog.n:
            raise ConfigError(f"cutoff k={self.k} exceeds catalog size n={catalog.n}")
        if self.rerank_depth is not None and self.rerank_depth > catalog.n:
            raise ConfigError(f"rerank depth k'={self.rerank_depth} exceeds catalog size n={catalog.n}")
        return self


def resolve_k(k: Union[int, Cutoff]) -> int:
    value = k.k if isinstance(k, Cutoff) else int(k)
    if value < 1:
        raise ConfigError(f"cutoff k must be positive, got {value}")
    return value


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def validate_run(run: RunSet, catalog: Catalog) -> RunSet:
    """Return ``run`` if every list is duplicate free, uses catalog items and has contiguous ranks."""
    for user, items in run.lists.items():
        seen = set()
        for item in items:
            if item in seen:
                raise ValidationError("duplicate item in recommendation list", user=user, item=item)
            if item not in catalog:
                raise ValidationError("unknown item, not in catalog", user=user, item=item)
            seen.add(item)
        if run.ranks is not None and user in run.ranks:
            ranks = tuple(run.ranks[user])
            if ranks != tuple(range(1, len(items) + 1)):
                raise ValidationError(f"non-contiguous ranks {list(ranks)}", user=user)
        scores = run.scores_of(user)
        if scores is not None and len(scores) != len(items):
            raise ValidationError("score count does not match list length", user=user)
    return run


def validate_interactions(interactions: Interactions, catalog: Catalog) -> Interactions:
    for user, items in interactions.history.items():
        for item in sorted(items):
            if item not in catalog:
                raise ValidationError("unknown item in interactions", user=user, item=item)
    return interactions


def exposure_vector(run: RunSet, k: Union[int, Cutoff], catalog: Catalog) -> np.ndarray:
    """Top-k recommendation counts in catalog order."""
    k = resolve_k(k)
    counts = np.zeros(catalog.n, dtype=np.int64)
    index = catalog.index
    for items in run.lists.values():
        for item in items[:k]:
            counts[index[item]] += 1
    return counts


def exposure_counts(run: RunSet, k: Union[int, Cutoff], catalog: Catalog) -> Dict[str, int]:
    """How many times each catalog item is recommended in the top k; unrecommended items map to 0."""
    counts = exposure_vector(run, k, catalog)
    return {item: int(c) for item, c in zip(catalog.items, counts)}


def weighted_exposure(run: RunSet, catalog: Catalog, exam: ExamFn) -> np.ndarray:
    """Position-weighted exposure per catalog item, summed over users."""
    return exam.weights(rank_matrix(run, catalog, depth=exam.k)).sum(axis=0)


def rank_matrix(
    run: RunSet,
    catalog: Catalog,
    users: Optional[Sequence[str]] = None,
    depth: Optional[int] = None,
) -> np.ndarray:
    """(m, n) integer matrix of 1-based ranks; 0 where the item is absent or below ``depth``."""
    users = run.users if users is None else tuple(users)
    out = np.zeros((len(users), catalog.n), dtype=np.int64)
    index = catalog.index
    for row, user in enumerate(users):
        items = run.items_of(user, depth)
        for pos, item in enumerate(items, start=1):
            out[row, index[item]] = pos
    return out


def item_order(catalog: Catalog, values: np.ndarray, descending: bool = False) -> np.ndarray:
    """Stable sort of catalog indices by value with item-id ascending as tiebreak."""
    ids = np.array(catalog.items, dtype=object)
    id_rank = np.argsort(ids, kind="stable")
    tiebreak = np.empty(catalog.n, dtype=np.int64)
    tiebreak[id_rank] = np.arange(catalog.n)
    key = -np.asarray(values, dtype=float) if descending else np.asarray(values, dtype=float)
    return np.lexsort((tiebreak, key))


def round_exposure(
    rounds: Sequence[RunSet],
    users: Sequence[str],
    catalog: Catalog,
    exam: ExamFn,
    depth: Optional[int] = None,
) -> np.ndarray:
    """(m, n) examination weights averaged over the rounds in which each user has a list.

    ``depth`` limits the ranks read from each list; it defaults to the exam cutoff
    when the exam truncates, and to the full list otherwise.
    """
    if depth is None and exam.truncate:
        depth = exam.k
    total = np.zeros((len(users), catalog.n))
    seen = np.zeros(len(users))
    for run in rounds:
        total += exam.weights(rank_matrix(run, catalog, users=users, depth=depth))
        seen += np.array([u in run.lists for u in users], dtype=float)
    return total / np.maximum(seen, 1.0)[:, None]
