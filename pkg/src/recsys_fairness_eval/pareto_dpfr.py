"""Pareto frontier of relevance and item fairness, and Distance to Pareto Frontier (DPFR).

The frontier is generated from the ground truth: ``oracle`` builds the most
relevant top-k output and ``oracle2fair`` then swaps out over-exposed items one
user at a time until every item is recommended at most ceil(km/n) times.
Measures are recorded at checkpoints, giving a ``ParetoTrace`` from which the
frontier of any (relevance, fairness) measure pair is read.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd

from .core_model import (
    DEGENERATE,
    EARLY_STOP,
    SKIPPED_REPLACEMENTS,
    Catalog,
    Direction,
    Interactions,
    Qrels,
    RunSet,
    exposure_vector,
)
from .effectiveness import mean_effectiveness, per_user_effectiveness
from .errors import ConfigError, FairnessEvalError, NormalizationDegenerateError, ValidationError
from . import exposure_fairness as ef

logger = logging.getLogger(__name__)

REL_MEASURES = ("HR", "MRR", "P", "MAP", "R", "NDCG")
FAIR_MEASURES = ("Jain", "QF", "Ent", "Gini", "FSat")
# Measures paired into frontiers by default; the rest are only checkpointed.
PAIR_REL = ("P", "MAP", "R", "NDCG")
DEFAULT_FAIR = ("Jain", "Ent", "Gini")

# Full recount of exposure after this many incremental updates.
RECOUNT_EVERY = 1000


@dataclass(frozen=True)
class FrontierPoint:
    rel: float
    fair: float
    checkpoint: int = 0

    def as_array(self) -> np.ndarray:
        return np.array([self.rel, self.fair])


@dataclass(frozen=True)
class MeasurePair:
    rel: str
    fair: str
    fair_direction: Direction = Direction.HIGHER

    @property
    def id(self) -> str:
        return f"{self.rel}|{self.fair}"


@dataclass(frozen=True)
class Frontier:
    """Deduplicated frontier sorted by descending relevance.

    ``start`` and ``end`` are the raw first and last checkpoints, kept for the
    pair gradient even when deduplication collapses the frontier.
    """

    pair: MeasurePair
    points: Tuple[FrontierPoint, ...]
    start: Optional[FrontierPoint] = None
    end: Optional[FrontierPoint] = None
    estimated: bool = False

    def __len__(self) -> int:
        return len(self.points)

    def coordinates(self) -> np.ndarray:
        return np.array([[p.rel, p.fair] for p in self.points]).reshape(-1, 2)

    @property
    def gradient(self) -> Optional[float]:
        return pair_gradient(self)

    @property
    def fit(self) -> bool:
        g = self.gradient
        return g is not None and g != 0


@dataclass
class Checkpoint:
    index: int
    replacements: int
    scores: Dict[str, float]


@dataclass
class ParetoTrace:
    """Checkpointed measure scores along one frontier generation."""

    k: int
    target: int
    checkpoints: List[Checkpoint] = field(default_factory=list)
    directions: Dict[str, Direction] = field(default_factory=dict)
    final_run: Optional[RunSet] = None
    warnings: Dict[str, object] = field(default_factory=dict)
    estimated: bool = False

    @property
    def measures(self) -> Tuple[str, ...]:
        return tuple(self.checkpoints[0].scores) if self.checkpoints else ()

    def frontier(self, rel: str, fair: str) -> Frontier:
        if not self.checkpoints:
            raise ValidationError("trace holds no checkpoints")
        for name in (rel, fair):
            if name not in self.checkpoints[0].scores:
                raise ConfigError(f"measure {name!r} was not recorded, available: {self.measures}")
        pair = MeasurePair(rel, fair, self.directions.get(fair, Direction.HIGHER))
        raw = [FrontierPoint(c.scores[rel], c.scores[fair], c.index) for c in self.checkpoints]
        raw = [p for p in raw if math.isfinite(p.rel) and math.isfinite(p.fair)]
        if not raw:
            raise ValidationError(f"{pair.id}: no finite checkpoint")
        deduped = dedupe_frontier(raw, pair.fair_direction)
        return Frontier(pair, deduped, raw[0], raw[-1], self.estimated)

    def to_frame(self) -> pd.DataFrame:
        rows = [{"checkpoint": c.index, "replacements": c.replacements, **c.scores} for c in self.checkpoints]
        return pd.DataFrame(rows)

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        k: int = 0,
        target: int = 0,
        directions: Optional[Mapping[str, Direction]] = None,
        estimated: bool = False,
    ) -> "ParetoTrace":
        measures = [c for c in frame.columns if c not in ("checkpoint", "replacements")]
        checkpoints = [
            Checkpoint(int(row["checkpoint"]), int(row["replacements"]), {m: float(row[m]) for m in measures})
            for _, row in frame.iterrows()
        ]
        if directions is None:
            directions = {m: _direction(m) for m in measures}
        return cls(k, target, checkpoints, dict(directions), estimated=estimated)


def _direction(measure: str) -> Direction:
    if measure in REL_MEASURES:
        return Direction.HIGHER
    base = measure.split(":")[0]
    return ef.DIRECTIONS.get(base, Direction.HIGHER)


# ---------------------------------------------------------------------------
# Frontier post-processing and scoring
# ---------------------------------------------------------------------------


def _better(a: float, b: float, direction: Direction) -> bool:
    return a > b if direction == Direction.HIGHER else a < b


def dedupe_frontier(
    points: Sequence[FrontierPoint], direction: Direction = Direction.HIGHER
) -> Tuple[FrontierPoint, ...]:
    """Keep the fairest point per relevance value, then drop dominated points."""
    best: Dict[float, FrontierPoint] = {}
    for p in points:
        key = round(p.rel, 12)
        if key not in best or _better(p.fair, best[key].fair, direction):
            best[key] = p
    ordered = sorted(best.values(), key=lambda p: (-p.rel, p.checkpoint))
    kept: List[FrontierPoint] = []
    for p in ordered:
        if not kept or _better(p.fair, kept[-1].fair, direction):
            kept.append(p)
    return tuple(kept)


def _dominates(a: FrontierPoint, b: FrontierPoint, direction: Direction) -> bool:
    fair_ge = a.fair >= b.fair if direction == Direction.HIGHER else a.fair <= b.fair
    return a.rel >= b.rel and fair_ge and (a.rel > b.rel or a.fair != b.fair)


def is_mutually_nondominated(points: Sequence[FrontierPoint], direction: Direction = Direction.HIGHER) -> bool:
    return not any(
        _dominates(a, b, direction) for i, a in enumerate(points) for j, b in enumerate(points) if i != j
    )


def pair_gradient(frontier: Frontier) -> Optional[float]:
    """Slope between the first and last checkpoint; ``None`` when relevance does not move."""
    start = frontier.start or (frontier.points[0] if frontier.points else None)
    end = frontier.end or (frontier.points[-1] if frontier.points else None)
    if start is None or end is None or start.rel == end.rel:
        return None
    return (end.fair - start.fair) / (end.rel - start.rel)


def reference_point(frontier: Frontier, alpha: float = 0.5, interpolate: Optional[bool] = None) -> FrontierPoint:
    """Point at alpha of the frontier's arc length, walking from the relevance-best end.

    On a full frontier this is the checkpoint whose cumulative arc length is
    closest to alpha of the total. An estimated frontier is too sparse for
    that, so the point is interpolated on the segment holding the exact arc
    position; it carries the checkpoint index of the segment start.
    ``interpolate`` overrides the choice.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    if not frontier.points:
        raise ValidationError("cannot take a reference point on an empty frontier")
    if len(frontier.points) == 1:
        logger.warning("%s: single-point frontier, reference point is that point", frontier.pair.id)
        return frontier.points[0]
    if interpolate is None:
        interpolate = frontier.estimated
    coords = frontier.coordinates()
    segments = np.linalg.norm(np.diff(coords, axis=0), axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(segments)])
    target = alpha * cumulative[-1]
    if not interpolate:
        # argmin returns the first index on ties.
        j = int(np.argmin(np.abs(cumulative - target)))
        return frontier.points[j]
    if target >= cumulative[-1]:
        return frontier.points[-1]
    j = min(int(np.searchsorted(cumulative, target, side="right")) - 1, len(segments) - 1)
    t = (target - cumulative[j]) / segments[j] if segments[j] > 0 else 0.0
    if t <= 0.0:
        return frontier.points[j]
    if t >= 1.0:
        return frontier.points[j + 1]
    rel, fair = coords[j] + t * (coords[j + 1] - coords[j])
    return FrontierPoint(float(rel), float(fair), frontier.points[j].checkpoint)


def dpfr(model_point: Tuple[float, float], ref: FrontierPoint) -> float:
    """Euclidean distance in raw (relevance, fairness) coordinates."""
    return float(math.hypot(model_point[0] - ref.rel, model_point[1] - ref.fair))


def score_models(
    models: Mapping[str, Tuple[float, float]], frontier: Frontier, alpha: float = 0.5
) -> List[Tuple[str, float]]:
    """DPFR of every model against one frontier, best (closest) first; ties by name."""
    ref = reference_point(frontier, alpha)
    scored = [(name, dpfr(point, ref)) for name, point in models.items()]
    return sorted(scored, key=lambda kv: (kv[1], kv[0]))


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckpointPolicy:
    """Record measures before the first replacement, every ``every`` replacements (at most ``limit`` times) and at the end."""

    every: int = 1
    limit: Optional[int] = None

    def __post_init__(self):
        if self.every < 1:
            raise ConfigError(f"checkpoint interval must be positive, got {self.every}")

    def due(self, step: int) -> bool:
        if step % self.every:
            return False
        return self.limit is None or step // self.every <= self.limit


@dataclass(frozen=True)
class MeasureSet:
    """Measures recorded at every checkpoint, all eleven by default."""

    rel: Tuple[str, ...] = REL_MEASURES
    fair: Tuple[str, ...] = FAIR_MEASURES
    variant: str = "corrected"

    def __post_init__(self):
        unknown = [m for m in self.rel if m not in REL_MEASURES] + [m for m in self.fair if m not in FAIR_MEASURES]
        if unknown:
            raise ConfigError(f"measures not supported on a frontier: {unknown}")

    def pairs(self) -> List[Tuple[str, str]]:
        return measure_pairs(self.rel, self.fair)


def measure_pairs(rel: Sequence[str], fair: Sequence[str]) -> List[Tuple[str, str]]:
    """(relevance, fairness) pairs drawn from PAIR_REL x DEFAULT_FAIR.

    Falls back to every combination when the recorded measures hold none of them.
    """
    pairs = [(r, f) for r in rel if r in PAIR_REL for f in fair if f in DEFAULT_FAIR]
    return pairs or [(r, f) for r in rel for f in fair]


def checkpoint_scores(run: RunSet, qrels: Qrels, catalog: Catalog, k: int, measures: MeasureSet) -> Dict[str, float]:
    out: Dict[str, float] = {}
    for name in measures.rel:
        out[name] = mean_effectiveness(per_user_effectiveness(name, run, qrels, k))[0]
    fair_fns: Dict[str, Callable] = {
        "Jain": ef.jain,
        "QF": ef.qf,
        "Ent": ef.entropy,
        "Gini": ef.gini,
        "FSat": ef.fsat,
    }
    for name in measures.fair:
        try:
            out[name] = fair_fns[name](run, catalog, k, measures.variant).score
        except NormalizationDegenerateError as e:
            logger.warning("%s %s at checkpoint: %s", name, measures.variant, e)
            out[name] = float("nan")
    return out


class _State:
    """Mutable recommendation state shared by the oracle and the replacement loop."""

    def __init__(self, qrels: Qrels, interactions: Interactions, catalog: Catalog, k: int):
        self.catalog = catalog
        self.k = k
        self.users = tuple(sorted(qrels.users))
        self.relevant: Dict[str, Set[str]] = {}
        self.history: Dict[str, frozenset] = {}
        for user in self.users:
            history = interactions.items_of(user)
            rel = set(qrels.relevant(user)) - set(history)
            unknown = rel - set(catalog.items)
            if unknown:
                raise ValidationError(f"relevant items outside the catalog: {sorted(unknown)[:5]}", user=user)
            self.relevant[user] = rel
            self.history[user] = history
        self.rec: Dict[str, List[str]] = {}
        self.count: Dict[str, int] = {i: 0 for i in catalog.items}
        self.order = catalog.index

    def place(self, user: str, items: Sequence[str]) -> None:
        self.rec[user] = list(items)
        for item in items:
            self.count[item] += 1

    def least_exposed(self, pool) -> List[str]:
        return sorted(pool, key=lambda i: (self.count[i], self.order[i]))

    def recount(self) -> Dict[str, int]:
        fresh = {i: 0 for i in self.catalog.items}
        for items in self.rec.values():
            for item in items:
                fresh[item] += 1
        return fresh

    def run(self) -> RunSet:
        return RunSet({u: tuple(self.rec[u]) for u in self.users})


def _oracle_state(qrels: Qrels, interactions: Interactions, catalog: Catalog, k: int) -> _State:
    state = _State(qrels, interactions, catalog, k)
    if not state.users:
        raise ValidationError("qrels hold no users")
    sizes = {u: len(state.relevant[u]) for u in state.users}

    for user in state.users:
        if sizes[user] == k:
            state.place(user, sorted(state.relevant[user], key=state.order.__getitem__))

    for size in range(k + 1, max(sizes.values()) + 1):
        cohort = [u for u in state.users if sizes[u] == size]
        # Users whose relevant items are least exposed so far go first.
        weight = {u: sum(state.count[i] for i in state.relevant[u]) for u in cohort}
        for user in sorted(cohort, key=lambda u: (weight[u], u)):
            chosen = state.least_exposed(state.relevant[user])[:k]
            state.place(user, sorted(chosen, key=state.order.__getitem__))

    short = 0
    for user in state.users:
        if sizes[user] >= k:
            continue
        items = sorted(state.relevant[user], key=state.order.__getitem__)
        blocked = set(state.history[user]) | set(items)
        state.place(user, items)
        while len(state.rec[user]) < k:
            pool = [i for i in catalog.items if i not in blocked]
            if not pool:
                short += 1
                break
            filler = state.least_exposed(pool)[0]
            state.rec[user].append(filler)
            state.count[filler] += 1
            blocked.add(filler)
    if short:
        logger.warning("oracle: %d users could not be filled to k=%d items", short, k)
    return state


def oracle(qrels: Qrels, interactions: Interactions, catalog: Catalog, k: int) -> RunSet:
    """Most relevant top-k output, spreading exposure where relevance allows."""
    return _oracle_state(qrels, interactions, catalog, k).run()


def _target(k: int, m: int, n: int) -> int:
    return math.ceil(k * m / n)


def num_replacements(run: RunSet, catalog: Catalog, k: int) -> int:
    """Replacements needed to bring every item count down to ceil(km/n)."""
    counts = exposure_vector(run, k, catalog)
    target = _target(k, run.m, catalog.n)
    return int(np.maximum(counts - target, 0).sum())


def _candidate_users(state: _State, popular: str, item: str) -> List[str]:
    holders = [u for u in state.users if popular in state.rec[u]]
    eligible = [u for u in holders if item not in state.history[u] and item not in state.rec[u]]
    # Relevant-to-user first, then the user holding the popular item lowest.
    return sorted(
        eligible,
        key=lambda u: (item not in state.relevant[u], -state.rec[u].index(popular), u),
    )


def _replace(state: _State, user: str, popular: str, item: str) -> None:
    items = state.rec[user]
    items[items.index(popular)] = item
    rel = state.relevant[user]
    state.rec[user] = [i for i in items if i in rel] + [i for i in items if i not in rel]
    state.count[popular] -= 1
    state.count[item] += 1


def _most_popular(state: _State, blocked: Set[str]) -> Optional[str]:
    pool = [i for i in state.catalog.items if i not in blocked]
    if not pool:
        return None
    return min(pool, key=lambda i: (-state.count[i], state.order[i]))


def _replacement(state: _State, popular: str) -> Optional[Tuple[str, str]]:
    """(replacement item, user) that strictly lowers the popular item's excess, or ``None``."""
    ceiling = state.count[popular] - 2
    for item in state.least_exposed(state.catalog.items):
        if state.count[item] > ceiling:
            break
        users = _candidate_users(state, popular, item)
        if users:
            return item, users[0]
    return None


def _generate(
    qrels: Qrels,
    interactions: Interactions,
    catalog: Catalog,
    k: int,
    measures: MeasureSet,
    policy: CheckpointPolicy,
    max_replacements: Optional[int] = None,
) -> ParetoTrace:
    state = _oracle_state(qrels, interactions, catalog, k)
    m = len(state.users)
    target = _target(k, m, catalog.n)
    trace = ParetoTrace(k, target)
    trace.directions = {name: _direction(name) for name in measures.rel + measures.fair}

    def record(step: int) -> None:
        run = state.run()
        scores = checkpoint_scores(run, qrels, catalog, k, measures)
        trace.checkpoints.append(Checkpoint(len(trace.checkpoints), step, scores))

    record(0)
    blocked: Set[str] = set()
    skipped: List[str] = []
    step = 0
    while max_replacements is None or step < max_replacements:
        popular = _most_popular(state, blocked)
        if popular is None or state.count[popular] <= target:
            break
        move = _replacement(state, popular)
        if move is None:
            logger.info("no eligible user or item to replace %s (count %d), skipped", popular, state.count[popular])
            blocked.add(popular)
            skipped.append(popular)
            continue
        item, user = move
        _replace(state, user, popular, item)
        step += 1
        logger.debug("replacement %d: %s -> %s for user %s", step, popular, item, user)
        if step % RECOUNT_EVERY == 0 and state.recount() != state.count:
            raise FairnessEvalError(f"exposure counts drifted after {step} replacements")
        if policy.due(step):
            record(step)
    if trace.checkpoints[-1].replacements != step:
        record(step)
    final_max = max(state.count.values())
    if skipped:
        trace.warnings[SKIPPED_REPLACEMENTS] = len(skipped)
    if final_max > target:
        trace.warnings[EARLY_STOP] = final_max
        logger.warning("frontier stopped with an item count of %d above ceil(km/n)=%d", final_max, target)
    trace.final_run = state.run()
    logger.info("frontier generated: %d replacements, %d checkpoints", step, len(trace.checkpoints))
    return trace


def oracle2fair(
    qrels: Qrels,
    interactions: Interactions,
    catalog: Catalog,
    k: int,
    measures: Optional[MeasureSet] = None,
    policy: Optional[CheckpointPolicy] = None,
) -> ParetoTrace:
    """Full frontier generation, checkpointing after every replacement by default."""
    if k < 1 or k > catalog.n:
        raise ConfigError(f"cutoff k={k} must lie in [1, {catalog.n}]")
    return _generate(qrels, interactions, catalog, k, measures or MeasureSet(), policy or CheckpointPolicy())


def estimate_frontier(
    qrels: Qrels,
    interactions: Interactions,
    catalog: Catalog,
    k: int,
    points: int = 10,
    measures: Optional[MeasureSet] = None,
) -> ParetoTrace:
    """``points`` checkpoints spread evenly over the estimated replacement count."""
    if points < 2:
        raise ConfigError(f"an estimated frontier needs at least 2 points, got {points}")
    if k < 1 or k > catalog.n:
        raise ConfigError(f"cutoff k={k} must lie in [1, {catalog.n}]")
    initial = oracle(qrels, interactions, catalog, k)
    total = num_replacements(initial, catalog, k)
    measures = measures or MeasureSet()
    if total == 0:
        logger.warning("oracle output is already maximally fair, the frontier has one point")
        trace = _generate(qrels, interactions, catalog, k, measures, CheckpointPolicy(), max_replacements=0)
        trace.warnings[DEGENERATE] = True
        return trace
    every = max(1, total // (points - 1))
    # The terminal state is always recorded, so it takes the last of the p slots.
    trace = _generate(qrels, interactions, catalog, k, measures, CheckpointPolicy(every, points - 2))
    trace.warnings["estimated_replacements"] = total
    trace.estimated = True
    return trace
