"""Synthetic recommendation scenarios for stress-testing measures.

Every generator is a pure function of its arguments; stochastic ones draw from
``numpy.random.default_rng(seed)`` (PCG64), recorded as ``PRNG`` in reports.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core_model import Catalog, Interactions, Qrels, RunSet, validate_run
from .effectiveness import PerUserScores
from .errors import ConfigError, ValidationError
from .settings import ScenarioSpec
from .user_fairness import SimilarityMatrix

logger = logging.getLogger(__name__)

PRNG = "numpy.random.PCG64"
MODES = ("repeatable", "nonrepeatable")


@dataclass(frozen=True)
class ScenarioStep:
    """One point of a scenario sweep: the swept parameter value and its inputs."""

    param: float
    run: RunSet
    qrels: Optional[Qrels] = None


def _users(m: int) -> List[str]:
    return [f"u{j}" for j in range(1, m + 1)]


def _check_mode(mode: str, interactions: Optional[Interactions]) -> None:
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}, expected one of {MODES}")
    if mode == "nonrepeatable" and interactions is None:
        raise ConfigError("nonrepeatable scenarios need interactions")


# ---------------------------------------------------------------------------
# Extreme exposure outputs
# ---------------------------------------------------------------------------


def most_fair_run(
    mode: str,
    catalog: Catalog,
    m: int,
    k: int,
    interactions: Optional[Interactions] = None,
    users: Optional[Sequence[str]] = None,
) -> RunSet:
    """Spread exposure as evenly as the catalog allows.

    Repeatable mode deals items round-robin, so counts differ by at most one.
    Nonrepeatable mode gives each user, in turn, the k least exposed items
    outside their history.
    """
    _check_mode(mode, interactions)
    if k > catalog.n:
        raise ConfigError(f"cutoff k={k} exceeds catalog size n={catalog.n}")
    users = list(users) if users is not None else _users(m)
    if mode == "repeatable":
        lists = {u: tuple(catalog.items[(j * k + t) % catalog.n] for t in range(k)) for j, u in enumerate(users)}
        return validate_run(RunSet(lists), catalog)
    count = {i: 0 for i in catalog.items}
    order = catalog.index
    lists = {}
    for user in users:
        history = interactions.items_of(user)
        pool = sorted((i for i in catalog.items if i not in history), key=lambda i: (count[i], order[i]))
        chosen = pool[:k]
        if len(chosen) < k:
            logger.warning("user %s has only %d recommendable items", user, len(chosen))
        for item in chosen:
            count[item] += 1
        lists[user] = tuple(chosen)
    return validate_run(RunSet(lists), catalog)


def most_unfair_run(
    mode: str,
    catalog: Catalog,
    m: int,
    k: int,
    interactions: Optional[Interactions] = None,
    users: Optional[Sequence[str]] = None,
) -> RunSet:
    """The same k items for everyone; nonrepeatable mode swaps history items for the next catalog items."""
    _check_mode(mode, interactions)
    if k > catalog.n:
        raise ConfigError(f"cutoff k={k} exceeds catalog size n={catalog.n}")
    users = list(users) if users is not None else _users(m)
    head = catalog.items[:k]
    if mode == "repeatable":
        return validate_run(RunSet({u: head for u in users}), catalog)
    lists = {}
    for user in users:
        history = interactions.items_of(user)
        chosen = [i for i in head if i not in history]
        for item in catalog.items[k:]:
            if len(chosen) == k:
                break
            if item not in history:
                chosen.append(item)
        lists[user] = tuple(chosen)
    return validate_run(RunSet(lists), catalog)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def insert_le_relevant(m: int = 1000, n: Optional[int] = 10000, k: int = 10) -> Tuple[Catalog, List[ScenarioStep]]:
    """Insert jointly least exposed and relevant items from the bottom of every list.

    All users start with the same k items, relevant only to the first user, whose
    list never changes. Each of the others owns k fresh items relevant only to
    them; step t places t of those at the bottom of their list. Steps run from
    P = 0 to P = 1 in increments of 1/k. With the anchor list fixed, successive
    steps differ in one entry for each of the other m - 1 users.

    ``n`` must be at least km; ``None`` sizes the catalog at exactly km.
    """
    n = k * m if n is None else n
    if n < k * m:
        raise ConfigError(f"insertion needs at least km={k * m} items, got n={n}")
    if m < 1 or k < 1:
        raise ConfigError("m and k must be positive")
    catalog = Catalog.numbered(n)
    users = _users(m)
    shared = catalog.items[:k]
    own = {u: catalog.items[k * j: k * (j + 1)] for j, u in enumerate(users)}
    qrels = Qrels.from_relevant_sets({u: own[u] for u in users})
    steps = []
    for t in range(k + 1):
        lists = {users[0]: shared}
        for u in users[1:]:
            # Replaced slots fill from the bottom; the newest insertion sits highest.
            lists[u] = shared[: k - t] + tuple(reversed(own[u][:t]))
        steps.append(ScenarioStep(t / k, RunSet(lists), qrels))
    return catalog, steps


def sliding_window(run: RunSet, width: int, start: int) -> RunSet:
    """Positions start..start+width-1 of every list, re-ranked from 1."""
    if width < 1 or start < 1:
        raise ConfigError("window width and start must be positive")
    lists = {}
    for user, items in run.lists.items():
        if start + width - 1 > len(items):
            raise ValidationError(
                f"window {start}-{start + width - 1} exceeds the list of length {len(items)}", user=user
            )
        lists[user] = items[start - 1: start - 1 + width]
    return RunSet(lists)


def add_relevant_beyond_topk(run: RunSet, qrels: Qrels, k: int, strategy: str = "top", count: int = 10) -> List[Qrels]:
    """Qrels with 0..count extra relevant items per user beyond the top k.

    ``top`` flips the first irrelevant items after position k, ``bottom`` the
    last ones of the full ranking. Stops early when a user runs out of candidates.
    """
    if strategy not in ("top", "bottom"):
        raise ConfigError(f"unknown strategy {strategy!r}, expected 'top' or 'bottom'")
    candidates: Dict[str, List[str]] = {}
    for user, items in run.lists.items():
        tail = [i for i in items[k:] if qrels.grade(user, i) == 0]
        candidates[user] = tail if strategy == "top" else list(reversed(tail))
    out = [qrels]
    relevance = {u: dict(g) for u, g in qrels.relevance.items()}
    for step in range(count):
        exhausted = [u for u, pool in candidates.items() if len(pool) <= step]
        if exhausted:
            logger.warning(
                "%d users have no irrelevant item left beyond k=%d after %d additions, stopping",
                len(exhausted), k, step,
            )
            break
        for user, pool in candidates.items():
            relevance.setdefault(user, {})[pool[step]] = 1
        out.append(Qrels({u: dict(g) for u, g in relevance.items()}))
    return out


# ---------------------------------------------------------------------------
# User similarity scenarios
# ---------------------------------------------------------------------------


def _pair_index(m: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(m, k=1)


def sample_similarity(
    users: Sequence[str], distribution: str = "weibull", shape: float = 1.0, seed: int = 42
) -> SimilarityMatrix:
    """Draw one similarity per user pair, min-max normalised into [0, 1]."""
    if distribution not in ("weibull", "normal"):
        raise ConfigError(f"unknown distribution {distribution!r}")
    if distribution == "weibull" and shape <= 0:
        raise ConfigError(f"Weibull shape must be positive, got {shape}")
    rng = np.random.default_rng(seed)
    m = len(users)
    rows, cols = _pair_index(m)
    samples = rng.weibull(shape, size=rows.size) if distribution == "weibull" else rng.normal(size=rows.size)
    if samples.size:
        lo, hi = samples.min(), samples.max()
        samples = (samples - lo) / (hi - lo) if hi > lo else np.ones_like(samples)
    values = np.eye(m)
    values[rows, cols] = samples
    values[cols, rows] = samples
    return SimilarityMatrix(tuple(users), values, normalized=True)


def assign_similarity(sims: Sequence[float], scores: PerUserScores, mode: str = "MostFair") -> SimilarityMatrix:
    """Place given similarities on user pairs by their effectiveness gap.

    MostFair gives the highest similarity to the pair with the smallest gap,
    MostUnfair to the pair with the largest. Ties keep pair order (u < u').
    """
    if mode not in ("MostFair", "MostUnfair"):
        raise ConfigError(f"unknown assignment mode {mode!r}")
    users = scores.users
    values = scores.values()
    m = len(users)
    rows, cols = _pair_index(m)
    sims = np.asarray(sims, dtype=float)
    if sims.size != rows.size:
        raise ValidationError(f"expected {rows.size} similarities for {m} users, got {sims.size}")
    gaps = np.abs(values[rows] - values[cols])
    by_gap = np.argsort(gaps, kind="stable")
    ordered = np.sort(sims)[::-1] if mode == "MostFair" else np.sort(sims)
    placed = np.empty_like(sims)
    placed[by_gap] = ordered
    matrix = np.eye(m)
    matrix[rows, cols] = placed
    matrix[cols, rows] = placed
    return SimilarityMatrix(tuple(users), matrix, normalized=True)


def vary_relevance(
    qrels: Qrels,
    catalog: Catalog,
    k: int,
    frac_zero: float,
    seed: int = 42,
    interactions: Optional[Interactions] = None,
) -> Tuple[RunSet, Qrels]:
    """Give a fraction of users only irrelevant items and the rest only relevant ones.

    Relevant lists hold up to k randomly chosen relevant items, padded with
    random irrelevant ones. The zero-relevance users are a prefix of one seeded
    permutation, so larger fractions contain the smaller ones.
    """
    if not 0.0 <= frac_zero <= 1.0:
        raise ConfigError(f"fraction must lie in [0, 1], got {frac_zero}")
    interactions = interactions or Interactions.empty()
    rng = np.random.default_rng(seed)
    users = [u for u in qrels.users if qrels.relevant(u)]
    order = rng.permutation(len(users))
    n_zero = int(round(frac_zero * len(users)))
    zero = {users[j] for j in order[:n_zero]}
    lists = {}
    for user in users:
        relevant = sorted(qrels.relevant(user), key=catalog.index.__getitem__)
        history = interactions.items_of(user)
        irrelevant = [i for i in catalog.items if i not in qrels.relevant(user) and i not in history]
        if user in zero:
            picks = [] if len(irrelevant) < k else list(rng.choice(irrelevant, size=k, replace=False))
            if not picks:
                logger.warning("user %s has fewer than k=%d irrelevant items", user, k)
                picks = irrelevant
        else:
            take = min(k, len(relevant))
            picks = list(rng.choice(relevant, size=take, replace=False))
            pad = k - take
            if pad:
                picks += list(rng.choice(irrelevant, size=min(pad, len(irrelevant)), replace=False))
        lists[user] = tuple(str(i) for i in picks)
    return validate_run(RunSet(lists), catalog), qrels


def model_suite(
    qrels: Qrels,
    interactions: Interactions,
    catalog: Catalog,
    k: int,
    seed: int = 42,
    size: int = 8,
) -> Dict[str, RunSet]:
    """Synthetic model runs from the oracle output towards a popularity-biased one.

    Model ``j`` replaces the bottom round(j/(size-1) * k) slots of each oracle list
    with the most relevant-popular items the user has not seen, then applies a
    seeded adjacent swap to some users.
    """
    from .pareto_dpfr import oracle

    if size < 2:
        raise ConfigError(f"a model suite needs at least 2 models, got {size}")
    rng = np.random.default_rng(seed)
    base = oracle(qrels, interactions, catalog, k)
    popularity = {i: 0 for i in catalog.items}
    for user in qrels.users:
        for item in qrels.relevant(user):
            popularity[item] += 1
    popular = sorted(catalog.items, key=lambda i: (-popularity[i], catalog.index[i]))
    suite = {}
    for j in range(size):
        share = j / (size - 1)
        n_pop = int(round(share * k))
        lists = {}
        for user in base.users:
            items = list(base.items_of(user))
            keep = items[: k - n_pop]
            blocked = set(keep) | interactions.items_of(user)
            fill = [i for i in popular if i not in blocked][: len(items) - len(keep)]
            new = keep + fill
            if len(new) > 1 and rng.random() < 0.3:
                p = int(rng.integers(0, len(new) - 1))
                new[p], new[p + 1] = new[p + 1], new[p]
            lists[user] = tuple(new)
        suite[f"mix-{share:.2f}"] = validate_run(RunSet(lists), catalog)
    return suite


# ---------------------------------------------------------------------------
# Scenario entry point
# ---------------------------------------------------------------------------


@dataclass
class ScenarioOutput:
    """Named artifacts of one scenario, ready to be written in the standard formats."""

    catalog: Optional[Catalog] = None
    runs: Dict[str, RunSet] = field(default_factory=dict)
    qrels: Dict[str, Qrels] = field(default_factory=dict)
    similarity: Optional[SimilarityMatrix] = None


def run_scenario(
    spec: ScenarioSpec,
    qrels: Optional[Qrels] = None,
    interactions: Optional[Interactions] = None,
    catalog: Optional[Catalog] = None,
) -> ScenarioOutput:
    """Generate the artifacts a scenario spec describes; identical specs give identical output."""
    name = spec.scenario
    if name in ("most_fair", "most_unfair"):
        catalog = catalog or Catalog.numbered(spec.n or 10 * spec.k)
        make = most_fair_run if name == "most_fair" else most_unfair_run
        run = make(spec.mode, catalog, spec.m, spec.k, interactions)
        return ScenarioOutput(catalog, runs={name: run})
    if name == "insert_le_relevant":
        catalog, steps = insert_le_relevant(spec.m, spec.n, spec.k)
        out = ScenarioOutput(catalog)
        for t, step in enumerate(steps):
            out.runs[f"step{t:02d}"] = step.run
        out.qrels["qrels"] = steps[0].qrels
        return out
    if name == "sample_similarity":
        sim = sample_similarity(_users(spec.m), spec.distribution, spec.shape, spec.seed)
        return ScenarioOutput(similarity=sim)
    if qrels is None or catalog is None:
        raise ConfigError(f"scenario {name!r} needs qrels and a catalog")
    if name == "vary_relevance":
        run, q = vary_relevance(qrels, catalog, spec.k, spec.fraction, spec.seed, interactions)
        return ScenarioOutput(catalog, runs={f"zero{spec.fraction:.2f}": run}, qrels={"qrels": q})
    suite = model_suite(qrels, interactions or Interactions.empty(), catalog, spec.k, spec.seed, spec.size)
    return ScenarioOutput(catalog, runs=suite)
