"""Between-group, within-group and individual user fairness over effectiveness scores."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .core_model import UNDEFINED, Direction, GroupTable, MeasureResult, undefined_result
from .effectiveness import PerUserScores
from .errors import ConfigError, ValidationError
from .exposure_fairness import gini_index

logger = logging.getLogger(__name__)

BETWEEN_MEASURES = ("Min25", "Range", "SD", "MAD", "Gini", "Atk", "CV", "FStat", "KL", "GCE")
WITHIN_MEASURES = ("SD", "Gini", "Atk")
INDIVIDUAL_MEASURES = ("SD", "Gini", "Atk")

_HIGHER_IS_FAIRER = {"Min25"}


@dataclass(frozen=True, eq=False)
class Group:
    key: Tuple[str, ...]
    members: Tuple[str, ...]
    scores: np.ndarray

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def mean(self) -> float:
        return float(self.scores.mean())

    @property
    def total(self) -> float:
        return float(self.scores.sum())


@dataclass(frozen=True, eq=False)
class GroupScores:
    """Per-group scores plus the share weights s_j (group total over grand total)."""

    attributes: Tuple[str, ...]
    groups: Tuple[Group, ...]

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def means(self) -> np.ndarray:
        return np.array([g.mean for g in self.groups])

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups], dtype=float)

    @property
    def all_scores(self) -> np.ndarray:
        return np.concatenate([g.scores for g in self.groups])

    @property
    def shares(self) -> Optional[np.ndarray]:
        totals = np.array([g.total for g in self.groups])
        grand = totals.sum()
        if grand == 0:
            return None
        return totals / grand


def group_scores(per_user: PerUserScores, groups: GroupTable, attributes: Sequence[str]) -> GroupScores:
    """Intersectional groups of the scored users for ``attributes``."""
    attributes = tuple(attributes)
    partition = groups.partition(attributes)
    owner = {u: key for key, members in partition.items() for u in members}
    orphans = [u for u in per_user.scores if u not in owner]
    if orphans:
        raise ValidationError(
            f"{len(orphans)} scored users have no group for {attributes}: {', '.join(orphans[:10])}"
        )
    members: Dict[Tuple[str, ...], List[str]] = {}
    for user in per_user.scores:
        members.setdefault(owner[user], []).append(user)
    out = tuple(
        Group(key, tuple(users), np.array([per_user.scores[u] for u in users], dtype=float))
        for key, users in sorted(members.items())
    )
    return GroupScores(attributes, out)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


def ede(x: np.ndarray, epsilon: float = 0.5, weights: Optional[np.ndarray] = None) -> float:
    """Equally distributed equivalent of ``x`` under inequality aversion ``epsilon``."""
    x = np.asarray(x, dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    w = w / w.sum()
    if math.isclose(epsilon, 1.0):
        if (x == 0).any():
            return 0.0
        return float(np.exp((w * np.log(x)).sum()))
    if epsilon > 1 and (x == 0).any():
        return 0.0
    return float(((w * x ** (1.0 - epsilon)).sum()) ** (1.0 / (1.0 - epsilon)))


def atkinson(x: np.ndarray, epsilon: float = 0.5, weights: Optional[np.ndarray] = None) -> float:
    """Atkinson index; 0 for an all-zero vector."""
    x = np.asarray(x, dtype=float)
    if epsilon < 0:
        raise ConfigError(f"Atkinson epsilon must be non-negative, got {epsilon}")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    mean = float((w * x).sum() / w.sum())
    if mean == 0:
        return 0.0
    return 1.0 - ede(x, epsilon, w) / mean


def _result(measure: str, level: str, score: Optional[float], **params) -> MeasureResult:
    direction = Direction.HIGHER if measure in _HIGHER_IS_FAIRER else Direction.LOWER
    name = f"{measure}_{level}"
    if score is None or math.isnan(score):
        return undefined_result(MeasureResult, name, "original", direction, **params)
    return MeasureResult(name, "original", float(score), direction, params=params)


def _min25(means: np.ndarray) -> float:
    threshold = np.quantile(means, 0.25, method="linear")
    return float(means[means <= threshold].mean())


def _fstat(gs: GroupScores) -> Optional[float]:
    # The 1/N factors in both variance terms cancel in the ratio.
    n = sum(g.size for g in gs.groups)
    k = gs.n_groups
    if n == k:
        return None
    grand = gs.all_scores.mean()
    between = float(sum(g.size * (g.mean - grand) ** 2 for g in gs.groups))
    within = float(sum(((g.scores - g.mean) ** 2).sum() for g in gs.groups))
    if within == 0:
        return 0.0 if between == 0 else None
    return (between / (k - 1)) / (within / (n - k))


def _kl(gs: GroupScores) -> Optional[float]:
    means = gs.means
    if means.sum() == 0:
        return None
    p = means / means.sum()
    q = gs.sizes / gs.sizes.sum()
    nz = p > 0
    return float((p[nz] * np.log2(p[nz] / q[nz])).sum())


def _gce(gs: GroupScores, b: float, lam: float, c: float) -> float:
    if b in (0.0, 1.0):
        raise ConfigError(f"GCE exponent must differ from 0 and 1, got {b}")
    means = gs.means
    total = means.sum()
    p = means / total if total > 0 else np.zeros_like(means)
    smoothed = lam * p + (1.0 - lam) * c
    smoothed = smoothed / smoothed.sum()
    p_ref = 1.0 / gs.n_groups
    return float(-(1.0 / (b * (1.0 - b))) * ((p_ref ** b * smoothed ** (1.0 - b)).sum() - 1.0))


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------


def between_group(
    measure: str,
    gs: GroupScores,
    epsilon: float = 0.5,
    gce_b: float = 2.0,
    gce_lambda: float = 0.95,
    gce_c: float = 1e-4,
) -> MeasureResult:
    if measure not in BETWEEN_MEASURES:
        raise ConfigError(f"unknown between-group measure {measure!r}, expected one of {BETWEEN_MEASURES}")
    params = {"groups": gs.n_groups}
    if measure == "Atk":
        params["epsilon"] = epsilon
    elif measure == "GCE":
        params.update(B=gce_b, lam=gce_lambda, c=gce_c)
    if gs.n_groups == 0:
        return _result(measure, "b-group", None, **params)
    means = gs.means
    if gs.n_groups == 1:
        # One group is perfectly fair with itself.
        return _result(measure, "b-group", means[0] if measure == "Min25" else 0.0, **params)
    if measure == "Min25":
        score = _min25(means)
    elif measure == "Range":
        score = float(means.max() - means.min())
    elif measure == "SD":
        score = float(means.std())
    elif measure == "MAD":
        n = means.size
        diffs = np.abs(means[:, None] - means[None, :])
        # Mean over pairs: the ordered-pair sum counts each pair twice.
        score = float(diffs.sum() / (n * (n - 1)))
    elif measure == "Gini":
        score = gini_index(means)
    elif measure == "Atk":
        edes = np.array([ede(g.scores, epsilon) for g in gs.groups])
        score = atkinson(edes, epsilon, weights=gs.sizes)
    elif measure == "CV":
        score = float(means.std() / means.mean()) if means.mean() > 0 else None
    elif measure == "FStat":
        score = _fstat(gs)
    elif measure == "KL":
        score = _kl(gs)
    else:
        score = _gce(gs, gce_b, gce_lambda, gce_c)
    return _result(measure, "b-group", score, **params)


def within_group(measure: str, gs: GroupScores, epsilon: float = 0.5) -> MeasureResult:
    """Share-weighted sum of the per-group dispersion."""
    if measure not in WITHIN_MEASURES:
        raise ConfigError(f"unknown within-group measure {measure!r}, expected one of {WITHIN_MEASURES}")
    params = {"groups": gs.n_groups}
    if measure == "Atk":
        params["epsilon"] = epsilon
    shares = gs.shares
    if shares is None:
        return _result(measure, "w-group", 0.0 if measure == "Atk" else None, **params)
    parts = []
    for share, group in zip(shares, gs.groups):
        if share == 0:
            parts.append(0.0)
        elif measure == "SD":
            parts.append(share * float(group.scores.std()))
        elif measure == "Gini":
            parts.append(share * gini_index(group.scores))
        else:
            parts.append(share * atkinson(group.scores, epsilon))
    return _result(measure, "w-group", float(sum(parts)), **params)


def individual(measure: str, per_user: PerUserScores, epsilon: float = 0.5) -> MeasureResult:
    if measure not in INDIVIDUAL_MEASURES:
        raise ConfigError(f"unknown individual measure {measure!r}, expected one of {INDIVIDUAL_MEASURES}")
    values = per_user.values()
    params = {"epsilon": epsilon} if measure == "Atk" else {}
    if values.size < 2:
        return _result(measure, "ind", None, **params)
    if measure == "SD":
        score = float(values.std())
    elif measure == "Gini":
        score = gini_index(values)
        if math.isnan(score):
            logger.warning("Gini_ind is undefined: every user scores zero")
    else:
        score = atkinson(values, epsilon)
    return _result(measure, "ind", score, **params)


def atk_decomposition_check(
    per_user: PerUserScores, groups: GroupTable, attributes: Sequence[str], epsilon: float = 0.5
) -> float:
    """|(1 - Atk_ind) - (1 - Atk_b)(1 - Atk_w)| for one grouping."""
    gs = group_scores(per_user, groups, attributes)
    ind = atkinson(per_user.values(), epsilon)
    between = between_group("Atk", gs, epsilon).score
    within = within_group("Atk", gs, epsilon).score
    return abs((1.0 - ind) - (1.0 - between) * (1.0 - within))


def evaluate_grouping(
    per_user: PerUserScores,
    gs: GroupScores,
    epsilon: float = 0.5,
    gce: Tuple[float, float, float] = (2.0, 0.95, 1e-4),
) -> Dict[str, MeasureResult]:
    out: Dict[str, MeasureResult] = {}
    for measure in BETWEEN_MEASURES:
        res = between_group(measure, gs, epsilon, *gce)
        out[res.measure] = res
    for measure in WITHIN_MEASURES:
        res = within_group(measure, gs, epsilon)
        out[res.measure] = res
    for measure in INDIVIDUAL_MEASURES:
        res = individual(measure, per_user, epsilon)
        out[res.measure] = res
    return out


def attribute_sweep(
    per_user: PerUserScores,
    groups: GroupTable,
    attributes: Optional[Iterable[str]] = None,
    sizes: Sequence[int] = (1, 2, 3),
    epsilon: float = 0.5,
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Evaluate every non-empty attribute combination.

    Returns the per-combination long table and its mean per combination size.
    """
    names = tuple(attributes) if attributes is not None else groups.attribute_names
    rows = []
    for size in sizes:
        for combo in itertools.combinations(names, size):
            try:
                gs = group_scores(per_user, groups, combo)
            except ValidationError as e:
                logger.warning("skipping grouping %s: %s", "+".join(combo), e)
                continue
            for name, res in evaluate_grouping(per_user, gs, epsilon).items():
                rows.append(
                    {
                        "attributes": "+".join(combo),
                        "n_attributes": size,
                        "n_groups": gs.n_groups,
                        "measure": name,
                        "score": res.score,
                        "undefined": UNDEFINED in res.warnings,
                    }
                )
    table = pd.DataFrame(rows, columns=["attributes", "n_attributes", "n_groups", "measure", "score", "undefined"])
    summary = (
        table[~table["undefined"]]
        .groupby(["n_attributes", "measure"], as_index=False)["score"]
        .mean()
    )
    return table, summary
