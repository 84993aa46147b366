"""Tab-separated input files and their writers.

Formats (``#`` starts a comment line, blank lines are skipped):

    run           user  item  rank  [score]
    qrels         user  item  grade
    interactions  user  item  [weight  [timestamp]]
    catalog       item
    groups        user  attribute  value
    similarity    user  user  value
    features      item  feature
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from .core_model import Catalog, GroupTable, Interactions, Qrels, RunSet, validate_interactions, validate_run
from .errors import InputFormatError, ValidationError
from .user_fairness import SimilarityMatrix

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_LAYOUTS = {
    "run": (("user", "item", "rank"), ("score",)),
    "qrels": (("user", "item", "grade"), ()),
    "interactions": (("user", "item"), ("weight", "timestamp")),
    "catalog": (("item",), ()),
    "groups": (("user", "attribute", "value"), ()),
    "similarity": (("user", "other", "sim"), ()),
    "features": (("item", "feature"), ()),
}
_NUMERIC = {"rank": int, "grade": int, "score": float, "weight": float, "timestamp": float, "sim": float}


def read_table(path: PathLike, kind: str) -> pd.DataFrame:
    """Parse one input file into a frame with a ``line`` column holding 1-based source lines."""
    required, optional = _LAYOUTS[kind]
    columns = required + optional
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) < len(required) or len(fields) > len(columns):
                raise InputFormatError(
                    f"expected {len(required)}-{len(columns)} tab-separated fields for {kind}, got {len(fields)}",
                    str(path),
                    lineno,
                )
            for col, value in enumerate(fields, start=1):
                if not value.strip():
                    raise InputFormatError("empty field", str(path), lineno, col)
            records.append([lineno] + [f.strip() for f in fields] + [None] * (len(columns) - len(fields)))
    frame = pd.DataFrame(records, columns=["line", *columns])
    for col_index, name in enumerate(columns, start=1):
        if name not in _NUMERIC:
            continue
        present = frame[name].notna()
        converted = pd.to_numeric(frame.loc[present, name], errors="coerce")
        bad = converted.isna()
        if _NUMERIC[name] is int:
            bad |= converted.notna() & (converted != converted.round())
        if bad.any():
            row = frame.loc[present].loc[bad].iloc[0]
            raise InputFormatError(f"{name} must be {_NUMERIC[name].__name__}, got {row[name]!r}", str(path), int(row["line"]), col_index)
        frame[name] = frame[name].astype(object)
        frame.loc[present, name] = converted.astype(_NUMERIC[name])
    logger.debug("read %d %s rows from %s", len(frame), kind, path)
    return frame


def _where(path: PathLike, line) -> str:
    return f"{path}:{int(line)}"


def load_catalog(path: PathLike) -> Catalog:
    frame = read_table(path, "catalog")
    duplicated = frame["item"].duplicated()
    if duplicated.any():
        row = frame[duplicated].iloc[0]
        raise ValidationError("duplicate item in catalog", item=row["item"], location=_where(path, row["line"]))
    return Catalog(tuple(frame["item"]))


def load_run(path: PathLike, catalog: Optional[Catalog] = None) -> RunSet:
    """Ranked lists keyed by user; ranks must run 1..len per user."""
    frame = read_table(path, "run")
    if catalog is not None:
        unknown = ~frame["item"].isin(list(catalog.items))
        if unknown.any():
            row = frame[unknown].iloc[0]
            raise ValidationError("unknown item, not in catalog", user=row["user"], item=row["item"], location=_where(path, row["line"]))
    has_scores = frame["score"].notna()
    if has_scores.any() and not has_scores.all():
        row = frame[~has_scores].iloc[0]
        raise InputFormatError("score column present on some rows only", str(path), int(row["line"]), 4)
    lists: Dict[str, Tuple[str, ...]] = {}
    scores: Dict[str, Tuple[float, ...]] = {}
    for user, rows in frame.groupby("user", sort=False):
        rows = rows.sort_values("rank", kind="stable")
        ranks = [int(r) for r in rows["rank"]]
        if ranks != list(range(1, len(ranks) + 1)):
            raise ValidationError(f"non-contiguous ranks {ranks}", user=user, location=_where(path, rows["line"].min()))
        dup = rows["item"].duplicated()
        if dup.any():
            row = rows[dup].iloc[0]
            raise ValidationError("duplicate item in recommendation list", user=user, item=row["item"], location=_where(path, row["line"]))
        lists[user] = tuple(rows["item"])
        if has_scores.all():
            scores[user] = tuple(float(s) for s in rows["score"])
    run = RunSet(lists, scores=scores or None)
    return validate_run(run, catalog) if catalog is not None else run


def load_qrels(path: PathLike, catalog: Optional[Catalog] = None) -> Qrels:
    frame = read_table(path, "qrels")
    dup = frame.duplicated(["user", "item"])
    if dup.any():
        row = frame[dup].iloc[0]
        raise ValidationError("duplicate qrel", user=row["user"], item=row["item"], location=_where(path, row["line"]))
    graded = ~frame["grade"].isin([0, 1])
    if graded.any():
        row = frame[graded].iloc[0]
        raise ValidationError(
            f"graded relevance {row['grade']!r} is not supported, grades must be 0 or 1",
            user=row["user"], item=row["item"], location=_where(path, row["line"]),
        )
    if catalog is not None:
        unknown = ~frame["item"].isin(list(catalog.items))
        if unknown.any():
            row = frame[unknown].iloc[0]
            raise ValidationError("unknown item in qrels", user=row["user"], item=row["item"], location=_where(path, row["line"]))
    relevance: Dict[str, Dict[str, int]] = {}
    for user, item, grade in frame[["user", "item", "grade"]].itertuples(index=False):
        relevance.setdefault(user, {})[item] = int(grade)
    return Qrels(relevance)


def load_interactions(path: PathLike, catalog: Optional[Catalog] = None) -> Interactions:
    frame = read_table(path, "interactions")
    history: Dict[str, set] = {}
    weights, timestamps = {}, {}
    for row in frame.itertuples(index=False):
        if catalog is not None and row.item not in catalog:
            raise ValidationError("unknown item in interactions", user=row.user, item=row.item, location=_where(path, row.line))
        history.setdefault(row.user, set()).add(row.item)
        if row.weight is not None:
            weights[(row.user, row.item)] = float(row.weight)
        if row.timestamp is not None:
            timestamps[(row.user, row.item)] = float(row.timestamp)
    interactions = Interactions({u: frozenset(s) for u, s in history.items()}, weights, timestamps)
    return validate_interactions(interactions, catalog) if catalog is not None else interactions


def load_groups(path: PathLike) -> GroupTable:
    frame = read_table(path, "groups")
    dup = frame.duplicated(["user", "attribute"])
    if dup.any():
        row = frame[dup].iloc[0]
        raise ValidationError(f"attribute {row['attribute']!r} given twice", user=row["user"], location=_where(path, row["line"]))
    attributes: Dict[str, Dict[str, str]] = {}
    for user, attribute, value in frame[["user", "attribute", "value"]].itertuples(index=False):
        attributes.setdefault(user, {})[attribute] = value
    return GroupTable(attributes)


def load_similarity(path: PathLike, users: Optional[Sequence[str]] = None, normalized: bool = False) -> SimilarityMatrix:
    frame = read_table(path, "similarity")
    return SimilarityMatrix.from_triples(frame, users=users, normalized=normalized)


def load_item_features(path: PathLike) -> Dict[str, Tuple[str, ...]]:
    """Item -> features; an item may be listed on several lines."""
    frame = read_table(path, "features")
    features: Dict[str, List[str]] = {}
    for item, feature in frame[["item", "feature"]].itertuples(index=False):
        features.setdefault(item, []).append(feature)
    return {item: tuple(values) for item, values in features.items()}


@dataclass(frozen=True)
class LoadedInputs:
    runs: Tuple[RunSet, ...]
    qrels: Optional[Qrels]
    interactions: Interactions
    catalog: Catalog
    groups: Optional[GroupTable] = None
    similarity: Optional[SimilarityMatrix] = None

    @property
    def run(self) -> RunSet:
        return self.runs[0]


def _derived_catalog(runs: Sequence[RunSet], qrels: Optional[Qrels], interactions: Interactions) -> Catalog:
    items = set()
    for run in runs:
        for listed in run.lists.values():
            items.update(listed)
    if qrels is not None:
        for grades in qrels.relevance.values():
            items.update(grades)
    for history in interactions.history.values():
        items.update(history)
    logger.warning("no catalog file given, using the %d items seen in the inputs", len(items))
    return Catalog(tuple(sorted(items)))


def load_inputs(
    runs: Sequence[PathLike] = (),
    qrels: Optional[PathLike] = None,
    interactions: Optional[PathLike] = None,
    catalog: Optional[PathLike] = None,
    groups: Optional[PathLike] = None,
    similarity: Optional[PathLike] = None,
) -> LoadedInputs:
    """Load and cross-validate every given file; one run path per round."""
    cat = load_catalog(catalog) if catalog else None
    run_sets = tuple(load_run(p, cat) for p in runs)
    q = load_qrels(qrels, cat) if qrels else None
    inter = load_interactions(interactions, cat) if interactions else Interactions.empty()
    if cat is None:
        cat = _derived_catalog(run_sets, q, inter)
    users = run_sets[0].users if run_sets else None
    sim = load_similarity(similarity, users=users) if similarity else None
    return LoadedInputs(run_sets, q, inter, cat, load_groups(groups) if groups else None, sim)


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------


def _write(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, sep="\t", header=False, index=False)
    return path


def write_run(run: RunSet, path: PathLike) -> Path:
    rows: List[list] = []
    for user in run.users:
        scores = run.scores_of(user)
        for pos, item in enumerate(run.items_of(user)):
            row = [user, item, pos + 1]
            if scores is not None:
                row.append(repr(float(scores[pos])))
            rows.append(row)
    return _write(pd.DataFrame(rows), path)


def write_qrels(qrels: Qrels, path: PathLike) -> Path:
    rows = [[u, i, g] for u, grades in qrels.relevance.items() for i, g in grades.items()]
    return _write(pd.DataFrame(rows, columns=["user", "item", "grade"]), path)


def write_catalog(catalog: Catalog, path: PathLike) -> Path:
    return _write(pd.DataFrame({"item": list(catalog.items)}), path)


def write_interactions(interactions: Interactions, path: PathLike) -> Path:
    rows = [[u, i] for u, items in interactions.history.items() for i in sorted(items)]
    return _write(pd.DataFrame(rows, columns=["user", "item"]), path)


def write_similarity(sim: SimilarityMatrix, path: PathLike) -> Path:
    return _write(sim.to_triples(), path)
