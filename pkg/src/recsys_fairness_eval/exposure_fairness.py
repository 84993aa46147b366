"""Exposure-based individual item fairness.

Nine measures over top-k exposure (Jain, QF, Ent, Gini, Gini-w, FSat, VoCD,
II-D, AI-D), their closed-form most fair / most unfair values, and the
corrected variants that map the achievable extremes to 0 and 1.

Notation used below: ``k`` cutoff, ``m`` users, ``n`` catalog items,
``f = km // n`` and ``r = km % n``.
"""

from __future__ import annotations

import logging
import math
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from .core_model import (
    ALWAYS_FAIR,
    CONSTANT,
    DEGENERATE,
    BoundsResult,
    Catalog,
    Direction,
    ExamFn,
    ExamKind,
    ExposureMeasureResult,
    RunSet,
    Variant,
    exposure_vector,
    rank_matrix,
    resolve_k,
    round_exposure,
    undefined_result,
)
from .errors import ConfigError, NormalizationDegenerateError, UnsupportedBoundError

logger = logging.getLogger(__name__)

EXPOSURE_MEASURES = ("Jain", "QF", "Ent", "Gini", "Gini-w", "FSat", "VoCD", "II-D", "AI-D")

DIRECTIONS = {
    "Jain": Direction.HIGHER,
    "QF": Direction.HIGHER,
    "Ent": Direction.HIGHER,
    "Gini": Direction.LOWER,
    "Gini-w": Direction.LOWER,
    "FSat": Direction.HIGHER,
    "VoCD": Direction.LOWER,
    "II-D": Direction.LOWER,
    "AI-D": Direction.LOWER,
}

RunsArg = Union[RunSet, Sequence[RunSet]]


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


def _min_max(value: float, worst: float, best: float, measure: str) -> float:
    """Map ``worst`` to 0 and ``best`` to 1."""
    if math.isclose(worst, best, rel_tol=0.0, abs_tol=1e-15):
        raise NormalizationDegenerateError(
            f"{measure}: most fair and most unfair values coincide ({best!r}), corrected variant is undefined"
        )
    return (value - worst) / (best - worst)


def _log(x: np.ndarray, base: float) -> np.ndarray:
    return np.log(x) / math.log(base)


def _xlogx(p: float) -> float:
    return p * math.log(p) if p > 0 else 0.0


# ---------------------------------------------------------------------------
# Closed-form extremes
# ---------------------------------------------------------------------------


def jain_max(k: int, m: int, n: int) -> float:
    f, r = divmod(k * m, n)
    return (k * m) ** 2 / (n * (n * f ** 2 + r * (2 * f + 1)))


def entropy_max(k: int, m: int, n: int, log_base: Optional[float] = None) -> float:
    base = n if log_base is None else log_base
    km = k * m
    f, r = divmod(km, n)
    nats = -(n - r) * _xlogx(f / km) - r * _xlogx((f + 1) / km)
    return nats / math.log(base)


def gini_min(k: int, m: int, n: int) -> float:
    r = (k * m) % n
    return (n - r) * r / (k * m * n)


def _dcg_weights(k: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, k + 2))


def gini_w_max(k: int, m: int, n: int) -> float:
    """Every user receives the same ranked list."""
    w = _dcg_weights(k)
    ell = np.arange(1, k + 1)
    return float(((n - 2 * ell + 1) * w).sum() / (n * w.sum()))


def gini_w_min(k: int, m: int, n: int) -> float:
    """Every (user, rank) slot holds a distinct item; only defined for km <= n."""
    if k * m > n:
        raise UnsupportedBoundError(f"Gini-w most fair value has no closed form for km={k * m} > n={n}")
    w = _dcg_weights(k)
    ell = np.arange(1, k + 1)
    return float(((n - 2 * ell * m + m) * w).sum() / (n * w.sum()))


def exposure_bounds(
    measure: str,
    k: int,
    m: int,
    n: int,
    beta: float = 0.0,
    log_base: Optional[float] = None,
) -> BoundsResult:
    """Most unfair and most fair achievable score of an exposure measure at (k, m, n)."""
    if k > n:
        raise ConfigError(f"cutoff k={k} exceeds catalog size n={n}")
    km = k * m
    direction = DIRECTIONS.get(measure)
    if measure == "Jain":
        return BoundsResult(k / n, jain_max(k, m, n), "jain", direction)
    if measure == "QF":
        return BoundsResult(k / n, min(km / n, 1.0), "qf", direction)
    if measure == "Ent":
        base = n if log_base is None else log_base
        return BoundsResult(math.log(k) / math.log(base), entropy_max(k, m, n, base), "entropy", direction)
    if measure == "Gini":
        return BoundsResult(1 - k / n, gini_min(k, m, n), "gini", direction)
    if measure == "Gini-w":
        return BoundsResult(gini_w_max(k, m, n), gini_w_min(k, m, n), "gini-w", direction)
    if measure == "FSat":
        return BoundsResult(1.0 if km < n else k / n, 1.0, "fsat", direction)
    if measure == "VoCD":
        return BoundsResult((m - 1) / m - beta, 0.0, "vocd", direction)
    raise UnsupportedBoundError(f"no closed-form bounds for {measure!r}")


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------


def _counts(run: RunSet, catalog: Catalog, k: int):
    c = exposure_vector(run, k, catalog).astype(float)
    return c, run.m, catalog.n


def jain(run: RunSet, catalog: Catalog, k, variant="original") -> ExposureMeasureResult:
    k = resolve_k(k)
    variant = _variant(variant)
    c, m, n = _counts(run, catalog, k)
    total = c.sum()
    if total == 0:
        return undefined_result(ExposureMeasureResult, "Jain", variant.value, Direction.HIGHER, k=k)
    score = total ** 2 / (n * float((c ** 2).sum()))
    if variant == Variant.CORRECTED:
        score = _min_max(score, k / n, jain_max(k, m, n), "Jain")
    return ExposureMeasureResult("Jain", variant.value, float(score), Direction.HIGHER, params={"k": k})


def qf(run: RunSet, catalog: Catalog, k, variant="original") -> ExposureMeasureResult:
    k = resolve_k(k)
    variant = _variant(variant)
    c, m, n = _counts(run, catalog, k)
    covered = float((c > 0).sum())
    score = covered / n
    if variant == Variant.CORRECTED:
        score = _min_max(covered / n, k / n, min(k * m, n) / n, "QF")
    return ExposureMeasureResult("QF", variant.value, float(score), Direction.HIGHER, params={"k": k})


def entropy(
    run: RunSet, catalog: Catalog, k, variant="original", log_base: Optional[float] = None
) -> ExposureMeasureResult:
    k = resolve_k(k)
    variant = _variant(variant)
    c, m, n = _counts(run, catalog, k)
    base = float(n if log_base is None else log_base)
    if base <= 0 or base == 1:
        raise ConfigError(f"entropy log base must be positive and not 1, got {base}")
    params = {"k": k, "log_base": base}
    total = c.sum()
    if total == 0 or (variant == Variant.ORIGINAL and (c == 0).any()):
        result = undefined_result(ExposureMeasureResult, "Ent", variant.value, Direction.HIGHER, **params)
        logger.debug("Ent original undefined: %d catalog items unexposed", int((c == 0).sum()))
        return result
    p = c[c > 0] / total
    score = float(-(p * _log(p, base)).sum())
    if variant == Variant.CORRECTED:
        score = _min_max(score, math.log(k) / math.log(base), entropy_max(k, m, n, base), "Ent")
    return ExposureMeasureResult("Ent", variant.value, score, Direction.HIGHER, params=params)


def gini_index(x: np.ndarray, order: Optional[np.ndarray] = None) -> float:
    """Gini of a non-negative vector; NaN when it sums to zero."""
    x = np.asarray(x, dtype=float)
    total = x.sum()
    if total == 0:
        return float("nan")
    xs = x[order] if order is not None else np.sort(x, kind="stable")
    n = xs.size
    j = np.arange(1, n + 1)
    return float(((2 * j - n - 1) * xs).sum() / (n * total))


def gini(
    run: RunsArg,
    catalog: Catalog,
    k,
    variant="original",
    exam: Optional[ExamFn] = None,
) -> ExposureMeasureResult:
    """Gini over item exposure; pass a DCG ``exam`` for Gini-w.

    Several runs are treated as rounds and their exposures summed (W = number of rounds).
    """
    k = resolve_k(k)
    variant = _variant(variant)
    rounds = _as_rounds(run)
    weighted = exam is not None and exam.kind != ExamKind.UNIFORM
    measure = "Gini-w" if weighted else "Gini"
    if weighted and exam.kind != ExamKind.DCG:
        raise ConfigError(f"Gini-w uses the DCG examination function, got {exam.kind.value}")
    m, n = rounds[0].m, catalog.n
    if weighted:
        dcg = ExamFn(ExamKind.DCG, k)
        x = sum(dcg.weights(rank_matrix(r, catalog, depth=k)).sum(axis=0) for r in rounds)
    else:
        x = sum(exposure_vector(r, k, catalog).astype(float) for r in rounds)
    params: Dict[str, Any] = {"k": k, "W": len(rounds)}
    score = gini_index(x)
    if math.isnan(score):
        return undefined_result(ExposureMeasureResult, measure, variant.value, Direction.LOWER, **params)
    if variant == Variant.CORRECTED:
        if weighted:
            hi = gini_w_max(k, m, n)
            lo = gini_w_min(k, m, n) if k * m <= n else 0.0
            score = 1.0 - _min_max(score, hi, lo, measure)
        else:
            score = 1.0 - _min_max(score, 1 - k / n, gini_min(k, m, n), measure)
    return ExposureMeasureResult(measure, variant.value, float(score), Direction.LOWER, params=params)


def fsat(run: RunSet, catalog: Catalog, k, variant="original") -> ExposureMeasureResult:
    k = resolve_k(k)
    variant = _variant(variant)
    c, m, n = _counts(run, catalog, k)
    share = (k * m) // n
    score = float((c >= share).sum()) / n
    result = ExposureMeasureResult("FSat", variant.value, score, Direction.HIGHER, params={"k": k, "maximin_share": share})
    if k * m < n:
        # every item already meets a zero share
        result.warn(ALWAYS_FAIR)
        return result
    if variant == Variant.CORRECTED:
        result.score = _min_max(score, k / n, 1.0, "FSat")
    return result


def vocd(
    run: RunSet,
    catalog: Catalog,
    k,
    similarity: Optional[np.ndarray] = None,
    alpha: float = 2.0,
    beta: float = 0.0,
) -> ExposureMeasureResult:
    """Mean coverage-disparity violation over recommended item pairs that are alpha-similar.

    ``similarity`` is an (n, n) item similarity matrix in catalog order with values
    in [-1, 1]; a pair is similar when ``1 - sim <= alpha``. Without a matrix every
    pair counts as similar.
    """
    k = resolve_k(k)
    if not 0.0 <= alpha <= 2.0:
        raise ConfigError(f"VoCD alpha must lie in [0, 2], got {alpha}")
    if not 0.0 <= beta < 1.0:
        raise ConfigError(f"VoCD beta must lie in [0, 1), got {beta}")
    c, m, n = _counts(run, catalog, k)
    params = {"k": k, "alpha": alpha, "beta": beta}
    rec = np.flatnonzero(c > 0)
    cr = c[rec]
    similar = np.ones((rec.size, rec.size), dtype=bool)
    if similarity is not None:
        sim = np.asarray(similarity, dtype=float)
        if sim.shape != (n, n):
            raise ConfigError(f"VoCD similarity matrix must be {n}x{n}, got {sim.shape}")
        similar = (1.0 - sim[np.ix_(rec, rec)]) <= alpha
    pairs = np.triu(similar, k=1)
    if not pairs.any():
        return undefined_result(ExposureMeasureResult, "VoCD", Variant.ORIGINAL.value, Direction.LOWER, **params)
    cd = np.abs(cr[:, None] - cr[None, :]) / np.maximum(cr[:, None], cr[None, :])
    violation = np.maximum(cd[pairs] - beta, 0.0)
    return ExposureMeasureResult("VoCD", Variant.ORIGINAL.value, float(violation.mean()), Direction.LOWER, params=params)


def rbp_exposure(rounds: Sequence[RunSet], users: Sequence[str], catalog: Catalog, k: int, gamma: float) -> np.ndarray:
    """(m, n) expected RBP exposure averaged over rounds."""
    return round_exposure(rounds, users, catalog, ExamFn(ExamKind.RBP, k, gamma=gamma))


def expected_exposure_disparity(
    kind: str,
    runs: RunsArg,
    catalog: Catalog,
    k,
    gamma: float = 0.8,
) -> ExposureMeasureResult:
    """II-D (per user-item) or AI-D (per item) squared deviation from uniform expected exposure."""
    k = resolve_k(k)
    if kind not in ("II-D", "AI-D"):
        raise ConfigError(f"unknown expected exposure disparity {kind!r}")
    if not 0.0 < gamma < 1.0:
        raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")
    rounds = _as_rounds(runs)
    users = rounds[0].users
    n = catalog.n
    exposure = rbp_exposure(rounds, users, catalog, k, gamma)
    target = (1 - gamma ** k) / (n * (1 - gamma))
    if kind == "II-D":
        score = float(((exposure - target) ** 2).mean())
    else:
        score = float(((exposure.mean(axis=0) - target) ** 2).mean())
    result = ExposureMeasureResult(
        kind, Variant.ORIGINAL.value, score, Direction.LOWER, params={"k": k, "gamma": gamma, "W": len(rounds)}
    )
    if kind == "II-D" and len(rounds) == 1:
        result.warn(CONSTANT)
    return result


# ---------------------------------------------------------------------------
# Suite
# ---------------------------------------------------------------------------


def evaluate_exposure_suite(
    run: RunsArg,
    catalog: Catalog,
    k,
    measures: Iterable[str] = EXPOSURE_MEASURES,
    variants: Iterable[str] = ("original", "corrected"),
    gamma: float = 0.8,
    log_base: Optional[float] = None,
    vocd_similarity: Optional[np.ndarray] = None,
    alpha: float = 2.0,
    beta: float = 0.0,
) -> List[ExposureMeasureResult]:
    """Every requested measure and variant; a degenerate correction becomes a flagged NaN result."""
    k = resolve_k(k)
    rounds = _as_rounds(run)
    first = rounds[0]
    variants = [_variant(v) for v in variants]
    results: List[ExposureMeasureResult] = []
    for measure in measures:
        if measure in ("II-D", "AI-D"):
            results.append(expected_exposure_disparity(measure, rounds, catalog, k, gamma))
            continue
        if measure == "VoCD":
            results.append(vocd(first, catalog, k, vocd_similarity, alpha, beta))
            continue
        for variant in variants:
            try:
                if measure == "Jain":
                    res = jain(first, catalog, k, variant)
                elif measure == "QF":
                    res = qf(first, catalog, k, variant)
                elif measure == "Ent":
                    res = entropy(first, catalog, k, variant, log_base)
                elif measure == "Gini":
                    res = gini(rounds, catalog, k, variant)
                elif measure == "Gini-w":
                    res = gini(rounds, catalog, k, variant, exam=ExamFn(ExamKind.DCG, k))
                elif measure == "FSat":
                    res = fsat(first, catalog, k, variant)
                else:
                    raise ConfigError(f"unknown exposure measure {measure!r}")
            except NormalizationDegenerateError as e:
                logger.warning("%s corrected: %s", measure, e)
                res = undefined_result(ExposureMeasureResult, measure, variant.value, DIRECTIONS[measure], k=k)
                res.warn(DEGENERATE)
            results.append(res)
        if measure == "Ent" and Variant.ORIGINAL in variants and Variant.DEFINED not in variants:
            results.append(entropy(first, catalog, k, Variant.DEFINED, log_base))
    return results
