import time

import numpy as np
import pandas as pd
import pytest
from scipy.stats import kendalltau

from recsys_fairness_eval.core_model import (
    DEGENERATE,
    EARLY_STOP,
    Catalog,
    Direction,
    Interactions,
    Qrels,
    RunSet,
    exposure_counts,
)
from recsys_fairness_eval.errors import ConfigError
from recsys_fairness_eval.pareto_dpfr import (
    DEFAULT_FAIR,
    FAIR_MEASURES,
    PAIR_REL,
    REL_MEASURES,
    Frontier,
    FrontierPoint,
    MeasurePair,
    MeasureSet,
    ParetoTrace,
    checkpoint_scores,
    dedupe_frontier,
    dpfr,
    estimate_frontier,
    is_mutually_nondominated,
    measure_pairs,
    num_replacements,
    oracle,
    oracle2fair,
    reference_point,
    score_models,
)
from recsys_fairness_eval.synth_scenarios import model_suite

MIDPOINT = FrontierPoint(0.766, 0.766)
PAIRS = [(r, f) for r in PAIR_REL for f in DEFAULT_FAIR]


@pytest.fixture
def shared_relevance():
    """Three users who all like the same two of six items."""
    catalog = Catalog.numbered(6)
    qrels = Qrels.from_relevant_sets({u: ["i1", "i2"] for u in ("u1", "u2", "u3")})
    return catalog, qrels


def _frontier(points, direction=Direction.HIGHER):
    return Frontier(MeasurePair("NDCG", "Jain", direction), tuple(FrontierPoint(r, f, j) for j, (r, f) in enumerate(points)))


def test_dpfr_distances():
    assert dpfr((0.5, 0.5), MIDPOINT) == pytest.approx(0.376, abs=1e-3)
    assert dpfr((0.2, 0.9), MIDPOINT) == pytest.approx(0.582, abs=1e-3)
    assert dpfr((0.65, 0.2), MIDPOINT) == pytest.approx(0.578, abs=1e-3)
    assert dpfr((0.766, 0.766), MIDPOINT) == 0.0


def test_score_models_closest_first():
    frontier = Frontier(MeasurePair("NDCG", "Jain"), (MIDPOINT,))
    ranked = score_models({"A": (0.2, 0.9), "B": (0.65, 0.2), "C": (0.5, 0.5)}, frontier)
    assert [name for name, _ in ranked] == ["C", "B", "A"]


def test_reference_point_alpha():
    frontier = _frontier([(1.0, 0.0), (0.5, 0.5), (0.0, 1.0)])
    assert reference_point(frontier, 0.0).rel == 1.0
    assert reference_point(frontier, 1.0).rel == 0.0
    mid = reference_point(frontier, 0.5)
    assert (mid.rel, mid.fair) == (0.5, 0.5)
    with pytest.raises(ConfigError):
        reference_point(frontier, 1.5)


def test_dedupe_keeps_fairest_per_relevance():
    kept = dedupe_frontier([FrontierPoint(0.9, 0.3, 0), FrontierPoint(0.9, 0.5, 1), FrontierPoint(0.8, 0.6, 2)])
    assert [(p.rel, p.fair) for p in kept] == [(0.9, 0.5), (0.8, 0.6)]
    lower = dedupe_frontier([FrontierPoint(0.9, 0.3, 0), FrontierPoint(0.9, 0.5, 1)], Direction.LOWER)
    assert [(p.rel, p.fair) for p in lower] == [(0.9, 0.3)]


def test_dedupe_leaves_monotone_input():
    points = [FrontierPoint(0.9, 0.1, 0), FrontierPoint(0.7, 0.4, 1), FrontierPoint(0.5, 0.8, 2)]
    assert dedupe_frontier(points) == tuple(points)


def test_oracle_exact_relevance():
    catalog = Catalog.numbered(6)
    qrels = Qrels.from_relevant_sets({"u1": ["i1", "i2"], "u2": ["i3", "i4"], "u3": ["i5", "i6"]})
    run = oracle(qrels, Interactions.empty(), catalog, 2)
    assert run.lists == {"u1": ("i1", "i2"), "u2": ("i3", "i4"), "u3": ("i5", "i6")}


def test_oracle_fills_short_users_outside_history():
    catalog = Catalog.numbered(4)
    qrels = Qrels.from_relevant_sets({"u1": ["i1"]})
    run = oracle(qrels, Interactions.from_sets({"u1": ["i2"]}), catalog, 2)
    assert run.items_of("u1") == ("i1", "i3")


def test_oracle_drops_most_exposed_relevant_items():
    catalog = Catalog.numbered(6)
    qrels = Qrels.from_relevant_sets({"u1": ["i1", "i2"], "u2": ["i1", "i2", "i3", "i4"]})
    run = oracle(qrels, Interactions.empty(), catalog, 2)
    assert run.items_of("u2") == ("i3", "i4")


def test_oracle2fair_reaches_target(shared_relevance):
    catalog, qrels = shared_relevance
    trace = oracle2fair(qrels, Interactions.empty(), catalog, 2, MeasureSet(("NDCG",), ("Jain", "Gini")))
    counts = exposure_counts(trace.final_run, 2, catalog)
    assert max(counts.values()) <= trace.target == 1
    jain = [c.scores["Jain"] for c in trace.checkpoints]
    gini = [c.scores["Gini"] for c in trace.checkpoints]
    ndcg = [c.scores["NDCG"] for c in trace.checkpoints]
    assert all(b > a for a, b in zip(jain, jain[1:]))
    assert all(b < a for a, b in zip(gini, gini[1:]))
    assert all(b <= a for a, b in zip(ndcg, ndcg[1:]))
    assert len(trace.checkpoints) == 5


def test_frontier_points_non_dominated(shared_relevance):
    catalog, qrels = shared_relevance
    trace = oracle2fair(qrels, Interactions.empty(), catalog, 2)
    frontier = trace.frontier("NDCG", "Jain")
    assert is_mutually_nondominated(frontier.points, frontier.pair.fair_direction)
    assert frontier.fit
    gini = trace.frontier("NDCG", "Gini")
    assert is_mutually_nondominated(gini.points, Direction.LOWER)


def test_history_items_never_recommended(shared_relevance):
    catalog, qrels = shared_relevance
    interactions = Interactions.from_sets({"u1": ["i3"], "u2": ["i4"]})
    trace = oracle2fair(qrels, interactions, catalog, 2)
    assert "i3" not in trace.final_run.items_of("u1")
    assert "i4" not in trace.final_run.items_of("u2")


def test_already_fair_start_gives_single_point():
    catalog = Catalog.numbered(9)
    qrels = Qrels.from_relevant_sets({"u1": ["i1", "i2", "i3"], "u2": ["i4", "i5", "i6"], "u3": ["i7", "i8", "i9"]})
    trace = estimate_frontier(qrels, Interactions.empty(), catalog, 3, points=4)
    assert len(trace.checkpoints) == 1
    assert trace.warnings[DEGENERATE]
    assert trace.frontier("NDCG", "Jain").gradient is None


def test_num_replacements():
    catalog = Catalog.numbered(3)
    run = RunSet.from_lists({"u1": ["i1"], "u2": ["i1"], "u3": ["i1"]})
    assert num_replacements(run, catalog, 1) == 2


def test_estimated_frontier_point_budget(shared_relevance):
    catalog, qrels = shared_relevance
    trace = estimate_frontier(qrels, Interactions.empty(), catalog, 2, points=3)
    assert [c.replacements for c in trace.checkpoints] == [0, 2, 4]


def test_estimate_with_full_budget_matches_full_frontier(shared_relevance):
    catalog, qrels = shared_relevance
    full = oracle2fair(qrels, Interactions.empty(), catalog, 2)
    estimated = estimate_frontier(qrels, Interactions.empty(), catalog, 2, points=5)
    pd.testing.assert_frame_equal(full.to_frame(), estimated.to_frame())


def test_trace_frame_round_trip(shared_relevance):
    catalog, qrels = shared_relevance
    trace = oracle2fair(qrels, Interactions.empty(), catalog, 2)
    restored = ParetoTrace.from_frame(trace.to_frame(), k=2, target=trace.target)
    assert restored.frontier("P", "Gini").points == trace.frontier("P", "Gini").points
    assert restored.directions["Gini"] == Direction.LOWER


def test_unsupported_frontier_measure():
    with pytest.raises(ConfigError):
        MeasureSet(("NDCG",), ("VoCD",))


def test_estimate_needs_two_points(shared_relevance):
    catalog, qrels = shared_relevance
    with pytest.raises(ConfigError):
        estimate_frontier(qrels, Interactions.empty(), catalog, 2, points=1)


def test_measure_set_records_all_eleven_measures():
    measures = MeasureSet()
    assert measures.rel == ("HR", "MRR", "P", "MAP", "R", "NDCG")
    assert len(measures.rel + measures.fair) == 11
    assert measures.pairs() == PAIRS
    assert len(PAIRS) == 12
    assert measure_pairs(("HR",), ("QF",)) == [("HR", "QF")]


def test_reference_point_interpolates_on_estimated_frontier():
    points = tuple(FrontierPoint(r, f, j) for j, (r, f) in enumerate([(1.0, 0.0), (0.8, 0.2), (0.0, 1.0)]))
    full = Frontier(MeasurePair("NDCG", "Jain"), points)
    assert reference_point(full, 0.5) == points[1]
    estimated = Frontier(MeasurePair("NDCG", "Jain"), points, estimated=True)
    mid = reference_point(estimated, 0.5)
    assert (mid.rel, mid.fair) == pytest.approx((0.5, 0.5))
    assert mid.checkpoint == 1
    assert reference_point(estimated, 0.0) == points[0]
    assert reference_point(estimated, 1.0) == points[2]
    assert reference_point(estimated, 0.5, interpolate=False) == points[1]


def test_qf_pair_unfit_when_oracle_exposes_every_item():
    catalog = Catalog.numbered(6)
    qrels = Qrels.from_relevant_sets(
        {"u1": ["i1", "i2"], "u2": ["i1", "i3"], "u3": ["i1", "i4"], "u4": ["i1", "i5", "i6"]}
    )
    trace = oracle2fair(qrels, Interactions.empty(), catalog, 2)
    assert len(trace.checkpoints) == 2
    qf = trace.frontier("NDCG", "QF")
    assert qf.gradient == 0
    assert not qf.fit
    assert trace.frontier("NDCG", "Jain").fit


# ---------------------------------------------------------------------------
# Desk scale: 200 users, 500 items, k = 10
# ---------------------------------------------------------------------------


def _zipf_qrels(m=200, n=500, seed=7):
    """Every user holds 10 to 30 relevant items drawn with Zipf popularity."""
    rng = np.random.default_rng(seed)
    catalog = Catalog.numbered(n)
    weights = 1.0 / np.arange(1, n + 1)
    weights /= weights.sum()
    relevant = {}
    for j in range(1, m + 1):
        picks = rng.choice(n, size=int(rng.integers(10, 31)), replace=False, p=weights)
        relevant[f"u{j}"] = [catalog.items[i] for i in picks]
    return catalog, Qrels.from_relevant_sets(relevant)


@pytest.fixture(scope="module")
def desk_scale():
    catalog, qrels = _zipf_qrels()
    started = time.perf_counter()
    full = oracle2fair(qrels, Interactions.empty(), catalog, 10)
    elapsed = time.perf_counter() - started
    estimated = {
        p: estimate_frontier(qrels, Interactions.empty(), catalog, 10, p, MeasureSet(PAIR_REL, DEFAULT_FAIR))
        for p in (3, 6, 12)
    }
    return catalog, qrels, full, estimated, elapsed


def test_full_frontier_at_desk_scale(desk_scale):
    catalog, _, full, _, elapsed = desk_scale
    assert elapsed < 60
    assert set(full.measures) == set(REL_MEASURES + FAIR_MEASURES)
    scores = pd.DataFrame([c.scores for c in full.checkpoints])
    assert (scores["Jain"].diff().dropna() > 0).all()
    assert (scores["Gini"].diff().dropna() < 0).all()
    for name in REL_MEASURES:
        assert (scores[name].diff().dropna() <= 1e-12).all(), name
    counts = exposure_counts(full.final_run, 10, catalog)
    assert max(counts.values()) == full.target == 4
    assert EARLY_STOP not in full.warnings


def test_relevance_fairness_pairs_fit_at_desk_scale(desk_scale):
    _, _, full, _, _ = desk_scale
    assert [(r, f) for r, f in PAIRS if full.frontier(r, f).fit] == PAIRS


@pytest.mark.parametrize("points", [3, 6, 12])
def test_estimated_midpoint_close_to_full(desk_scale, points):
    _, _, full, estimated, _ = desk_scale
    trace = estimated[points]
    assert trace.estimated
    for rel, fair in PAIRS:
        mid = reference_point(full.frontier(rel, fair), 0.5)
        est = reference_point(trace.frontier(rel, fair), 0.5)
        assert dpfr((est.rel, est.fair), mid) <= 0.05, f"{rel}|{fair}"


@pytest.mark.parametrize("points", [6, 12])
def test_estimated_dpfr_ranking_agrees_with_full(desk_scale, points):
    catalog, qrels, full, estimated, _ = desk_scale
    suite = model_suite(qrels, Interactions.empty(), catalog, 10, seed=42, size=8)
    measures = MeasureSet(PAIR_REL, DEFAULT_FAIR)
    model_scores = {name: checkpoint_scores(run, qrels, catalog, 10, measures) for name, run in suite.items()}
    names = sorted(model_scores)
    for rel, fair in PAIRS:
        model_points = {name: (s[rel], s[fair]) for name, s in model_scores.items()}
        on_full = dict(score_models(model_points, full.frontier(rel, fair)))
        on_estimate = dict(score_models(model_points, estimated[points].frontier(rel, fair)))
        tau, _ = kendalltau([on_full[n] for n in names], [on_estimate[n] for n in names])
        assert tau >= 0.9, f"{rel}|{fair}"
