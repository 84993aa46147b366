import pytest

from recsys_fairness_eval.core_model import RunSet
from recsys_fairness_eval.errors import ConfigError, UndefinedMeasureError
from recsys_fairness_eval.rerankers import borda, borda_fuse, combmnz, coverage, greedy_substitution, rerank


@pytest.fixture
def scored_run():
    return RunSet.from_lists(
        {"u1": ["a", "x"], "u2": ["a", "y"]},
        scores={"u1": [0.9, 0.5], "u2": [0.9, 0.8]},
    )


def test_coverage_counts_top_k():
    run = RunSet.from_lists({"u1": ["a", "b"], "u2": ["a", "c"]})
    assert coverage(run, 1) == {"a": 2}
    assert coverage(run, 2) == {"a": 2, "b": 1, "c": 1}


def test_borda_identical_rankings_keep_order():
    ranking = ["a", "b", "c", "d"]
    assert [i for i, _ in borda_fuse([ranking, ranking], 4)] == ranking


def test_borda_ties_follow_first_ranking():
    fused = borda_fuse([["a", "b"], ["b", "a"]], 2)
    assert fused == [("a", 3.0), ("b", 3.0)]


def test_borda_promotes_uncovered_items():
    run = RunSet.from_lists({"u1": ["a", "b", "c"], "u2": ["a", "d", "e"]})
    out = borda(run, k=1, depth=3).run
    assert out.items_of("u1") == ("b",)


def test_combmnz_equal_coverage_keeps_relevance_order():
    run = RunSet.from_lists(
        {"u1": ["a", "b", "c"], "u2": ["c", "a", "b"]},
        scores={"u1": [0.9, 0.5, 0.1], "u2": [0.8, 0.6, 0.3]},
    )
    out = combmnz(run, k=3, depth=3).run
    assert out.items_of("u1") == ("a", "b", "c")
    assert out.items_of("u2") == ("c", "a", "b")


def test_combmnz_needs_scores():
    with pytest.raises(UndefinedMeasureError):
        combmnz(RunSet.from_lists({"u1": ["a", "b"]}), k=1, depth=2)


def test_greedy_substitution_cheapest_swap(scored_run):
    result = greedy_substitution(scored_run, k=1, depth=2, beta=0.05, cap=1.0)
    assert result.swaps == 1
    assert result.run.items_of("u2") == ("y", "a")
    assert result.run.items_of("u1") == ("a", "x")


def test_greedy_substitution_budget(scored_run):
    assert greedy_substitution(scored_run, k=1, depth=2, cap=0.0).swaps == 0


def test_greedy_substitution_parameter_ranges(scored_run):
    with pytest.raises(ConfigError):
        greedy_substitution(scored_run, k=1, depth=2, beta=0.9)
    with pytest.raises(ConfigError):
        greedy_substitution(scored_run, k=2, depth=1)


def test_rerank_dispatch(scored_run):
    assert rerank("borda", scored_run, k=1, depth=2).m == 2
    with pytest.raises(ConfigError):
        rerank("xquad", scored_run, k=1, depth=2)
