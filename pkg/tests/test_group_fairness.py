import numpy as np
import pytest

from recsys_fairness_eval.core_model import GroupTable
from recsys_fairness_eval.effectiveness import PerUserScores
from recsys_fairness_eval.errors import ConfigError, ValidationError
from recsys_fairness_eval.group_fairness import (
    atk_decomposition_check,
    atkinson,
    attribute_sweep,
    between_group,
    evaluate_grouping,
    group_scores,
    individual,
    within_group,
)


def _groups(assignment):
    return GroupTable({u: {"g": g} for u, g in assignment.items()})


@pytest.fixture
def two_groups():
    scores = PerUserScores("NDCG", {"a": 0.1, "b": 0.3, "c": 0.4, "d": 0.4})
    table = _groups({"a": "x", "b": "x", "c": "y", "d": "y"})
    return scores, table, group_scores(scores, table, ["g"])


def test_shares():
    scores = PerUserScores("NDCG", {"a": 1.0, "b": 1.0, "c": 2.0, "d": 2.0, "e": 2.0})
    gs = group_scores(scores, _groups({"a": "x", "b": "x", "c": "y", "d": "y", "e": "y"}), ["g"])
    np.testing.assert_allclose(gs.shares, [0.25, 0.75])


def test_between_group_two_means(two_groups):
    _, _, gs = two_groups
    np.testing.assert_allclose(gs.means, [0.2, 0.4])
    assert between_group("Range", gs).score == pytest.approx(0.2)
    assert between_group("MAD", gs).score == pytest.approx(0.2)
    assert between_group("SD", gs).score == pytest.approx(0.1)


def test_equal_group_means_are_fair():
    scores = PerUserScores("NDCG", {"a": 0.2, "b": 0.4, "c": 0.3, "d": 0.3})
    gs = group_scores(scores, _groups({"a": "x", "b": "x", "c": "y", "d": "y"}), ["g"])
    for measure in ("Range", "SD", "MAD", "Gini", "CV", "KL"):
        assert between_group(measure, gs).score == pytest.approx(0.0, abs=1e-12)
    assert between_group("GCE", gs).score == pytest.approx(0.0, abs=1e-12)


def test_single_group_is_perfectly_fair():
    scores = PerUserScores("NDCG", {"a": 0.2, "b": 0.9})
    gs = group_scores(scores, _groups({"a": "x", "b": "x"}), ["g"])
    for measure in ("Range", "SD", "MAD", "Gini", "Atk", "CV", "KL"):
        assert between_group(measure, gs).score == 0.0
    assert atk_decomposition_check(scores, _groups({"a": "x", "b": "x"}), ["g"]) == pytest.approx(0.0, abs=1e-12)


def test_atkinson_edge_cases():
    assert atkinson(np.zeros(4)) == 0.0
    assert atkinson(np.array([1.0, 1.0])) == pytest.approx(0.0)
    with pytest.raises(ConfigError):
        atkinson(np.array([1.0]), epsilon=-1)


def test_atkinson_decomposition_randomised():
    rng = np.random.default_rng(7)
    for trial in range(100):
        m = int(rng.integers(4, 30))
        users = [f"u{j}" for j in range(m)]
        values = rng.uniform(0.0, 1.0, size=m)
        scores = PerUserScores("NDCG", dict(zip(users, values)))
        labels = rng.integers(0, int(rng.integers(1, 5)), size=m)
        table = _groups({u: str(g) for u, g in zip(users, labels)})
        eps = float(rng.choice([0.5, 1.0, 2.0]))
        assert atk_decomposition_check(scores, table, ["g"], eps) <= 1e-9


def test_uniform_groups_reduce_to_between():
    scores = PerUserScores("NDCG", {"a": 0.2, "b": 0.2, "c": 0.6, "d": 0.6})
    table = _groups({"a": "x", "b": "x", "c": "y", "d": "y"})
    gs = group_scores(scores, table, ["g"])
    assert within_group("Atk", gs).score == pytest.approx(0.0, abs=1e-12)
    assert individual("Atk", scores).score == pytest.approx(between_group("Atk", gs).score)


def test_scale_invariance(two_groups):
    scores, table, gs = two_groups
    doubled = PerUserScores("NDCG", {u: 2 * v for u, v in scores.scores.items()})
    gs2 = group_scores(doubled, table, ["g"])
    for measure in ("CV", "Gini", "Atk"):
        assert between_group(measure, gs2).score == pytest.approx(between_group(measure, gs).score)
    assert between_group("Range", gs2).score == pytest.approx(2 * between_group("Range", gs).score)


def test_individual_gini_all_zero_undefined():
    assert individual("Gini", PerUserScores("NDCG", {"a": 0.0, "b": 0.0})).undefined
    assert individual("Atk", PerUserScores("NDCG", {"a": 0.0, "b": 0.0})).score == 0.0


def test_ungrouped_user_is_rejected():
    scores = PerUserScores("NDCG", {"a": 0.1, "b": 0.2})
    with pytest.raises(ValidationError):
        group_scores(scores, _groups({"a": "x"}), ["g"])


def test_unknown_measure(two_groups):
    _, _, gs = two_groups
    with pytest.raises(ConfigError):
        between_group("Theil", gs)


def test_evaluate_grouping_names(two_groups):
    scores, _, gs = two_groups
    out = evaluate_grouping(scores, gs)
    assert {"Min25_b-group", "GCE_b-group", "SD_w-group", "Atk_ind"} <= set(out)
    assert out["Min25_b-group"].direction.value == "higher"


def test_attribute_sweep_combinations():
    scores = PerUserScores("NDCG", {"a": 0.1, "b": 0.5, "c": 0.3, "d": 0.9})
    table = GroupTable(
        {
            "a": {"gender": "f", "age": "young"},
            "b": {"gender": "m", "age": "young"},
            "c": {"gender": "f", "age": "old"},
            "d": {"gender": "m", "age": "old"},
        }
    )
    detail, summary = attribute_sweep(scores, table, sizes=(1, 2))
    assert set(detail["attributes"]) == {"age", "gender", "age+gender"}
    assert set(summary["n_attributes"]) == {1, 2}
