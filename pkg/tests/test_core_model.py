import numpy as np
import pytest

from recsys_fairness_eval.core_model import (
    Catalog,
    Cutoff,
    ExamFn,
    GroupTable,
    Interactions,
    MeasureResult,
    Direction,
    Qrels,
    RunSet,
    UNDEFINED,
    exposure_counts,
    exposure_vector,
    rank_matrix,
    round_exposure,
    validate_interactions,
    validate_run,
)
from recsys_fairness_eval.errors import ConfigError, UndefinedMeasureError, ValidationError


def test_exposure_counts_top_k(catalog5):
    run = RunSet.from_lists({"u1": ["i1", "i2", "i3"], "u2": ["i1", "i3", "i4"]})
    counts = exposure_counts(run, 2, catalog5)
    assert counts == {"i1": 2, "i2": 1, "i3": 1, "i4": 0, "i5": 0}
    assert exposure_vector(run, 2, catalog5).sum() == 2 * run.m


def test_catalog_rejects_duplicates():
    with pytest.raises(ValidationError):
        Catalog(("a", "b", "a"))


def test_validate_run_duplicate_item(catalog5):
    run = RunSet.from_lists({"u1": ["i1", "i1"]})
    with pytest.raises(ValidationError) as err:
        validate_run(run, catalog5)
    assert err.value.user == "u1"
    assert err.value.item == "i1"


def test_validate_run_unknown_item(catalog5):
    with pytest.raises(ValidationError):
        validate_run(RunSet.from_lists({"u1": ["i1", "zz"]}), catalog5)


def test_validate_run_non_contiguous_ranks(catalog5):
    run = RunSet({"u1": ("i1", "i2")}, ranks={"u1": (1, 3)})
    with pytest.raises(ValidationError):
        validate_run(run, catalog5)


def test_validate_interactions_unknown_item(catalog5):
    with pytest.raises(ValidationError):
        validate_interactions(Interactions.from_sets({"u1": ["i9"]}), catalog5)


def test_qrels_rejects_graded_relevance():
    with pytest.raises(ValidationError):
        Qrels({"u1": {"i1": 2}})


def test_qrels_matrix(catalog5):
    qrels = Qrels.from_relevant_sets({"u1": ["i2"], "u2": ["i1", "i5"]})
    np.testing.assert_array_equal(
        qrels.matrix(["u1", "u2"], catalog5), [[0, 1, 0, 0, 0], [1, 0, 0, 0, 1]]
    )
    assert not qrels.is_empty()
    assert Qrels.from_relevant_sets({"u1": []}).is_empty()


def test_exam_weights():
    assert ExamFn("linear-normalized-original", 10).weight(10) == pytest.approx(0.0)
    assert ExamFn("linear-normalized-corrected", 10).weight(10) == pytest.approx(0.1)
    assert ExamFn("linear-normalized-corrected", 10).weight(11) == 0.0
    assert ExamFn("inverse", 10).weight(4) == pytest.approx(0.25)
    assert ExamFn("rbp", 5, gamma=0.8).weight(3) == pytest.approx(0.64)
    assert ExamFn("dcg", 3).weight(1) == pytest.approx(1.0)


def test_linear_normalized_original_undefined_at_k1():
    with pytest.raises(UndefinedMeasureError):
        ExamFn("linear-normalized-original", 1).weight(1)


def test_exam_rejects_bad_position():
    with pytest.raises(ConfigError):
        ExamFn("dcg", 3).weight(0)


def test_cutoff_checks(catalog5):
    with pytest.raises(ConfigError):
        Cutoff(0)
    with pytest.raises(ConfigError):
        Cutoff(5, rerank_depth=3)
    with pytest.raises(ConfigError):
        Cutoff(6).check(catalog5)
    assert Cutoff(5).check(catalog5).k == 5


def test_rank_matrix(catalog5):
    run = RunSet.from_lists({"u1": ["i3", "i1"]})
    np.testing.assert_array_equal(rank_matrix(run, catalog5), [[2, 0, 1, 0, 0]])


def test_round_exposure_averages_present_rounds(catalog5):
    exam = ExamFn("uniform", 1)
    r1 = RunSet.from_lists({"u1": ["i1"], "u2": ["i2"]})
    r2 = RunSet.from_lists({"u1": ["i3"]})
    e = round_exposure([r1, r2], ["u1", "u2"], catalog5, exam)
    np.testing.assert_allclose(e, [[0.5, 0, 0.5, 0, 0], [0, 1, 0, 0, 0]])


def test_group_partition_is_intersectional():
    table = GroupTable({"u1": {"g": "f", "a": "y"}, "u2": {"g": "m", "a": "y"}, "u3": {"g": "f", "a": "y"}})
    parts = table.partition(["g", "a"])
    assert parts == {("f", "y"): ("u1", "u3"), ("m", "y"): ("u2",)}
    assert table.attribute_names == ("a", "g")
    with pytest.raises(ConfigError):
        table.partition([])


def test_measure_result_undefined_flag():
    res = MeasureResult("Jain", "original", float("nan"), Direction.HIGHER)
    assert res.undefined
    res = MeasureResult("Jain", "original", 0.5, Direction.HIGHER).warn(UNDEFINED)
    assert res.to_dict()["warnings"] == {UNDEFINED: True}
