import numpy as np
import pytest

from recsys_fairness_eval.core_model import Catalog, Interactions, Qrels, RunSet, exposure_vector
from recsys_fairness_eval.effectiveness import PerUserScores, per_user_effectiveness
from recsys_fairness_eval.errors import ConfigError, ValidationError
from recsys_fairness_eval.settings import ScenarioSpec
from recsys_fairness_eval.synth_scenarios import (
    add_relevant_beyond_topk,
    assign_similarity,
    insert_le_relevant,
    model_suite,
    most_fair_run,
    most_unfair_run,
    run_scenario,
    sample_similarity,
    sliding_window,
    vary_relevance,
)
from recsys_fairness_eval.user_fairness import SimilarityMatrix, evaluate_user_suite, puf


@pytest.fixture
def relevant_users():
    catalog = Catalog.numbered(12)
    qrels = Qrels.from_relevant_sets(
        {"u1": ["i1", "i2", "i3"], "u2": ["i4", "i5", "i6"], "u3": ["i7", "i8", "i9"], "u4": ["i10", "i11", "i12"]}
    )
    return catalog, qrels


@pytest.mark.parametrize("m, k, n", [(3, 2, 5), (7, 3, 10), (4, 5, 5)])
def test_most_fair_counts_differ_by_at_most_one(m, k, n):
    counts = exposure_vector(most_fair_run("repeatable", Catalog.numbered(n), m, k), k, Catalog.numbered(n))
    assert counts.max() - counts.min() <= 1
    assert counts.sum() == k * m


def test_most_unfair_shares_top_items(catalog5):
    run = most_unfair_run("repeatable", catalog5, 3, 2)
    assert set(run.lists.values()) == {("i1", "i2")}


def test_nonrepeatable_respects_history(catalog5):
    interactions = Interactions.from_sets({"u1": ["i1"], "u2": ["i2", "i3"]})
    fair = most_fair_run("nonrepeatable", catalog5, 2, 2, interactions)
    unfair = most_unfair_run("nonrepeatable", catalog5, 2, 2, interactions)
    for run in (fair, unfair):
        for user in run.users:
            assert not set(run.items_of(user)) & interactions.items_of(user)
    assert unfair.items_of("u1") == ("i2", "i3")


def test_nonrepeatable_needs_interactions(catalog5):
    with pytest.raises(ConfigError):
        most_fair_run("nonrepeatable", catalog5, 2, 2)


def test_insert_le_relevant_steps():
    catalog, steps = insert_le_relevant(m=3, n=None, k=4)
    assert catalog.n == 12
    assert [s.param for s in steps] == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
    anchor = steps[0].run.items_of("u1")
    assert all(s.run.items_of("u1") == anchor for s in steps)
    first = per_user_effectiveness("P", steps[0].run, steps[0].qrels, 4)
    last = per_user_effectiveness("P", steps[-1].run, steps[-1].qrels, 4)
    assert first.scores == {"u1": 1.0, "u2": 0.0, "u3": 0.0}
    assert set(last.scores.values()) == {1.0}
    assert steps[1].run.items_of("u2")[-1] == "i5"


def test_insert_le_relevant_default_size():
    catalog, steps = insert_le_relevant()
    assert catalog.n == 10000
    assert len(steps) == 11
    assert steps[0].run.m == 1000
    for before, after in zip(steps, steps[1:]):
        changed = [u for u in before.run.users if before.run.items_of(u) != after.run.items_of(u)]
        assert len(changed) == 999


def test_insert_le_relevant_needs_room():
    with pytest.raises(ConfigError):
        insert_le_relevant(m=3, n=5, k=4)


def test_sliding_window():
    run = RunSet.from_lists({"u1": ["a", "b", "c", "d"]})
    assert sliding_window(run, 2, 3).items_of("u1") == ("c", "d")
    with pytest.raises(ValidationError):
        sliding_window(run, 3, 3)


def test_add_relevant_beyond_topk():
    run = RunSet.from_lists({"u1": ["a", "b", "c", "d", "e"]})
    qrels = Qrels.from_relevant_sets({"u1": ["a"]})
    top = add_relevant_beyond_topk(run, qrels, 2, "top", count=2)
    assert top[0] is qrels
    assert top[1].relevant("u1") == {"a", "c"}
    assert top[2].relevant("u1") == {"a", "c", "d"}
    bottom = add_relevant_beyond_topk(run, qrels, 2, "bottom", count=5)
    assert len(bottom) == 4
    assert bottom[1].relevant("u1") == {"a", "e"}


def test_sample_similarity_normalised_and_seeded():
    users = [f"u{j}" for j in range(6)]
    sim = sample_similarity(users, "weibull", 1.5, seed=3)
    pairs = sim.pair_values()
    assert pairs.min() == pytest.approx(0.0)
    assert pairs.max() == pytest.approx(1.0)
    np.testing.assert_array_equal(sim.values, sample_similarity(users, "weibull", 1.5, seed=3).values)


def test_most_fair_assignment_never_exceeds_most_unfair():
    scores = PerUserScores("P", {"a": 0.0, "b": 0.3, "c": 0.9, "d": 1.0})
    for seed in range(5):
        sims = np.random.default_rng(seed).uniform(size=6)
        fair = puf(scores, assign_similarity(sims, scores, "MostFair")).score
        unfair = puf(scores, assign_similarity(sims, scores, "MostUnfair")).score
        assert fair <= unfair + 1e-12


def test_assign_similarity_size_mismatch():
    scores = PerUserScores("P", {"a": 0.0, "b": 1.0, "c": 0.5})
    with pytest.raises(ValidationError):
        assign_similarity([0.1, 0.2], scores)


def test_vary_relevance_inverted_parabola(relevant_users):
    catalog, qrels = relevant_users
    sim = SimilarityMatrix.uniform(list(qrels.users))
    values = {}
    for frac in (0.0, 0.5, 1.0):
        run, q = vary_relevance(qrels, catalog, 3, frac, seed=1)
        values[frac] = puf(per_user_effectiveness("P", run, q, 3), sim).score
    assert values[0.0] == pytest.approx(0.0)
    assert values[1.0] == pytest.approx(0.0)
    assert values[0.5] == pytest.approx(2 / 3)


def test_vary_relevance_prefix_nesting(relevant_users):
    catalog, qrels = relevant_users

    def zero_users(frac):
        run, q = vary_relevance(qrels, catalog, 3, frac, seed=9)
        scores = per_user_effectiveness("P", run, q, 3)
        return {u for u, v in scores.scores.items() if v == 0}

    assert zero_users(0.25) <= zero_users(0.5) <= zero_users(0.75)


def test_model_suite_spans_oracle_to_popular(relevant_users):
    catalog, qrels = relevant_users
    suite = model_suite(qrels, Interactions.empty(), catalog, 3, seed=5, size=4)
    assert list(suite) == ["mix-0.00", "mix-0.33", "mix-0.67", "mix-1.00"]
    best = np.mean(list(per_user_effectiveness("P", suite["mix-0.00"], qrels, 3).scores.values()))
    worst = np.mean(list(per_user_effectiveness("P", suite["mix-1.00"], qrels, 3).scores.values()))
    assert best == pytest.approx(1.0)
    assert worst < best


def test_run_scenario_is_reproducible():
    spec = ScenarioSpec(scenario="sample_similarity", m=5, seed=11)
    a = run_scenario(spec).similarity.values
    b = run_scenario(spec).similarity.values
    np.testing.assert_array_equal(a, b)


def test_run_scenario_insert_names():
    out = run_scenario(ScenarioSpec(scenario="insert_le_relevant", m=2, k=2))
    assert sorted(out.runs) == ["step00", "step01", "step02"]
    assert "qrels" in out.qrels


def test_run_scenario_needs_qrels():
    with pytest.raises(ConfigError):
        run_scenario(ScenarioSpec(scenario="vary_relevance", fraction=0.5))


def test_similarity_sweeps_leave_similarity_free_measures_unchanged():
    catalog = Catalog.numbered(40)
    rng = np.random.default_rng(3)
    relevant = {
        f"u{j}": [str(i) for i in rng.choice(catalog.items, size=int(rng.integers(2, 8)), replace=False)]
        for j in range(1, 13)
    }
    run, qrels = vary_relevance(Qrels.from_relevant_sets(relevant), catalog, 5, 0.4, seed=3)
    measures = ["SD-P", "Gini-P", "SD-NDCG", "Gini-NDCG", "ME", "MME", "PEU"]
    base = evaluate_user_suite(run, qrels, 5, effectiveness=["P", "NDCG"])
    scores = per_user_effectiveness("P", run, qrels, 5)
    for shape in (0.5, 1.0, 2.0, 5.0):
        sims = sample_similarity(run.users, "weibull", shape, seed=11).pair_values()
        for mode in ("MostFair", "MostUnfair"):
            sim = assign_similarity(sims, scores, mode)
            out = evaluate_user_suite(run, qrels, 5, sim=sim, effectiveness=["P", "NDCG"])
            assert [out[m].score for m in measures] == [base[m].score for m in measures]
