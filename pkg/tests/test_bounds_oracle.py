import itertools
import math

import pytest

from recsys_fairness_eval.bounds_oracle import brute_force_bounds, brute_force_joint, brute_force_user, enumerate_runs
from recsys_fairness_eval.errors import ConfigError, UnsupportedBoundError
from recsys_fairness_eval.exposure_fairness import exposure_bounds

SMALL_GRID = [(k, m, n) for k, m, n in itertools.product((1, 2, 3), (1, 2, 3), (2, 3, 4, 5)) if k <= n]


@pytest.mark.parametrize("measure", ["Jain", "QF", "Gini", "Ent"])
@pytest.mark.parametrize("k,m,n", SMALL_GRID)
def test_closed_form_matches_enumeration(measure, k, m, n):
    closed = exposure_bounds(measure, k, m, n)
    found = brute_force_bounds(measure, k, m, n)
    assert found.most_unfair == pytest.approx(closed.most_unfair, abs=1e-9)
    assert found.most_fair == pytest.approx(closed.most_fair, abs=1e-9)


@pytest.mark.parametrize("k,m,n", [(2, 3, 5), (2, 3, 3), (3, 3, 4), (1, 3, 2), (2, 2, 5)])
def test_fsat_bounds_match_enumeration(k, m, n):
    closed = exposure_bounds("FSat", k, m, n)
    found = brute_force_bounds("FSat", k, m, n)
    assert found.most_unfair == pytest.approx(closed.most_unfair)
    assert found.most_fair == pytest.approx(closed.most_fair)


def test_gini_w_range_beyond_closed_form():
    found = brute_force_bounds("Gini-w", 3, 2, 3)
    assert found.most_unfair == pytest.approx(0.156, abs=1e-3)
    assert found.most_fair == pytest.approx(0.0373, abs=1e-3)
    assert found.most_unfair == pytest.approx(exposure_bounds("Gini-w", 3, 1, 3).most_unfair)


def test_enumeration_counts_multisets():
    runs = list(enumerate_runs(1, 2, 3))
    # multisets of size 2 over 3 single-item lists
    assert len(runs) == 6


def test_enumeration_cap():
    with pytest.raises(UnsupportedBoundError):
        brute_force_bounds("Jain", 5, 50, 10)


def test_enumeration_rejects_k_above_n():
    with pytest.raises(ConfigError):
        next(enumerate_runs(4, 1, 3))


def test_brute_force_user_measure_check():
    with pytest.raises(ConfigError):
        brute_force_user("IAA", 2, 4)


def test_joint_bounds_two_users_three_items():
    # k = m = 2, n = 3, every ranking and binary relevance pattern
    _, hd_max = brute_force_joint("HD", 2, 2, 3)
    assert hd_max == pytest.approx(1 / math.sqrt(2), abs=1e-3)
    ii_lo, ii_hi = brute_force_joint("II-F", 2, 2, 3)
    assert ii_lo == pytest.approx(0.007, abs=1e-3)
    assert ii_hi == pytest.approx(0.88, abs=1e-3)
    _, ai_hi = brute_force_joint("AI-F", 2, 2, 3)
    assert ai_hi == pytest.approx(0.88, abs=1e-3)


def test_joint_bounds_mme_range():
    lo, _ = brute_force_joint("MME", 3, 2, 3, patterns=[(1, 1, 1)])
    assert lo == pytest.approx(1 / 18)
    _, hi = brute_force_joint("MME", 3, 2, 3)
    assert hi == pytest.approx(7 / 18)


def test_joint_bounds_unknown_measure():
    with pytest.raises(ConfigError):
        brute_force_joint("Jain", 2, 2, 3)
