import pytest

from recsys_fairness_eval.core_model import Catalog, Interactions, Qrels, RunSet


@pytest.fixture
def catalog10():
    return Catalog.numbered(10)


@pytest.fixture
def catalog5():
    return Catalog.numbered(5)


@pytest.fixture
def disjoint_run():
    """Two users with disjoint top-3 lists."""
    return RunSet.from_lists({"u1": ["i1", "i2", "i3"], "u2": ["i4", "i5", "i6"]})


@pytest.fixture
def small_qrels():
    return Qrels.from_relevant_sets({"u1": ["i1", "i4"], "u2": ["i2"], "u3": []})


@pytest.fixture
def small_interactions():
    return Interactions.from_sets({"u1": ["i7", "i8"], "u2": ["i8", "i9"], "u3": ["i10"]})


@pytest.fixture
def write_tsv(tmp_path):
    """Write rows as a tab-separated file under tmp_path and return its path as a string."""

    def _write(name, rows):
        path = tmp_path / name
        path.write_text("".join("\t".join(str(v) for v in row) + "\n" for row in rows))
        return str(path)

    return _write
