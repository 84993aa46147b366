import json
from pathlib import Path

import pandas as pd
import pytest

from recsys_fairness_eval.main import main
from recsys_fairness_eval.report import load_report, report_scores
from recsys_fairness_eval.tools import (
    agree_tool,
    bounds_tool,
    dpfr_tool,
    evaluate_tool,
    pareto_tool,
    rerank_tool,
    similarity_tool,
    synth_tool,
)


def _report(path, jain, gini, ndcg):
    payload = {
        "measures": [
            {"measure": "Jain", "variant": "original", "score": jain, "direction": "higher"},
            {"measure": "Gini", "variant": "original", "score": gini, "direction": "lower"},
        ],
        "effectiveness": {"NDCG": ndcg},
    }
    path.write_text(json.dumps(payload))
    return str(path)


def test_bounds_tool(tmp_path):
    result = bounds_tool.func(out_dir=str(tmp_path), k=2, m=3, n=5)
    assert result["status"] == "success"
    assert result["bounds"]["Jain"]["closed_form"]["most_fair"] == pytest.approx(0.9)
    assert result["bounds"]["Gini-w"]["closed_form"] is None
    assert Path(result["output_files"]["bounds"]).exists()


def test_bounds_tool_enumeration(tmp_path):
    result = bounds_tool.func(out_dir=str(tmp_path), k=2, m=2, n=3, measures="Jain,QF", brute_force=True)
    entry = result["bounds"]["Jain"]
    assert entry["enumeration"]["most_fair"] == pytest.approx(entry["closed_form"]["most_fair"])


def test_synth_then_evaluate(tmp_path):
    synth = synth_tool.func(out_dir=str(tmp_path / "synth"), scenario="most_fair", m=3, n=5, k=2)
    assert synth["status"] == "success"
    files = synth["output_files"]
    result = evaluate_tool.func(
        out_dir=str(tmp_path / "eval"),
        run_paths=files["run:most_fair"],
        catalog_path=files["catalog"],
        k=2,
    )
    assert result["status"] == "success"
    scores = report_scores(load_report(result["output_files"]["json"]))
    assert scores["Jain/corrected"] == pytest.approx(1.0)
    assert scores["QF/original"] == pytest.approx(1.0)


def test_evaluate_with_qrels_csv(tmp_path, write_tsv):
    run = write_tsv("run.tsv", [["u1", "i1", 1], ["u1", "i2", 2], ["u2", "i3", 1], ["u2", "i1", 2]])
    qrels = write_tsv("qrels.tsv", [["u1", "i1", 1], ["u2", "i2", 1]])
    catalog = write_tsv("catalog.tsv", [[f"i{j}"] for j in range(1, 6)])
    result = evaluate_tool.func(
        out_dir=str(tmp_path / "eval"), run_paths=run, qrels_path=qrels, catalog_path=catalog, k=2, output_format="both"
    )
    assert result["status"] == "success"
    frame = pd.read_csv(result["output_files"]["csv"])
    assert {"Jain", "NDCG", "IAA"} <= set(frame["measure"])


def test_evaluate_without_run_fails(tmp_path):
    result = evaluate_tool.func(out_dir=str(tmp_path))
    assert result["status"] == "failed"


def test_agree_tool(tmp_path):
    paths = [
        _report(tmp_path / "a.json", 0.9, 0.1, 0.3),
        _report(tmp_path / "b.json", 0.5, 0.5, 0.2),
        _report(tmp_path / "c.json", 0.2, 0.8, 0.1),
    ]
    result = agree_tool.func(out_dir=str(tmp_path / "agree"), report_paths=",".join(paths))
    assert result["status"] == "success"
    assert len(result["equivalent"]) == 3
    best = pd.read_csv(result["output_files"]["best"])
    assert set(best["best"]) == {"a"}


def test_agree_tool_needs_two_reports(tmp_path):
    result = agree_tool.func(out_dir=str(tmp_path), report_paths=_report(tmp_path / "a.json", 0.9, 0.1, 0.3))
    assert result["status"] == "failed"


def test_rerank_tool(tmp_path, write_tsv):
    rows = []
    for user in ("u1", "u2"):
        for rank, item in enumerate(["i1", "i2", "i3", "i4"], start=1):
            rows.append([user, item, rank, 1.0 / rank])
    result = rerank_tool.func(out_dir=str(tmp_path), run_path=write_tsv("run.tsv", rows), method="borda", k=2, depth=4)
    assert result["status"] == "success"
    out = pd.read_csv(result["output_files"]["run"], sep="\t", header=None)
    assert len(out) == 4


def test_similarity_tool(tmp_path, write_tsv):
    inter = write_tsv("inter.tsv", [["u1", "i1"], ["u1", "i2"], ["u2", "i2"], ["u3", "i3"]])
    result = similarity_tool.func(out_dir=str(tmp_path), interactions_path=inter)
    assert result["status"] == "success"
    assert result["pairs"] == 3


def test_main_bounds(tmp_path, capsys):
    assert main(["bounds", "-m", "3", "-n", "5", "-k", "2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "bounds.json").exists()
    assert "✅" in capsys.readouterr().out


def test_main_reports_failure(tmp_path):
    assert main(["rerank", "--run", str(tmp_path / "missing.tsv"), "--out", str(tmp_path)]) == 1


def test_main_eval_most_unfair_extremes(tmp_path):
    synth = tmp_path / "synth"
    assert main(["synth", "--scenario", "most_unfair", "-m", "3", "-n", "5", "-k", "2", "--out", str(synth)]) == 0
    out = tmp_path / "eval"
    argv = ["eval", "--run", str(synth / "most_unfair.run.tsv"), "--catalog", str(synth / "catalog.tsv"), "-k", "2", "--out", str(out)]
    assert main(argv) == 0
    scores = report_scores(load_report(out / "report.json"), variant="corrected")
    assert scores["Jain"] == pytest.approx(0.0, abs=1e-9)
    assert scores["QF"] == pytest.approx(0.0, abs=1e-9)
    assert scores["Gini"] == pytest.approx(1.0, abs=1e-9)


def test_reports_are_reproducible(tmp_path, write_tsv):
    run = write_tsv("run.tsv", [["u1", "i1", 1], ["u1", "i2", 2], ["u2", "i3", 1], ["u2", "i1", 2]])
    catalog = write_tsv("catalog.tsv", [[f"i{j}"] for j in range(1, 5)])
    first = evaluate_tool.func(out_dir=str(tmp_path / "a"), run_paths=run, catalog_path=catalog, k=2)
    second = evaluate_tool.func(out_dir=str(tmp_path / "b"), run_paths=run, catalog_path=catalog, k=2)
    assert Path(first["output_files"]["json"]).read_bytes() == Path(second["output_files"]["json"]).read_bytes()


def test_pareto_and_dpfr_tools(tmp_path, write_tsv):
    qrels = write_tsv("qrels.tsv", [[u, i, 1] for u in ("u1", "u2", "u3") for i in ("i1", "i2")])
    catalog = write_tsv("items.tsv", [[f"i{j}"] for j in range(1, 7)])
    frontier = pareto_tool.func(out_dir=str(tmp_path / "frontier"), qrels_path=qrels, catalog_path=catalog, k=2, points=3)
    assert frontier["status"] == "success"
    assert frontier["checkpoints"] == 3
    assert len(frontier["pairs"]) == 12
    trace = pd.read_csv(frontier["output_files"]["trace"])
    assert {"HR", "MRR", "P", "MAP", "R", "NDCG", "Jain", "QF", "Ent", "Gini", "FSat"} <= set(trace.columns)
    assert json.loads(Path(frontier["output_files"]["pairs"]).read_text())["estimated"] is True

    run = write_tsv("run.tsv", [[u, i, r] for u in ("u1", "u2", "u3") for r, i in enumerate(("i1", "i2"), start=1)])
    ranked = dpfr_tool.func(
        out_dir=str(tmp_path / "dpfr"),
        trace_path=frontier["output_files"]["trace"],
        model_runs=f"oracle={run}",
        qrels_path=qrels,
        catalog_path=catalog,
        k=2,
        estimated=True,
    )
    assert ranked["status"] == "success"
    assert [name for name, _ in ranked["ranking"]] == ["oracle"]
