from pathlib import Path
from typing import Any, Dict, List, Tuple

import pandas as pd
from crewai.tools import tool

from recsys_fairness_eval.io_formats import load_inputs, load_run, write_run
from recsys_fairness_eval.pareto_dpfr import (
    FAIR_MEASURES,
    REL_MEASURES,
    CheckpointPolicy,
    MeasureSet,
    ParetoTrace,
    checkpoint_scores,
    estimate_frontier,
    measure_pairs,
    oracle2fair,
    reference_point,
    score_models,
)
from recsys_fairness_eval.report import ReportWriter


def _names(text: str) -> Tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _model_paths(text: str) -> List[Tuple[str, str]]:
    """``name=path`` pairs; a bare path is named after its file stem."""
    out = []
    for entry in _names(text):
        name, _, path = entry.partition("=")
        out.append((name, path) if path else (Path(name).stem, name))
    return out


def frontier_frame(trace: ParetoTrace) -> pd.DataFrame:
    """Plot-ready long table of every (relevance, fairness) frontier."""
    rows = []
    rel = [m for m in trace.measures if m in REL_MEASURES]
    fair = [m for m in trace.measures if m not in REL_MEASURES]
    for r, f in measure_pairs(rel, fair):
        frontier = trace.frontier(r, f)
        for j, point in enumerate(frontier.points):
            rows.append(
                {"pair": frontier.pair.id, "point": j, "checkpoint": point.checkpoint, "rel": point.rel, "fair": point.fair}
            )
    return pd.DataFrame(rows, columns=["pair", "point", "checkpoint", "rel", "fair"])


@tool
def pareto_tool(
    out_dir: str,
    qrels_path: str,
    catalog_path: str = "",
    interactions_path: str = "",
    k: int = 10,
    points: int = 0,
    rel_measures: str = "",
    fair_measures: str = "",
    variant: str = "corrected",
    every: int = 1,
) -> Dict[str, Any]:
    """
    Build the relevance/fairness Pareto frontier from the ground truth: start
    from the oracle output and replace over-exposed items until exposure is even.
    Frontiers are read for P,MAP,R,NDCG x Jain,Ent,Gini among the recorded measures.

    Args:
        out_dir: Output directory
        qrels_path: Ground-truth relevance TSV (the test split)
        catalog_path: Item catalog
        interactions_path: Train/validation interactions, never recommended again
        k: Cutoff
        points: Estimated frontier with this many points (0 builds the full frontier)
        rel_measures: Comma-separated relevance measures to record (default HR,MRR,P,MAP,R,NDCG)
        fair_measures: Comma-separated fairness measures to record (default Jain,QF,Ent,Gini,FSat)
        variant: original or corrected fairness scores
        every: Checkpoint interval of the full frontier

    Returns:
        Dict with status, checkpoint count, pair gradients and output paths
    """
    try:
        inputs = load_inputs(qrels=qrels_path, catalog=catalog_path or None, interactions=interactions_path or None)
        measures = MeasureSet(_names(rel_measures) or REL_MEASURES, _names(fair_measures) or FAIR_MEASURES, variant)
        if points:
            trace = estimate_frontier(inputs.qrels, inputs.interactions, inputs.catalog, k, points, measures)
        else:
            trace = oracle2fair(inputs.qrels, inputs.interactions, inputs.catalog, k, measures, CheckpointPolicy(every))

        writer = ReportWriter(out_dir)
        files = {
            "trace": str(writer.csv("trace.csv", trace.to_frame())),
            "frontiers": str(writer.csv("frontiers.csv", frontier_frame(trace))),
        }
        pairs = {}
        for r, f in measures.pairs():
            frontier = trace.frontier(r, f)
            pairs[frontier.pair.id] = {
                "gradient": frontier.gradient,
                "fit": frontier.fit,
                "points": len(frontier),
                "midpoint": list(reference_point(frontier, 0.5).as_array()),
            }
        summary = {"k": k, "target": trace.target, "estimated": trace.estimated, "warnings": trace.warnings, "pairs": pairs}
        files["pairs"] = str(writer.json("pairs.json", summary))
        if trace.final_run is not None:
            files["final_run"] = str(write_run(trace.final_run, Path(out_dir) / "final_run.tsv"))
        return {
            "status": "success",
            "checkpoints": len(trace.checkpoints),
            "pairs": pairs,
            "output_files": files,
        }
    except Exception as e:
        return {"status": "failed", "error": str(e)}


@tool
def dpfr_tool(
    out_dir: str,
    trace_path: str,
    model_runs: str,
    qrels_path: str,
    catalog_path: str = "",
    k: int = 10,
    rel: str = "NDCG",
    fair: str = "Jain",
    alpha: float = 0.5,
    variant: str = "corrected",
    estimated: bool = False,
) -> Dict[str, Any]:
    """
    Score model runs by their distance to a cached Pareto frontier (DPFR), closest first.

    Args:
        out_dir: Output directory
        trace_path: trace.csv written by the pareto tool
        model_runs: Comma-separated name=path run files
        qrels_path: Ground-truth relevance TSV
        catalog_path: Item catalog
        k: Cutoff
        rel: Relevance measure of the pair
        fair: Fairness measure of the pair
        alpha: Relevance/fairness weight locating the reference point on the frontier
        variant: original or corrected fairness scores
        estimated: The trace comes from an estimated frontier (reference point interpolated)

    Returns:
        Dict with status, ranked models and output paths
    """
    try:
        inputs = load_inputs(qrels=qrels_path, catalog=catalog_path or None)
        trace = ParetoTrace.from_frame(pd.read_csv(trace_path), k=k, estimated=estimated)
        frontier = trace.frontier(rel, fair)
        measures = MeasureSet((rel,), (fair,), variant)
        points = {}
        for name, path in _model_paths(model_runs):
            run = load_run(path, inputs.catalog)
            scores = checkpoint_scores(run, inputs.qrels, inputs.catalog, k, measures)
            points[name] = (scores[rel], scores[fair])
        ranking = score_models(points, frontier, alpha)
        ref = reference_point(frontier, alpha)
        frame = pd.DataFrame(
            [{"model": name, "dpfr": d, rel: points[name][0], fair: points[name][1]} for name, d in ranking]
        )
        writer = ReportWriter(out_dir)
        files = {
            "dpfr": str(writer.csv("dpfr.csv", frame)),
            "summary": str(
                writer.json(
                    "dpfr.json",
                    {"pair": frontier.pair.id, "alpha": alpha, "reference": list(ref.as_array()), "ranking": ranking},
                )
            ),
        }
        return {"status": "success", "ranking": ranking, "output_files": files}
    except Exception as e:
        return {"status": "failed", "error": str(e)}
