from pathlib import Path
from typing import Any, Dict, List

from crewai.tools import tool

from recsys_fairness_eval.analysis_agreement import agreement_matrix, best_models, rank_models
from recsys_fairness_eval.core_model import Direction
from recsys_fairness_eval.report import ReportWriter, load_report, report_scores


def _directions(report: Dict[str, Any]) -> Dict[str, Direction]:
    out = {f"{e['measure']}/{e['variant']}": Direction(e["direction"]) for e in report.get("measures", [])}
    out.update({name: Direction.HIGHER for name in report.get("effectiveness", {})})
    return out


@tool
def agree_tool(
    out_dir: str,
    report_paths: str,
    measures: str = "",
    alpha: float = 0.05,
    correction: str = "fdr_bh",
) -> Dict[str, Any]:
    """
    Rank the models behind several measure reports under every measure and
    compute pairwise Kendall tau-b agreement with multiple-testing correction.

    Args:
        out_dir: Output directory
        report_paths: Comma-separated report.json files, one per model
        measures: Comma-separated measure keys (measure/variant, or an effectiveness name); default all shared keys
        alpha: Significance level
        correction: fdr_bh or bonferroni

    Returns:
        Dict with status, equivalent measure pairs and output paths
    """
    try:
        paths = [p.strip() for p in report_paths.split(",") if p.strip()]
        reports = {Path(p).stem if Path(p).stem != "report" else Path(p).parent.name: load_report(p) for p in paths}
        if len(reports) < 2:
            raise ValueError("agreement needs at least two reports")
        scores = {model: report_scores(r) for model, r in reports.items()}
        directions = _directions(next(iter(reports.values())))
        shared = set.intersection(*(set(s) for s in scores.values()))
        wanted = [m.strip() for m in measures.split(",") if m.strip()] or sorted(shared)
        missing = [m for m in wanted if m not in shared]
        if missing:
            raise ValueError(f"measures missing from some reports: {missing}")

        rankings = [rank_models({model: s[m] for model, s in scores.items()}, m, directions[m]) for m in wanted]
        # Undefined scores drop models; tau needs the same model set on both sides.
        complete = [r for r in rankings if len(r.models) == len(reports)]
        matrix = agreement_matrix(complete, alpha=alpha, method=correction)

        writer = ReportWriter(out_dir)
        long = matrix.to_frame()
        files = {
            "tau": str(writer.csv("tau_matrix.csv", matrix.tau_frame().reset_index(names="measure"))),
            "pairs": str(writer.csv("agreement.csv", long)),
            "best": str(writer.csv("best_models.csv", best_models(rankings))),
            "summary": str(
                writer.json(
                    "agreement.json",
                    {
                        "models": sorted(reports),
                        "measures": list(matrix.measures),
                        "tau": matrix.tau,
                        "significant": matrix.significant,
                        "warnings": list(matrix.warnings),
                        "correction": correction,
                        "alpha": alpha,
                    },
                )
            ),
        }
        equivalent: List[List[str]] = [
            [row.measure_a, row.measure_b]
            for row in long.itertuples(index=False)
            if row.equivalent and row.measure_a < row.measure_b
        ]
        return {"status": "success", "equivalent": equivalent, "output_files": files}
    except Exception as e:
        return {"status": "failed", "error": str(e)}
