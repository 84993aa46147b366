from pathlib import Path
from typing import Any, Dict

from crewai.tools import tool

from recsys_fairness_eval.effectiveness import evaluate_effectiveness, per_user_effectiveness
from recsys_fairness_eval.exposure_fairness import evaluate_exposure_suite
from recsys_fairness_eval.group_fairness import attribute_sweep, evaluate_grouping, group_scores
from recsys_fairness_eval.io_formats import load_inputs
from recsys_fairness_eval.relevance_aware_fairness import evaluate_joint_suite
from recsys_fairness_eval.report import MeasureReport, ReportWriter
from recsys_fairness_eval.settings import EvalConfig, config_hash, load_config
from recsys_fairness_eval.user_fairness import evaluate_user_suite, similarity


def _split(paths: str):
    return [p.strip() for p in paths.split(",") if p.strip()]


def build_report(config: EvalConfig, out_dir: str) -> Dict[str, Any]:
    """Compute every configured measure and write the report."""
    inputs = load_inputs(
        runs=config.run,
        qrels=config.qrels,
        interactions=config.interactions,
        catalog=config.catalog,
        groups=config.groups,
        similarity=config.similarity,
    )
    if not inputs.runs:
        raise ValueError("no run file given")
    p = config.params
    run, qrels, catalog, k = inputs.run, inputs.qrels, inputs.catalog, config.k
    rounds = list(inputs.runs)

    report = MeasureReport(
        dataset=Path(config.qrels).stem if config.qrels else "unlabelled",
        run=",".join(Path(r).stem for r in config.run),
        config_hash=config_hash(config),
        id_maps={"items": list(catalog.items), "users": list(run.users)},
    )
    report.add(
        evaluate_exposure_suite(
            rounds, catalog, k,
            measures=config.exposure_measures,
            variants=config.variants,
            gamma=p.gamma_exposure,
            log_base=p.log_base,
            alpha=p.vocd_alpha,
            beta=p.vocd_beta,
        )
    )
    files: Dict[str, str] = {}
    writer = ReportWriter(out_dir)
    if qrels is not None:
        report.effectiveness = evaluate_effectiveness(run, qrels, k, config.effectiveness_measures)
        if config.joint_measures:
            report.add(
                evaluate_joint_suite(
                    rounds, qrels, catalog, k,
                    variants=config.variants,
                    gamma_exposure=p.gamma_exposure,
                    gamma_hd=p.gamma_hd,
                    thresholds=p.thresholds,
                    exclude_single_relevant=config.exclude_single_relevant,
                )
            )
        if config.user_measures:
            sim = inputs.similarity
            if sim is None and inputs.interactions.users and p.similarity != "uf":
                sim = similarity(p.similarity, inputs.interactions, users=run.users)
            suite = evaluate_user_suite(
                run, qrels, k,
                sim=sim,
                interactions=inputs.interactions if inputs.interactions.users else None,
                epsilon=p.peu_epsilon,
                uf_threshold=p.uf_threshold,
            )
            report.add(suite.values())
        if inputs.groups is not None:
            per_user = per_user_effectiveness("NDCG", run, qrels, k)
            attributes = config.group_attributes or list(inputs.groups.attribute_names)
            gs = group_scores(per_user, inputs.groups, attributes)
            report.add(evaluate_grouping(per_user, gs, p.atkinson_epsilon, p.gce).values())
            table, summary = attribute_sweep(per_user, inputs.groups, attributes, epsilon=p.atkinson_epsilon)
            files["groupings"] = str(writer.csv("groupings.csv", table))
            files["groupings_summary"] = str(writer.csv("groupings_summary.csv", summary))

    files.update(writer.report(report, config.output_format))
    return {
        "measures": len(report.results),
        "warnings": report.warning_codes,
        "output_files": files,
    }


@tool
def evaluate_tool(
    out_dir: str,
    run_paths: str = "",
    qrels_path: str = "",
    config_path: str = "",
    catalog_path: str = "",
    interactions_path: str = "",
    groups_path: str = "",
    similarity_path: str = "",
    k: int = 0,
    output_format: str = "",
) -> Dict[str, Any]:
    """
    Evaluate a recommendation run with every exposure, relevance-aware, user and
    group fairness measure plus effectiveness, and write a measure report.

    Args:
        out_dir: Output directory for the report
        run_paths: Comma-separated run TSV files, one per round
        qrels_path: Ground-truth relevance TSV
        config_path: Optional JSON/YAML config; the other arguments override it
        catalog_path: Item catalog, one item per line
        interactions_path: Train/validation interactions TSV
        groups_path: User attribute TSV
        similarity_path: User similarity triples TSV
        k: Cutoff (0 keeps the config value)
        output_format: json, csv or both

    Returns:
        Dict with status, measure count, warning codes and output paths
    """
    try:
        overrides = {
            "run": _split(run_paths) or None,
            "qrels": qrels_path or None,
            "catalog": catalog_path or None,
            "interactions": interactions_path or None,
            "groups": groups_path or None,
            "similarity": similarity_path or None,
            "k": k or None,
            "output_format": output_format or None,
        }
        config = load_config(config_path or None, overrides)
        result = build_report(config, out_dir)
        return {"status": "success", **result}
    except Exception as e:
        return {"status": "failed", "error": str(e)}
