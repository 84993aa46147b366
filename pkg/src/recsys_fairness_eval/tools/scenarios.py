from pathlib import Path
from typing import Any, Dict

from crewai.tools import tool

from recsys_fairness_eval.io_formats import (
    load_catalog,
    load_interactions,
    load_qrels,
    load_run,
    write_catalog,
    write_qrels,
    write_run,
    write_similarity,
)
from recsys_fairness_eval.rerankers import greedy_substitution, combmnz, borda
from recsys_fairness_eval.settings import RerankSpec, ScenarioSpec, build_model
from recsys_fairness_eval.synth_scenarios import run_scenario


@tool
def synth_tool(
    out_dir: str,
    scenario: str = "",
    spec_path: str = "",
    m: int = 0,
    n: int = 0,
    k: int = 0,
    mode: str = "",
    fraction: float = -1.0,
    seed: int = -1,
    qrels_path: str = "",
    interactions_path: str = "",
    catalog_path: str = "",
) -> Dict[str, Any]:
    """
    Generate a synthetic scenario (extreme exposure runs, relevant-item insertion,
    relevance variation, similarity sampling or a model suite) as standard files.

    Args:
        out_dir: Output directory
        scenario: Scenario id, overrides the scenario file
        spec_path: Optional JSON/YAML scenario spec
        m, n, k: Dataset shape overrides (0 keeps the scenario file value)
        mode: repeatable or nonrepeatable
        fraction: Share of zero-relevance users for vary_relevance (-1 keeps the scenario file value)
        seed: Random seed (-1 keeps the scenario file value)
        qrels_path, interactions_path, catalog_path: Inputs of data-driven scenarios

    Returns:
        Dict with status and output paths
    """
    try:
        overrides = {
            "scenario": scenario or None,
            "m": m or None,
            "n": n or None,
            "k": k or None,
            "mode": mode or None,
            "fraction": fraction if fraction >= 0 else None,
            "seed": seed if seed >= 0 else None,
        }
        spec = build_model(ScenarioSpec, spec_path or None, overrides)
        catalog = load_catalog(catalog_path) if catalog_path else None
        qrels = load_qrels(qrels_path, catalog) if qrels_path else None
        interactions = load_interactions(interactions_path, catalog) if interactions_path else None
        output = run_scenario(spec, qrels=qrels, interactions=interactions, catalog=catalog)

        out = Path(out_dir)
        files: Dict[str, str] = {}
        if output.catalog is not None:
            files["catalog"] = str(write_catalog(output.catalog, out / "catalog.tsv"))
        for name, run in output.runs.items():
            files[f"run:{name}"] = str(write_run(run, out / f"{name}.run.tsv"))
        for name, q in output.qrels.items():
            files[f"qrels:{name}"] = str(write_qrels(q, out / f"{name}.tsv"))
        if output.similarity is not None:
            files["similarity"] = str(write_similarity(output.similarity, out / "similarity.tsv"))
        return {"status": "success", "scenario": spec.scenario, "seed": spec.seed, "output_files": files}
    except Exception as e:
        return {"status": "failed", "error": str(e)}


@tool
def rerank_tool(
    out_dir: str,
    run_path: str,
    method: str = "greedy_substitution",
    k: int = 10,
    depth: int = 25,
    beta: float = 0.05,
    cap: float = 0.25,
) -> Dict[str, Any]:
    """
    Re-rank the top-k' candidates of every user for exposure fairness with
    CombMNZ, Borda count or greedy substitution.

    Args:
        out_dir: Output directory
        run_path: Run TSV with predicted scores, at least k' items per user
        method: combmnz, borda or greedy_substitution
        k: Output cutoff
        depth: Candidate depth k'
        beta: Share of items treated as most/least popular (greedy substitution)
        cap: Maximum share of the m*k slots replaced (greedy substitution)

    Returns:
        Dict with status, swap counts and output paths
    """
    try:
        spec = RerankSpec(method=method, k=k, depth=depth, beta=beta, cap=cap)
        run = load_run(run_path)
        if spec.method == "greedy_substitution":
            result = greedy_substitution(run, spec.k, spec.depth, spec.beta, spec.cap)
        elif spec.method == "combmnz":
            result = combmnz(run, spec.k, spec.depth)
        else:
            result = borda(run, spec.k, spec.depth)
        path = write_run(result.run, Path(out_dir) / f"{Path(run_path).stem}.{spec.method}.tsv")
        return {
            "status": "success",
            "method": spec.method,
            "swaps": result.swaps,
            "skipped": result.skipped,
            "output_files": {"run": str(path)},
        }
    except Exception as e:
        return {"status": "failed", "error": str(e)}
