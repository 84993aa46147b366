from pathlib import Path
from typing import Any, Dict

from crewai.tools import tool

from recsys_fairness_eval.io_formats import load_interactions, load_item_features, write_similarity
from recsys_fairness_eval.user_fairness import similarity


@tool
def similarity_tool(
    out_dir: str,
    interactions_path: str,
    kind: str = "jaccard",
    features_path: str = "",
    gamma: float = 0.8,
    normalize: bool = False,
) -> Dict[str, Any]:
    """
    Compute pairwise user similarity from interaction histories and write it
    as (user, user, value) triples.

    Args:
        out_dir: Output directory
        interactions_path: Train/validation interactions TSV
        kind: jaccard, cosine or uf (needs features_path)
        features_path: Item feature TSV (item, feature) for uf
        gamma: Jaccard weight of the uf mixture
        normalize: Min-max normalise the pairwise values

    Returns:
        Dict with status, summary statistics and output paths
    """
    try:
        interactions = load_interactions(interactions_path)
        features = load_item_features(features_path) if features_path else None
        sim = similarity(kind, interactions, item_features=features, gamma=gamma, normalize=normalize)
        pairs = sim.pair_values()
        path = write_similarity(sim, Path(out_dir) / f"similarity.{kind}.tsv")
        return {
            "status": "success",
            "users": sim.m,
            "pairs": int(pairs.size),
            "mean": float(pairs.mean()) if pairs.size else None,
            "output_files": {"similarity": str(path)},
        }
    except Exception as e:
        return {"status": "failed", "error": str(e)}
