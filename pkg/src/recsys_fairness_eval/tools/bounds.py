from typing import Any, Dict

from crewai.tools import tool

from recsys_fairness_eval.bounds_oracle import brute_force_bounds
from recsys_fairness_eval.errors import UnsupportedBoundError
from recsys_fairness_eval.exposure_fairness import exposure_bounds
from recsys_fairness_eval.report import ReportWriter

CLOSED_FORM = ("Jain", "QF", "Ent", "Gini", "Gini-w", "FSat", "VoCD")


@tool
def bounds_tool(
    out_dir: str,
    k: int,
    m: int,
    n: int,
    measures: str = "",
    beta: float = 0.0,
    log_base: float = 0.0,
    brute_force: bool = False,
) -> Dict[str, Any]:
    """
    Most unfair and most fair achievable scores of the exposure measures for a
    dataset shape (k, m, n), optionally checked by exhaustive enumeration.

    Args:
        out_dir: Output directory for bounds.json
        k: Cutoff
        m: Number of users
        n: Number of items
        measures: Comma-separated measure ids (default: all with a closed form)
        beta: VoCD beta
        log_base: Entropy log base (0 uses n)
        brute_force: Also enumerate every output (toy sizes only)

    Returns:
        Dict with status, bounds per measure and output paths
    """
    try:
        names = [s.strip() for s in measures.split(",") if s.strip()] or list(CLOSED_FORM)
        bounds: Dict[str, Any] = {}
        for name in names:
            entry: Dict[str, Any] = {}
            try:
                entry["closed_form"] = exposure_bounds(name, k, m, n, beta, log_base or None).to_dict()
            except UnsupportedBoundError as e:
                entry["closed_form"] = None
                entry["closed_form_error"] = str(e)
            if brute_force and name != "VoCD":
                try:
                    params = {"log_base": log_base or None} if name == "Ent" else {}
                    entry["enumeration"] = brute_force_bounds(name, k, m, n, **params).to_dict()
                except UnsupportedBoundError as e:
                    entry["enumeration_error"] = str(e)
            bounds[name] = entry

        writer = ReportWriter(out_dir)
        path = writer.json("bounds.json", {"k": k, "m": m, "n": n, "bounds": bounds})
        return {
            "status": "success",
            "bounds": bounds,
            "output_files": {"bounds": str(path)},
        }
    except Exception as e:
        return {"status": "failed", "error": str(e)}
