#!/usr/bin/env python
import argparse
import logging
import os
import sys
import warnings
from typing import Any, Dict, List, Optional

from recsys_fairness_eval.settings import read_config_file
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

warnings.filterwarnings("ignore", category=SyntaxWarning, module="pysbd")

# The subcommands call the tools directly and never need an LLM.
# run_crew / train / replay / test drive the FairnessAudit crew instead.


def _configure_logging(level: Optional[str]) -> None:
    level = (level or os.environ.get("RFE_LOG_LEVEL") or "WARNING").upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _joined(values: Optional[List[str]]) -> str:
    return ",".join(values or [])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfe", description="Offline relevance and fairness evaluation of recommendation runs")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING (default; or RFE_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_k=True):
        p.add_argument("--out", default="output", help="output directory")
        if with_k:
            p.add_argument("-k", type=int, default=10, help="cutoff")
        return p

    p = common(sub.add_parser("eval", help="compute every measure into a report"), with_k=False)
    p.add_argument("--config", default="", help="JSON or YAML config; flags override it")
    p.add_argument("--run", "--round", dest="runs", action="append", help="run TSV; repeat once per round")
    p.add_argument("--qrels", default="")
    p.add_argument("--catalog", default="")
    p.add_argument("--interactions", default="")
    p.add_argument("--groups", default="")
    p.add_argument("--similarity", default="")
    p.add_argument("-k", type=int, default=0, help="cutoff (default from config, else 10)")
    p.add_argument("--format", dest="output_format", choices=("json", "csv", "both"), default="")

    p = common(sub.add_parser("bounds", help="closed-form most unfair/most fair scores"))
    p.add_argument("-m", type=int, required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--measures", default="")
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--log-base", type=float, default=0.0)
    p.add_argument("--brute-force", action="store_true")

    p = common(sub.add_parser("pareto", help="build or estimate the Pareto frontier"))
    p.add_argument("--qrels", required=True)
    p.add_argument("--catalog", default="")
    p.add_argument("--interactions", default="")
    p.add_argument("--points", type=int, default=0, help="estimated frontier with this many points (0: full)")
    p.add_argument("--rel", default="")
    p.add_argument("--fair", default="")
    p.add_argument("--variant", default="corrected")
    p.add_argument("--every", type=int, default=1)

    p = common(sub.add_parser("dpfr", help="score model runs against a cached frontier"))
    p.add_argument("--trace", required=True)
    p.add_argument("--model", action="append", required=True, help="name=path run TSV; repeatable")
    p.add_argument("--qrels", required=True)
    p.add_argument("--catalog", default="")
    p.add_argument("--rel", default="NDCG")
    p.add_argument("--fair", default="Jain")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--variant", default="corrected")
    p.add_argument("--estimated", action="store_true", help="the trace comes from --points, interpolate the reference point")

    p = common(sub.add_parser("agree", help="measure agreement over several reports"), with_k=False)
    p.add_argument("--report", action="append", required=True, help="report.json; repeatable")
    p.add_argument("--measures", default="")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--correction", choices=("fdr_bh", "bonferroni"), default="fdr_bh")

    p = common(sub.add_parser("synth", help="generate a synthetic scenario"), with_k=False)
    p.add_argument("--scenario", default="")
    p.add_argument("--spec", default="")
    p.add_argument("-m", type=int, default=0)
    p.add_argument("-n", type=int, default=0)
    p.add_argument("-k", type=int, default=0)
    p.add_argument("--mode", default="")
    p.add_argument("--fraction", type=float, default=-1.0)
    p.add_argument("--seed", type=int, default=-1)
    p.add_argument("--qrels", default="")
    p.add_argument("--interactions", default="")
    p.add_argument("--catalog", default="")

    p = common(sub.add_parser("rerank", help="fair re-ranking of a deeper run"))
    p.add_argument("--run", required=True)
    p.add_argument("--method", choices=("combmnz", "borda", "greedy_substitution"), default="greedy_substitution")
    p.add_argument("--depth", type=int, default=25)
    p.add_argument("--beta", type=float, default=0.05)
    p.add_argument("--cap", type=float, default=0.25)

    p = common(sub.add_parser("sim", help="user similarity from interactions"), with_k=False)
    p.add_argument("--interactions", required=True)
    p.add_argument("--kind", choices=("jaccard", "cosine", "uf"), default="jaccard")
    p.add_argument("--features", default="")
    p.add_argument("--gamma", type=float, default=0.8)
    p.add_argument("--normalize", action="store_true")
    return parser


def dispatch(args: argparse.Namespace) -> Dict[str, Any]:
    """Call the tool behind one subcommand."""
    c = args.command
    if c == "eval":
        return evaluate_tool.func(
            out_dir=args.out, run_paths=_joined(args.runs), qrels_path=args.qrels, config_path=args.config,
            catalog_path=args.catalog, interactions_path=args.interactions, groups_path=args.groups,
            similarity_path=args.similarity, k=args.k, output_format=args.output_format,
        )
    if c == "bounds":
        return bounds_tool.func(
            out_dir=args.out, k=args.k, m=args.m, n=args.n, measures=args.measures,
            beta=args.beta, log_base=args.log_base, brute_force=args.brute_force,
        )
    if c == "pareto":
        return pareto_tool.func(
            out_dir=args.out, qrels_path=args.qrels, catalog_path=args.catalog, interactions_path=args.interactions,
            k=args.k, points=args.points, rel_measures=args.rel, fair_measures=args.fair,
            variant=args.variant, every=args.every,
        )
    if c == "dpfr":
        return dpfr_tool.func(
            out_dir=args.out, trace_path=args.trace, model_runs=_joined(args.model), qrels_path=args.qrels,
            catalog_path=args.catalog, k=args.k, rel=args.rel, fair=args.fair, alpha=args.alpha, variant=args.variant,
            estimated=args.estimated,
        )
    if c == "agree":
        return agree_tool.func(
            out_dir=args.out, report_paths=_joined(args.report), measures=args.measures,
            alpha=args.alpha, correction=args.correction,
        )
    if c == "synth":
        return synth_tool.func(
            out_dir=args.out, scenario=args.scenario, spec_path=args.spec, m=args.m, n=args.n, k=args.k,
            mode=args.mode, fraction=args.fraction, seed=args.seed, qrels_path=args.qrels,
            interactions_path=args.interactions, catalog_path=args.catalog,
        )
    if c == "rerank":
        return rerank_tool.func(
            out_dir=args.out, run_path=args.run, method=args.method, k=args.k,
            depth=args.depth, beta=args.beta, cap=args.cap,
        )
    return similarity_tool.func(
        out_dir=args.out, interactions_path=args.interactions, kind=args.kind,
        features_path=args.features, gamma=args.gamma, normalize=args.normalize,
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.log_level)
    print(f"🚀 Running {args.command}...")
    result = dispatch(args)
    if result.get("status") != "success":
        print(f"❌ {args.command} failed: {result.get('error')}")
        return 1
    for code, where in sorted((result.get("warnings") or {}).items()):
        print(f"⚠️ {code}: {', '.join(where)}")
    for name, path in sorted((result.get("output_files") or {}).items()):
        print(f"💾 {name}: {path}")
    print(f"✅ {args.command} completed!")
    return 0


def run():
    """
    Console entry point of the subcommand CLI.
    """
    sys.exit(main())


CREW_INPUTS_FILE = "crew_inputs.yaml"


def _crew_inputs() -> Dict[str, Any]:
    """Task inputs, from crew_inputs.yaml in the working directory when present."""
    inputs = {
        "run_paths": "",
        "qrels_path": "",
        "catalog_path": "",
        "interactions_path": "",
        "out_dir": "output",
        "k": 10,
        "points": 6,
    }
    if os.path.exists(CREW_INPUTS_FILE):
        inputs.update(read_config_file(CREW_INPUTS_FILE))
    return inputs


def run_crew():
    """
    Run the FairnessAudit crew (needs an LLM).
    """
    from recsys_fairness_eval.crew import FairnessAudit

    try:
        print("🚀 Running fairness audit crew...")
        FairnessAudit().crew().kickoff(inputs=_crew_inputs())
        print("✅ Fairness audit completed!")
    except Exception as e:
        raise Exception(f"An error occurred while running the crew: {e}")


def train():
    """
    Train the crew for a given number of iterations.
    """
    from recsys_fairness_eval.crew import FairnessAudit

    try:
        FairnessAudit().crew().train(n_iterations=int(sys.argv[1]), filename=sys.argv[2], inputs=_crew_inputs())

    except Exception as e:
        raise Exception(f"An error occurred while training the crew: {e}")

def replay():
    """
    Replay the crew execution from a specific task.
    """
    from recsys_fairness_eval.crew import FairnessAudit

    try:
        FairnessAudit().crew().replay(task_id=sys.argv[1])

    except Exception as e:
        raise Exception(f"An error occurred while replaying the crew: {e}")

def test():
    """
    Test the crew execution and returns the results.
    """
    from recsys_fairness_eval.crew import FairnessAudit

    try:
        FairnessAudit().crew().test(n_iterations=int(sys.argv[1]), eval_llm=sys.argv[2], inputs=_crew_inputs())

    except Exception as e:
        raise Exception(f"An error occurred while testing the crew: {e}")


if __name__ == "__main__":
    run()
