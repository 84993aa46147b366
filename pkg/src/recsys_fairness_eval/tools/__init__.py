from .evaluate import evaluate_tool
from .bounds import bounds_tool
from .frontier import pareto_tool, dpfr_tool
from .agreement import agree_tool
from .scenarios import synth_tool, rerank_tool
from .similarity import similarity_tool

__all__ = [
    'evaluate_tool',
    'bounds_tool',
    'pareto_tool',
    'dpfr_tool',
    'agree_tool',
    'synth_tool',
    'rerank_tool',
    'similarity_tool'
]
