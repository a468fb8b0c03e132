"""Summary-substituted dialogue context assembly and evaluation."""

from .corpus import Dialogue, Persona, Speaker, SummPair, Turn
from .context import AssemblyConfig, ContextAssembly, build_context, omitted_range
from .errors import (BackendError, BudgetError, CacheError, CorpusError,
                     SumctxError, TokenizerError)
from .metrics import MetricReport, evaluate
from .tokenizer import SegmentMarkers, TokenizerSpec, count_tokens

__all__ = [
    "AssemblyConfig", "BackendError", "BudgetError", "CacheError",
    "ContextAssembly", "CorpusError", "Dialogue", "MetricReport", "Persona",
    "SegmentMarkers", "Speaker", "SumctxError", "SummPair", "TokenizerError",
    "TokenizerSpec", "Turn", "build_context", "count_tokens", "evaluate",
    "omitted_range",
]
