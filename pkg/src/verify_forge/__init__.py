"""Toolkit for building self-verification traces, loss masks, and abstention
baselines for factoid question answering."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    ABSTENTION_SENTENCE,
    ConsistencyVerdict,
    CorrectnessLabel,
    FinalMode,
    QuestionRecord,
    Stage,
    StageKind,
    VerificationTrace,
    parse_trace,
    render_trace,
    validate_trace,
)
from .masking import MaskRegime, annotate, compute_stage_mask, export_sft, k_star  # noqa: F401
from .prompts import StrategyPolicy, VerificationStrategy, default_policy  # noqa: F401
