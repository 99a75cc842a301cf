"""Adapter from byte-offset stage-masked SFT records to token-level training
labels, with an executable check that masked tokens contribute zero loss."""

__version__ = "0.1.0"

from .align import IGNORE_INDEX, TokenizedRecord, align_spans, decode_supervised
from .errors import (
    EmptyDataset,
    ModelLoadError,
    OffsetUnavailable,
    SchemaError,
    SftAdapterError,
    SpanOutOfRange,
)
from .model import TinyCausalLM, batch_tensors, masked_loss
from .records import MaskBlock, SftRecord, load_records, record_from_dict
from .tokenizer import ChunkTokenizer, Encoding
from .train import REFERENCE_DEFAULTS, smoke_train
from .verify import verify_masking

__all__ = [
    "IGNORE_INDEX",
    "TokenizedRecord",
    "align_spans",
    "decode_supervised",
    "EmptyDataset",
    "ModelLoadError",
    "OffsetUnavailable",
    "SchemaError",
    "SftAdapterError",
    "SpanOutOfRange",
    "TinyCausalLM",
    "batch_tensors",
    "masked_loss",
    "MaskBlock",
    "SftRecord",
    "load_records",
    "record_from_dict",
    "ChunkTokenizer",
    "Encoding",
    "REFERENCE_DEFAULTS",
    "smoke_train",
    "verify_masking",
]
