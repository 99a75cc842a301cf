"""Align byte-offset mask blocks to token positions.

The rule is conservative: a target token is supervised only when its byte
range lies entirely inside a supervised block. Tokens that straddle a block
boundary are ignored, so no byte from an unsupervised block ever reaches the
loss. Prompt tokens and specials are always ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import OffsetUnavailable, SpanOutOfRange
from .records import SftRecord
from .tokenizer import ASSISTANT, BOS, EOS, USER, ChunkTokenizer

IGNORE_INDEX = -100


def build_prompt(record: SftRecord) -> str:
    """The user turn preceding the trace. The interchange record does not
    carry the original question text, so the prompt is a stable header over
    the record identity; it is never supervised either way."""
    return f"[question {record.question_id}]\n"


@dataclass
class TokenizedRecord:
    question_id: str
    regime: str
    input_ids: list[int]
    # labels[i] is the target value for position i; supervised[i] says whether
    # it participates in the loss. Keeping the two separate makes the
    # zero-contribution property directly testable: flipping labels at
    # unsupervised positions must not move the loss.
    labels: list[int]
    supervised: list[bool]
    # Byte offsets into the target text for target tokens, None elsewhere.
    target_offsets: list[tuple[int, int] | None]
    report: dict = field(default_factory=dict)

    def ignore_index_labels(self) -> list[int]:
        """Trainer-ingestible labels with the conventional ignore marker."""
        return [
            label if keep else IGNORE_INDEX
            for label, keep in zip(self.labels, self.supervised)
        ]

    @property
    def tokens_supervised(self) -> int:
        return sum(self.supervised)


def _inside_supervised(start: int, end: int, ranges: list[tuple[int, int]]) -> bool:
    return any(start >= lo and end <= hi for lo, hi in ranges)


def _overlaps_supervised(start: int, end: int, ranges: list[tuple[int, int]]) -> bool:
    return any(start < hi and end > lo for lo, hi in ranges)


def align_spans(record: SftRecord, tokenizer: ChunkTokenizer) -> TokenizedRecord:
    if not getattr(tokenizer, "has_byte_offsets", False):
        raise OffsetUnavailable(getattr(tokenizer, "tokenizer_id", repr(tokenizer)))

    total_bytes = len(record.text.encode("utf-8"))
    for block in record.blocks:
        if block.start < 0 or block.end > total_bytes:
            raise SpanOutOfRange(
                f"[{block.start}, {block.end}) outside text of {total_bytes} bytes"
            )
    ranges = record.supervised_byte_ranges()

    prompt = tokenizer.encode(build_prompt(record))
    target = tokenizer.encode(record.text)

    input_ids = [BOS, USER, *prompt.ids, ASSISTANT, *target.ids, EOS]
    labels = list(input_ids)
    supervised = [False] * len(input_ids)
    target_offsets: list[tuple[int, int] | None] = [None] * len(input_ids)

    boundary_adjustments = 0
    target_base = 3 + len(prompt.ids)  # BOS, USER, prompt..., ASSISTANT
    for i, (start, end) in enumerate(target.offsets):
        pos = target_base + i
        target_offsets[pos] = (start, end)
        if _inside_supervised(start, end, ranges):
            supervised[pos] = True
        elif _overlaps_supervised(start, end, ranges):
            boundary_adjustments += 1

    record_report = {
        "bytes_supervised": sum(hi - lo for lo, hi in ranges),
        "tokens_supervised": sum(supervised),
        "boundary_adjustments": boundary_adjustments,
        "prompt_tokens": len(prompt.ids),
        "target_tokens": len(target.ids),
    }
    return TokenizedRecord(
        question_id=record.question_id,
        regime=record.regime,
        input_ids=input_ids,
        labels=labels,
        supervised=supervised,
        target_offsets=target_offsets,
        report=record_report,
    )


def decode_supervised(tokenized: TokenizedRecord, record: SftRecord) -> str:
    """Reconstruct the text covered by supervised tokens from their offsets."""
    blob = record.text.encode("utf-8")
    parts = []
    for keep, offsets in zip(tokenized.supervised, tokenized.target_offsets):
        if keep and offsets is not None:
            parts.append(blob[offsets[0] : offsets[1]])
    return b"".join(parts).decode("utf-8")
