"""Reader for the stage-masked SFT record interchange format.

One JSON object per line:

    {"version": 1, "question_id": ..., "strategy": ..., "regime": "NM|MM|SM",
     "text": <rendered trace>,
     "blocks": [{"stage": ..., "start": <byte>, "end": <byte>, "supervised": bool}, ...]}

Blocks carry half-open byte offsets into the UTF-8 encoding of ``text`` and
tile it exactly. This module is the only coupling to the producing pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .errors import SchemaError

SUPPORTED_VERSION = 1


@dataclass(frozen=True)
class MaskBlock:
    stage: str
    start: int
    end: int
    supervised: bool


@dataclass(frozen=True)
class SftRecord:
    question_id: str
    strategy: str
    regime: str
    text: str
    blocks: tuple[MaskBlock, ...]

    def supervised_byte_ranges(self) -> list[tuple[int, int]]:
        return [(b.start, b.end) for b in self.blocks if b.supervised]


def record_from_dict(data: dict) -> SftRecord:
    try:
        version = data["version"]
        if version != SUPPORTED_VERSION:
            raise SchemaError(f"unsupported version {version}")
        blocks = tuple(
            MaskBlock(
                stage=str(b["stage"]),
                start=int(b["start"]),
                end=int(b["end"]),
                supervised=bool(b["supervised"]),
            )
            for b in data["blocks"]
        )
        record = SftRecord(
            question_id=str(data["question_id"]),
            strategy=str(data["strategy"]),
            regime=str(data["regime"]),
            text=str(data["text"]),
            blocks=blocks,
        )
    except KeyError as exc:
        raise SchemaError(f"missing field {exc.args[0]!r}") from exc

    total = len(record.text.encode("utf-8"))
    prev_end = 0
    for block in record.blocks:
        if block.start != prev_end:
            raise SchemaError(
                f"blocks must tile the text; gap before byte {block.start}"
            )
        if block.end < block.start:
            raise SchemaError(f"negative-length block at byte {block.start}")
        prev_end = block.end
    if record.blocks and prev_end != total:
        raise SchemaError(f"blocks end at byte {prev_end}, text has {total} bytes")
    return record


def load_records(path: Union[str, Path]) -> list[SftRecord]:
    records = []
    for line_no, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {line_no}: invalid JSON: {exc.msg}") from exc
        records.append(record_from_dict(data))
    return records
