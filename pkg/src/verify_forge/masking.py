"""Loss-mask annotation for rendered traces.

Three supervision regimes over the six trace stages:

* NM supervises every stage;
* MM drops exactly the hallucinated stages;
* SM drops every stage up to and including the last hallucinated one, so the
  supervised region is a single suffix.

The rendered trace is carved into six contiguous byte blocks, one per stage.
Each block covers its stage text plus the scaffold that introduces it, so the
blocks tile the rendered text exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .core import STAGE_ORDER, StageKind, VerificationTrace, render_trace

N_STAGES = len(STAGE_ORDER)

SFT_RECORD_VERSION = 1


class MaskRegime(str, Enum):
    NM = "NM"
    MM = "MM"
    SM = "SM"


def k_star(hallucinated: Sequence[bool]) -> int:
    """1-based index of the last hallucinated stage, or 0 when none is."""
    if len(hallucinated) != N_STAGES:
        raise ValueError(f"expected {N_STAGES} indicators, got {len(hallucinated)}")
    last = 0
    for j, flag in enumerate(hallucinated, start=1):
        if flag:
            last = j
    return last


def compute_stage_mask(hallucinated: Sequence[bool], regime: MaskRegime) -> list[bool]:
    """Per-stage supervision flags (True = stage contributes to the loss)."""
    if len(hallucinated) != N_STAGES:
        raise ValueError(f"expected {N_STAGES} indicators, got {len(hallucinated)}")
    if regime is MaskRegime.NM:
        return [True] * N_STAGES
    if regime is MaskRegime.MM:
        return [not h for h in hallucinated]
    cutoff = k_star(hallucinated)
    return [j > cutoff for j in range(1, N_STAGES + 1)]


@dataclass(frozen=True)
class MaskBlock:
    stage: StageKind
    start: int  # byte offset into the UTF-8 rendered text, half-open
    end: int
    supervised: bool


@dataclass
class MaskedRecord:
    question_id: str
    strategy: str
    regime: MaskRegime
    text: str
    blocks: list[MaskBlock]

    def to_dict(self) -> dict:
        return {
            "version": SFT_RECORD_VERSION,
            "question_id": self.question_id,
            "strategy": self.strategy,
            "regime": self.regime.value,
            "text": self.text,
            "blocks": [
                {
                    "stage": b.stage.value,
                    "start": b.start,
                    "end": b.end,
                    "supervised": b.supervised,
                }
                for b in self.blocks
            ],
        }


def annotate(trace: VerificationTrace, regime: MaskRegime) -> MaskedRecord:
    """Render a trace and attach per-stage supervision blocks.

    Block j runs from the previous stage's text end to stage j's text end, so
    intervening scaffold is attributed to the stage it introduces. The first
    block starts at 0 and the last ends at the total byte length, so the
    blocks partition the rendered text.
    """
    rendered, spans = render_trace(trace)
    total = len(rendered.encode("utf-8"))
    mask = compute_stage_mask(trace.hallucination_vector(), regime)

    blocks: list[MaskBlock] = []
    prev_end = 0
    for j, kind in enumerate(STAGE_ORDER):
        _, text_end = spans[kind]
        block_end = total if j == N_STAGES - 1 else text_end
        blocks.append(MaskBlock(kind, prev_end, block_end, mask[j]))
        prev_end = block_end

    return MaskedRecord(
        question_id=trace.question_id,
        strategy=trace.strategy,
        regime=regime,
        text=rendered,
        blocks=blocks,
    )


def export_sft(
    traces: Iterable[VerificationTrace],
    regimes: Sequence[MaskRegime],
    out_dir: Path,
) -> dict:
    """Write one JSONL file per regime plus a checksum manifest.

    Returns the manifest dict: per-regime file name, record count and sha256.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    traces = list(traces)

    manifest: dict = {"version": SFT_RECORD_VERSION, "files": {}}
    for regime in regimes:
        name = f"sft_{regime.value.lower()}.jsonl"
        path = out_dir / name
        with path.open("w", encoding="utf-8") as fh:
            for trace in traces:
                fh.write(json.dumps(annotate(trace, regime).to_dict(), ensure_ascii=False) + "\n")
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        manifest["files"][regime.value] = {
            "file": name,
            "records": len(traces),
            "sha256": digest,
        }

    (out_dir / "sft_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def load_masked_records(path: Path) -> list[MaskedRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        data = json.loads(line)
        records.append(
            MaskedRecord(
                question_id=data["question_id"],
                strategy=data["strategy"],
                regime=MaskRegime(data["regime"]),
                text=data["text"],
                blocks=[
                    MaskBlock(StageKind(b["stage"]), b["start"], b["end"], b["supervised"])
                    for b in data["blocks"]
                ],
            )
        )
    return records
