"""Domain types for questions and verification traces, plus the canonical
rendered-trace format with byte-span bookkeeping.

A verification trace walks through six stages: an initial answer, a
verification question, an answer to that question, a revised answer, a
consistency judgment, and the surface-level final response. The first five
live inside ``<verify>`` ... ``</verify>`` delimiters; the final response is
appended after the block. Rendering is deterministic so that character spans
(measured in bytes over the UTF-8 encoding) can be used for loss masking
downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Optional

from .errors import (
    EmptyStageText,
    MissingStage,
    ScaffoldMismatch,
    UnterminatedVerifyBlock,
)

ABSTENTION_SENTENCE = "I do not have sufficient knowledge to answer this question."

VERIFY_OPEN = "<verify>"
VERIFY_CLOSE = "</verify>"


class StageKind(Enum):
    INITIAL_ANSWER = "initial_answer"
    VERIFICATION_QUESTION = "verification_question"
    VERIFICATION_ANSWER = "verification_answer"
    REVISED_ANSWER = "revised_answer"
    CONSISTENCY_JUDGMENT = "consistency_judgment"
    FINAL_RESPONSE = "final_response"


STAGE_ORDER: tuple[StageKind, ...] = tuple(StageKind)

# Stages whose text can carry (possibly wrong) factual answer content.
ANSWER_STAGES = frozenset(
    {StageKind.INITIAL_ANSWER, StageKind.VERIFICATION_ANSWER, StageKind.REVISED_ANSWER}
)


class CorrectnessLabel(str, Enum):
    CORRECT = "Correct"
    INCORRECT = "Incorrect"
    REFUSAL = "Refusal"


class ConsistencyVerdict(str, Enum):
    CONSISTENT = "Consistent"
    INCONSISTENT = "Inconsistent"


class FinalMode(str, Enum):
    ANSWER = "answer"
    ABSTAIN = "abstain"


@dataclass(frozen=True)
class QuestionRecord:
    """A factoid question with its gold answer(s) and provenance tag."""

    id: str
    question: str
    gold_answers: tuple[str, ...]
    dataset_tag: str = "native"

    def __post_init__(self) -> None:
        if not self.gold_answers:
            raise ValueError(f"question {self.id}: gold_answers must be non-empty")
        for a in self.gold_answers:
            if not a.strip():
                raise ValueError(f"question {self.id}: blank gold answer")


@dataclass
class Stage:
    kind: StageKind
    text: str
    hallucinated: bool = False
    label: Optional[CorrectnessLabel] = None
    # Half-open byte interval into the rendered trace, filled by render_trace.
    span: Optional[tuple[int, int]] = None


@dataclass
class VerificationTrace:
    question_id: str
    strategy: str
    stages: list[Stage]
    consistency: ConsistencyVerdict
    kept: bool
    final_mode: FinalMode
    generation_metadata: dict[str, Any] = field(default_factory=dict)

    def stage(self, kind: StageKind) -> Stage:
        for s in self.stages:
            if s.kind == kind:
                return s
        raise MissingStage(kind)

    def has_stage(self, kind: StageKind) -> bool:
        return any(s.kind == kind for s in self.stages)

    def hallucination_vector(self) -> list[bool]:
        """The per-stage hallucination indicators in stage order."""
        return [self.stage(k).hallucinated for k in STAGE_ORDER]


# --- rendered scaffold -------------------------------------------------------
#
# The scaffold pieces below are fixed; only the strategy display name varies.
# Trailing whitespace is normalized so that the rendering is byte-reproducible.

_SCAFFOLD_A0 = VERIFY_OPEN + "\nLet me first try to answer the question. My answer: "
_SCAFFOLD_QV_PRE = (
    "\n\nNow, let me try to verify my answer by asking a followup verification "
    "question. Given the question, my verification strategy is: **"
)
_SCAFFOLD_QV_POST = "**\n\n*Verification Question*: "
_SCAFFOLD_AV = "\n\n*My response to the Verification Question*: "
_SCAFFOLD_A1 = (
    "\n\nNow based on the above verification, let me try to answer the question "
    "again. My answer based on the verification:\n"
)
_SCAFFOLD_R = "\n\n"
_SCAFFOLD_FINAL = "\n\n" + VERIFY_CLOSE + "\n\n"

# Display names used inside the rendered trace, one per strategy identifier.
STRATEGY_DISPLAY = {
    "rephrase": "Rephrase Questions",
    "implication": "Logical Implication",
    "inverse": "Inverse Query",
    "justification": "Justification",
    "temporal": "Temporal / Causal Probing",
    "abstraction": "Abstraction / Categorization Probing",
    "disjunction": "Mutual Exclusivity / Disjunction Probing",
    "comparative": "Analogical or Comparative Probing",
    "authority": "Source or Authority Probing",
}
_DISPLAY_TO_STRATEGY = {v: k for k, v in STRATEGY_DISPLAY.items()}


def strategy_display(strategy: str) -> str:
    return STRATEGY_DISPLAY.get(strategy, strategy)


def render_trace(trace: VerificationTrace) -> tuple[str, dict[StageKind, tuple[int, int]]]:
    """Render a kept trace into its canonical text form.

    Returns the rendered text and per-stage half-open byte intervals into its
    UTF-8 encoding. Extracting ``rendered_bytes[start:end]`` for any stage
    yields exactly that stage's text.
    """
    for kind in STAGE_ORDER:
        if not trace.has_stage(kind):
            raise MissingStage(kind)
        if not trace.stage(kind).text:
            raise EmptyStageText(kind)

    texts = {k: trace.stage(k).text for k in STAGE_ORDER}
    pieces = [
        (_SCAFFOLD_A0, None),
        (texts[StageKind.INITIAL_ANSWER], StageKind.INITIAL_ANSWER),
        (_SCAFFOLD_QV_PRE + strategy_display(trace.strategy) + _SCAFFOLD_QV_POST, None),
        (texts[StageKind.VERIFICATION_QUESTION], StageKind.VERIFICATION_QUESTION),
        (_SCAFFOLD_AV, None),
        (texts[StageKind.VERIFICATION_ANSWER], StageKind.VERIFICATION_ANSWER),
        (_SCAFFOLD_A1, None),
        (texts[StageKind.REVISED_ANSWER], StageKind.REVISED_ANSWER),
        (_SCAFFOLD_R, None),
        (texts[StageKind.CONSISTENCY_JUDGMENT], StageKind.CONSISTENCY_JUDGMENT),
        (_SCAFFOLD_FINAL, None),
        (texts[StageKind.FINAL_RESPONSE], StageKind.FINAL_RESPONSE),
    ]

    spans: dict[StageKind, tuple[int, int]] = {}
    offset = 0
    out: list[str] = []
    for text, kind in pieces:
        nbytes = len(text.encode("utf-8"))
        if kind is not None:
            spans[kind] = (offset, offset + nbytes)
        offset += nbytes
        out.append(text)

    rendered = "".join(out)
    for kind, (start, end) in spans.items():
        trace.stage(kind).span = (start, end)
    return rendered, spans


def parse_trace(rendered: str) -> VerificationTrace:
    """Parse a rendered trace back into stage kinds and texts.

    Labels and hallucination flags are left unset; the consistency verdict and
    final mode are inferred from the narrative and the final response text.
    """
    if VERIFY_CLOSE not in rendered:
        raise UnterminatedVerifyBlock()

    cursor = 0

    def expect(scaffold: str) -> None:
        nonlocal cursor
        if not rendered.startswith(scaffold, cursor):
            raise ScaffoldMismatch(scaffold)
        cursor += len(scaffold)

    def take_until(scaffold: str) -> str:
        nonlocal cursor
        idx = rendered.find(scaffold, cursor)
        if idx < 0:
            raise ScaffoldMismatch(scaffold)
        text = rendered[cursor:idx]
        cursor = idx + len(scaffold)
        return text

    expect(_SCAFFOLD_A0)
    a0 = take_until(_SCAFFOLD_QV_PRE)
    display = take_until(_SCAFFOLD_QV_POST)
    qv = take_until(_SCAFFOLD_AV)
    av = take_until(_SCAFFOLD_A1)
    a1 = take_until(_SCAFFOLD_R)
    r = take_until(_SCAFFOLD_FINAL)
    final = rendered[cursor:]
    for text, kind in [
        (a0, StageKind.INITIAL_ANSWER),
        (qv, StageKind.VERIFICATION_QUESTION),
        (av, StageKind.VERIFICATION_ANSWER),
        (a1, StageKind.REVISED_ANSWER),
        (r, StageKind.CONSISTENCY_JUDGMENT),
        (final, StageKind.FINAL_RESPONSE),
    ]:
        if not text:
            raise EmptyStageText(kind)

    final_mode = FinalMode.ABSTAIN if final.strip() == ABSTENTION_SENTENCE else FinalMode.ANSWER
    consistency = (
        ConsistencyVerdict.CONSISTENT
        if final_mode is FinalMode.ANSWER
        else ConsistencyVerdict.INCONSISTENT
    )
    stages = [
        Stage(StageKind.INITIAL_ANSWER, a0),
        Stage(StageKind.VERIFICATION_QUESTION, qv),
        Stage(StageKind.VERIFICATION_ANSWER, av),
        Stage(StageKind.REVISED_ANSWER, a1),
        Stage(StageKind.CONSISTENCY_JUDGMENT, r),
        Stage(StageKind.FINAL_RESPONSE, final),
    ]
    return VerificationTrace(
        question_id="",
        strategy=_DISPLAY_TO_STRATEGY.get(display, display),
        stages=stages,
        consistency=consistency,
        kept=True,
        final_mode=final_mode,
    )


def validate_trace(trace: VerificationTrace) -> list[str]:
    """Check every trace invariant and return violation descriptors.

    The result is deterministic: violations are reported in a fixed check
    order. An empty list means the trace is valid.
    """
    violations: list[str] = []

    kinds = [s.kind for s in trace.stages]
    expected = list(STAGE_ORDER)
    missing = [k for k in STAGE_ORDER if k not in kinds]
    if trace.kept and missing:
        violations.append(
            "missing stages: " + ", ".join(k.value for k in missing)
        )
    present_in_order = [k for k in kinds if k in STAGE_ORDER]
    if present_in_order != sorted(present_in_order, key=expected.index) or len(kinds) != len(
        set(kinds)
    ):
        violations.append("stages out of order or duplicated")

    for s in trace.stages:
        if s.hallucinated and s.kind not in ANSWER_STAGES:
            violations.append(f"non-answer stage flagged hallucinated: {s.kind.value}")
        if (
            s.label is not None
            and s.kind in ANSWER_STAGES
            and s.label is not CorrectnessLabel.CORRECT
            and not s.hallucinated
        ):
            violations.append(
                f"answer stage labeled {s.label.value} but not flagged hallucinated: {s.kind.value}"
            )

    if trace.kept and not missing:
        a0_label = trace.stage(StageKind.INITIAL_ANSWER).label
        aligned_answer = (
            a0_label is CorrectnessLabel.CORRECT
            and trace.consistency is ConsistencyVerdict.CONSISTENT
            and trace.final_mode is FinalMode.ANSWER
        )
        aligned_abstain = (
            a0_label is CorrectnessLabel.INCORRECT
            and trace.consistency is ConsistencyVerdict.INCONSISTENT
            and trace.final_mode is FinalMode.ABSTAIN
        )
        if not (aligned_answer or aligned_abstain):
            violations.append(
                "kept trace violates the aligned-outcome rule "
                f"(label(a0)={a0_label.value if a0_label else None}, "
                f"consistency={trace.consistency.value}, final_mode={trace.final_mode.value})"
            )

        final_text = trace.stage(StageKind.FINAL_RESPONSE).text
        a0_text = trace.stage(StageKind.INITIAL_ANSWER).text
        if trace.final_mode is FinalMode.ANSWER and final_text != a0_text:
            violations.append("final response must repeat the initial answer verbatim")
        if trace.final_mode is FinalMode.ABSTAIN and final_text != ABSTENTION_SENTENCE:
            violations.append("final response must be the fixed abstention sentence")

    present_spans = [
        (expected.index(s.kind), s.span) for s in trace.stages if s.span is not None
    ]
    present_spans.sort()
    last_end = -1
    for _, (start, end) in present_spans:
        if start >= end:
            violations.append("degenerate stage span")
            break
        if start <= last_end:
            violations.append("stage spans overlap or are not strictly increasing")
            break
        last_end = end

    return violations


# --- canonical trace file ----------------------------------------------------

TRACE_RECORD_VERSION = 1


def trace_to_record(trace: VerificationTrace, rendered: Optional[str] = None) -> dict:
    """Serialize a trace to the canonical one-record-per-line form."""
    if rendered is None and trace.kept:
        rendered, _ = render_trace(trace)
    return {
        "version": TRACE_RECORD_VERSION,
        "question_id": trace.question_id,
        "strategy": trace.strategy,
        "stages": [
            {
                "kind": s.kind.value,
                "text": s.text,
                "hallucinated": s.hallucinated,
                "label": s.label.value if s.label else None,
                "span": list(s.span) if s.span else None,
            }
            for s in trace.stages
        ],
        "consistency": trace.consistency.value,
        "kept": trace.kept,
        "final_mode": trace.final_mode.value,
        "metadata": trace.generation_metadata,
        "rendered": rendered,
    }


def trace_from_record(record: dict) -> VerificationTrace:
    stages = [
        Stage(
            kind=StageKind(s["kind"]),
            text=s["text"],
            hallucinated=s["hallucinated"],
            label=CorrectnessLabel(s["label"]) if s.get("label") else None,
            span=tuple(s["span"]) if s.get("span") else None,
        )
        for s in record["stages"]
    ]
    return VerificationTrace(
        question_id=record["question_id"],
        strategy=record["strategy"],
        stages=stages,
        consistency=ConsistencyVerdict(record["consistency"]),
        kept=record["kept"],
        final_mode=FinalMode(record["final_mode"]),
        generation_metadata=record.get("metadata", {}),
    )
