"""Selective-prediction evaluation: paired outcomes and the P/R/F1/coverage
metric family.

Evaluation is paired: every question is answered once by a base configuration
and once by the treated configuration, and recall is anchored on the pairs the
base got right but the treated configuration refused.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Optional, Sequence

from .core import (
    ABSTENTION_SENTENCE,
    CorrectnessLabel,
    QuestionRecord,
    VERIFY_CLOSE,
    VERIFY_OPEN,
)
from .errors import (
    QuestionSetMismatch,
    UndefinedMetric,
    UnparsableJudgeOutput,
    UnterminatedVerifyBlock,
)
from .gateway import Backend, ChatMessage, GenerationRequest, ResponseCache, complete
from .mockllm import GOLD_ALIAS_SEPARATOR, is_refusal_text
from .prompts import parse_judge_label, render_prompt


class OutcomeLabel(str, Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    REFUSED = "refused"


@dataclass(frozen=True)
class EvalCounts:
    """Outcome tallies for one treated run against its paired base run.

    base_correct_refused counts the questions the base configuration answered
    correctly but the treated configuration refused.
    """

    correct: int
    incorrect: int
    refused: int
    base_correct_refused: int

    def __post_init__(self) -> None:
        for name in ("correct", "incorrect", "refused", "base_correct_refused"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.base_correct_refused > self.refused:
            raise ValueError("base_correct_refused cannot exceed refused")

    @property
    def total(self) -> int:
        return self.correct + self.incorrect + self.refused


def precision(counts: EvalCounts) -> float:
    attempted = counts.correct + counts.incorrect
    if attempted == 0:
        raise UndefinedMetric("precision")
    return counts.correct / attempted


def recall(counts: EvalCounts) -> float:
    denom = counts.correct + counts.base_correct_refused
    if denom == 0:
        raise UndefinedMetric("recall")
    return counts.correct / denom


def f1(counts: EvalCounts) -> float:
    p = precision(counts)
    r = recall(counts)
    if p + r == 0:
        raise UndefinedMetric("f1")
    return 2 * p * r / (p + r)


def coverage(counts: EvalCounts) -> float:
    if counts.total == 0:
        raise UndefinedMetric("coverage")
    return (counts.correct + counts.incorrect) / counts.total


def pair_outcomes(
    base: Mapping[str, OutcomeLabel], treated: Mapping[str, OutcomeLabel]
) -> EvalCounts:
    """Tally treated outcomes against the paired base run.

    Both runs must cover exactly the same question ids.
    """
    base_ids, treated_ids = set(base), set(treated)
    if base_ids != treated_ids:
        raise QuestionSetMismatch(base_ids - treated_ids, treated_ids - base_ids)

    correct = incorrect = refused = r_minus = 0
    for qid, outcome in treated.items():
        if outcome is OutcomeLabel.CORRECT:
            correct += 1
        elif outcome is OutcomeLabel.INCORRECT:
            incorrect += 1
        else:
            refused += 1
            if base[qid] is OutcomeLabel.CORRECT:
                r_minus += 1
    return EvalCounts(correct, incorrect, refused, r_minus)


def strip_verify_block(text: str) -> str:
    """Drop a leading reasoning block, keeping only the surfaced response."""
    if VERIFY_OPEN not in text:
        return text.strip()
    idx = text.find(VERIFY_CLOSE)
    if idx < 0:
        raise UnterminatedVerifyBlock()
    return text[idx + len(VERIFY_CLOSE):].strip()


def classify_response(
    question: QuestionRecord,
    response: str,
    judge_backend: Backend,
    judge_model_id: str,
    cache: Optional[ResponseCache] = None,
    seed: int = 0,
) -> OutcomeLabel:
    """Judge a raw model response against the question's gold answers.

    Reasoning blocks are stripped before judging; a bare abstention is scored
    as refused without a judge call. A judge output that fails to parse is
    retried once before the error propagates.
    """
    surfaced = strip_verify_block(response)
    if surfaced == ABSTENTION_SENTENCE or is_refusal_text(surfaced):
        return OutcomeLabel.REFUSED

    prompt = render_prompt(
        "ground_truth_judge",
        {
            "q": question.question,
            "gold": GOLD_ALIAS_SEPARATOR.join(question.gold_answers),
            "a": surfaced,
        },
    )
    last: Optional[Exception] = None
    for attempt in range(2):
        request = GenerationRequest(
            model_id=judge_model_id,
            messages=(ChatMessage("user", prompt),),
            temperature=0.0,
            max_tokens=256,
            seed=seed + attempt,
            role_tag="eval_judge",
            item_id=question.id,
        )
        text = complete(request, judge_backend, cache).text
        try:
            label = parse_judge_label(text)["label"]
        except UnparsableJudgeOutput as exc:
            last = exc
            continue
        if label is CorrectnessLabel.CORRECT:
            return OutcomeLabel.CORRECT
        if label is CorrectnessLabel.INCORRECT:
            return OutcomeLabel.INCORRECT
        return OutcomeLabel.REFUSED
    raise last  # type: ignore[misc]


def eval_report(
    base: Mapping[str, OutcomeLabel],
    treated: Mapping[str, OutcomeLabel],
    name: str = "treated",
) -> dict:
    """Full metric report for one treated run, all values in percent."""
    counts = pair_outcomes(base, treated)
    return {
        "name": name,
        "total": counts.total,
        "counts": {
            "correct": counts.correct,
            "incorrect": counts.incorrect,
            "refused": counts.refused,
            "base_correct_refused": counts.base_correct_refused,
        },
        "precision": 100.0 * precision(counts),
        "recall": 100.0 * recall(counts),
        "f1": 100.0 * f1(counts),
        "coverage": 100.0 * coverage(counts),
    }


def pareto_points(reports: Sequence[dict]) -> list[dict]:
    """Coverage/precision points for the risk-coverage view, sorted by
    ascending coverage with non-dominated points flagged."""
    points = sorted(reports, key=lambda r: (r["coverage"], r["precision"]))
    best_precision = -1.0
    out = []
    for point in sorted(points, key=lambda r: -r["coverage"]):
        dominated = point["precision"] <= best_precision
        best_precision = max(best_precision, point["precision"])
        out.append(
            {
                "name": point["name"],
                "coverage": point["coverage"],
                "precision": point["precision"],
                "f1": point["f1"],
                "on_frontier": not dominated,
            }
        )
    out.reverse()
    return out
