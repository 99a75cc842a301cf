"""Comparison pipelines: knowledge probing, self-consistency voting, and
in-context perturbation.

* Knowledge probing rewrites a question set into answers-or-refusals based on
  what the target model already knows.
* Self-consistency samples k extra answers and abstains when fewer than half
  agree with the greedy answer.
* Perturbation forces the model to continue a planted distractor Q/A pair
  before answering, via an open-ended assistant turn.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

from .core import CorrectnessLabel, QuestionRecord
from .errors import ContinuationUnsupported, UnparsableJudgeOutput
from .gateway import Backend, ChatMessage, GenerationRequest, ResponseCache, complete
from .mockllm import GOLD_ALIAS_SEPARATOR
from .prompts import parse_judge_label, parse_sc_label, render_prompt

KP_REFUSAL_TEXT = render_prompt("kp_refusal", {}).strip()


def _derive_seed(run_seed: int, question_id: str, tag: str) -> int:
    blob = f"{run_seed}:{question_id}:{tag}".encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:4], "big")


def _ask(
    backend: Backend,
    model_id: str,
    prompt: str,
    *,
    temperature: float = 0.0,
    seed: Optional[int] = None,
    role_tag: Optional[str] = None,
    item_id: Optional[str] = None,
    cache: Optional[ResponseCache] = None,
    max_tokens: int = 512,
) -> str:
    request = GenerationRequest(
        model_id=model_id,
        messages=(ChatMessage("user", prompt),),
        temperature=temperature,
        max_tokens=max_tokens,
        seed=seed,
        role_tag=role_tag,
        item_id=item_id,
    )
    return complete(request, backend, cache).text


def _parse_with_retry(ask, parse, seed: int):
    last: Optional[Exception] = None
    for attempt in range(2):
        try:
            return parse(ask(seed + attempt))
        except UnparsableJudgeOutput as exc:
            last = exc
    raise last  # type: ignore[misc]


# --- knowledge probing ----------------------------------------------------------


@dataclass
class KPRecord:
    question_id: str
    question: str
    response: str
    probed_label: CorrectnessLabel

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "question_id": self.question_id,
            "question": self.question,
            "response": self.response,
            "probed_label": self.probed_label.value,
        }


def build_kp_dataset(
    questions: Sequence[QuestionRecord],
    model_backend: Backend,
    model_id: str,
    judge_backend: Backend,
    judge_model_id: str,
    seed: int = 0,
    cache: Optional[ResponseCache] = None,
    refusal_text: str = KP_REFUSAL_TEXT,
) -> list[KPRecord]:
    """Probe the model once per question and rewrite unknown facts to refusals.

    A correct greedy answer is kept verbatim; an incorrect one is replaced by
    the refusal string; a spontaneous refusal is kept as-is.
    """
    records = []
    for question in questions:
        answer = _ask(
            model_backend,
            model_id,
            render_prompt("self_answer", {"q": question.question}),
            seed=seed,
            role_tag="kp_answer",
            item_id=question.id,
            cache=cache,
        )
        judge_prompt = render_prompt(
            "ground_truth_judge",
            {
                "q": question.question,
                "gold": GOLD_ALIAS_SEPARATOR.join(question.gold_answers),
                "a": answer,
            },
        )
        judged = _parse_with_retry(
            lambda s: _ask(
                judge_backend,
                judge_model_id,
                judge_prompt,
                seed=s,
                role_tag="kp_judge",
                item_id=question.id,
                cache=cache,
            ),
            lambda text: parse_judge_label(text)["label"],
            seed,
        )
        response = refusal_text if judged is CorrectnessLabel.INCORRECT else answer
        records.append(KPRecord(question.id, question.question, response, judged))
    return records


def write_kp_dataset(records: Sequence[KPRecord], path: Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")


# --- self-consistency voting ------------------------------------------------------


class SCDecision(str, Enum):
    ANSWER = "answer"
    ABSTAIN = "abstain"


@dataclass
class SCResult:
    question_id: str
    greedy_answer: str
    sample_labels: list[str]
    decision: SCDecision


def decide_from_labels(labels: Sequence[str], k: int) -> SCDecision:
    """Majority rule: answer iff at least half of the k samples agree with the
    greedy answer (NOT_ATTEMPTED and INCONSISTENT both count against)."""
    if len(labels) != k:
        raise ValueError(f"expected {k} labels, got {len(labels)}")
    consistent = sum(1 for label in labels if label == "CONSISTENT")
    return SCDecision.ANSWER if 2 * consistent >= k else SCDecision.ABSTAIN


def sc_decide(
    question: QuestionRecord,
    model_backend: Backend,
    model_id: str,
    judge_backend: Backend,
    judge_model_id: str,
    k: int = 4,
    seed: int = 0,
    cache: Optional[ResponseCache] = None,
) -> SCResult:
    if k < 1:
        raise ValueError("k must be >= 1")
    prompt = render_prompt("self_answer", {"q": question.question})
    greedy = _ask(
        model_backend,
        model_id,
        prompt,
        seed=seed,
        role_tag="sc_greedy",
        item_id=question.id,
        cache=cache,
    )

    labels = []
    for i in range(k):
        # Distinct derived seeds keep the k samples independent yet reproducible.
        sample = _ask(
            model_backend,
            model_id,
            prompt,
            temperature=1.0,
            seed=_derive_seed(seed, question.id, f"sc_sample:{i}"),
            role_tag=f"sc_sample_{i + 1}",
            item_id=question.id,
            cache=cache,
        )
        judge_prompt = render_prompt(
            "sc_consistency_judge",
            {"q": question.question, "reference": greedy, "candidate": sample},
        )
        label = _parse_with_retry(
            lambda s, i=i: _ask(
                judge_backend,
                judge_model_id,
                judge_prompt,
                seed=s,
                role_tag=f"sc_judge_{i + 1}",
                item_id=question.id,
                cache=cache,
            ),
            parse_sc_label,
            seed,
        )
        labels.append(label)

    return SCResult(question.id, greedy, labels, decide_from_labels(labels, k))


# --- in-context perturbation -------------------------------------------------------


def pick_aux_pair(
    question: QuestionRecord, pool: Sequence[QuestionRecord], seed: int
) -> QuestionRecord:
    """Draw the distractor Q/A pair from the same dataset, never the question
    itself."""
    candidates = [q for q in pool if q.id != question.id]
    if not candidates:
        raise ValueError("no other question available for the distractor pair")
    rng = random.Random(f"perturb:{seed}:{question.id}")
    return rng.choice(candidates)


def perturbed_answer(
    question: QuestionRecord,
    aux: QuestionRecord,
    model_backend: Backend,
    model_id: str,
    mode: str = "perturb_only",
    draft: Optional[str] = None,
    seed: int = 0,
    cache: Optional[ResponseCache] = None,
) -> str:
    """Answer under a planted distractor: the assistant turn is pre-filled with
    the distractor Q/A and left open, and only the continuation is returned."""
    if mode not in ("perturb_only", "draft_plus_perturb"):
        raise ValueError(f"unknown perturbation mode: {mode}")
    if not model_backend.supports_continuation():
        raise ContinuationUnsupported(model_backend.name)

    bindings = {"aux_q": aux.question, "aux_a": aux.gold_answers[0]}
    if mode == "draft_plus_perturb":
        if draft is None:
            raise ValueError("draft_plus_perturb requires the draft answer")
        bindings["a0"] = draft
    prefix = render_prompt(mode, bindings)

    request = GenerationRequest(
        model_id=model_id,
        messages=(
            ChatMessage("user", render_prompt("self_answer", {"q": question.question})),
            ChatMessage("assistant", prefix),
        ),
        temperature=0.0,
        max_tokens=512,
        seed=seed,
        continuation=True,
        role_tag=f"perturb_{mode}",
        item_id=question.id,
    )
    return complete(request, model_backend, cache).text
