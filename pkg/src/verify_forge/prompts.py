"""Verification strategies, prompt templates, strategy selection policy, and
parsers for model/judge outputs.

Template bodies live as versioned text assets under ``templates/`` with a
checksum manifest; slot markers use the ``{{name}}`` form so that literal JSON
braces inside judge prompts survive rendering untouched.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Mapping, Optional

from .core import ConsistencyVerdict, CorrectnessLabel
from .errors import (
    MalformedTeacherOutput,
    UnboundSlot,
    UnknownTemplate,
    UnparsableJudgeOutput,
)


class VerificationStrategy(str, Enum):
    REPHRASE = "rephrase"
    IMPLICATION = "implication"
    INVERSE = "inverse"
    JUSTIFICATION = "justification"
    TEMPORAL = "temporal"
    ABSTRACTION = "abstraction"
    DISJUNCTION = "disjunction"
    COMPARATIVE = "comparative"
    AUTHORITY = "authority"


ALL_STRATEGIES = tuple(VerificationStrategy)

# Default training policy: the four strategies with the best standalone F1,
# identical across model scales up to rank order.
TOP4_STRATEGIES = (
    VerificationStrategy.REPHRASE,
    VerificationStrategy.COMPARATIVE,
    VerificationStrategy.TEMPORAL,
    VerificationStrategy.DISJUNCTION,
)

TEMPLATE_IDS = (
    "self_answer",
    "revised_answer",
    "consistency_judge",
    "ground_truth_judge",
    "no_gold_judge",
    "sc_consistency_judge",
    "perturb_only",
    "draft_plus_perturb",
    "kp_refusal",
) + tuple(f"teacher_verify:{s.value}" for s in ALL_STRATEGIES)


def teacher_template_id(strategy: VerificationStrategy | str) -> str:
    value = strategy.value if isinstance(strategy, VerificationStrategy) else strategy
    return f"teacher_verify:{value}"


@lru_cache(maxsize=1)
def template_manifest() -> dict:
    with resources.files("verify_forge.templates").joinpath("manifest.json").open(
        "r", encoding="utf-8"
    ) as fh:
        return json.load(fh)


@lru_cache(maxsize=None)
def template_body(template_id: str) -> str:
    entry = template_manifest()["templates"].get(template_id)
    if entry is None:
        raise UnknownTemplate(template_id)
    with resources.files("verify_forge.templates").joinpath(entry["file"]).open(
        "r", encoding="utf-8"
    ) as fh:
        return fh.read()


_SLOT_RE = re.compile(r"\{\{(\w+)\}\}")


def render_prompt(template_id: str, bindings: Mapping[str, str]) -> str:
    """Fill every ``{{slot}}`` in the template body; raise on leftovers."""
    body = template_body(template_id)

    def sub(match: re.Match) -> str:
        name = match.group(1)
        if name not in bindings:
            raise UnboundSlot(name)
        return str(bindings[name])

    return _SLOT_RE.sub(sub, body)


# --- strategy selection policy ----------------------------------------------


@dataclass(frozen=True)
class StrategyPolicy:
    """How a verification strategy is drawn for each question.

    mode is one of "fixed", "uniform", "weighted". Draws are a pure function
    of (policy, rng_seed, question_index), so corpus builds are reproducible
    across process restarts.
    """

    mode: str = "uniform"
    strategies: tuple[VerificationStrategy, ...] = TOP4_STRATEGIES
    weights: tuple[float, ...] = ()
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("fixed", "uniform", "weighted"):
            raise ValueError(f"unknown strategy policy mode: {self.mode}")
        if not self.strategies:
            raise ValueError("strategy policy needs a non-empty strategy set")
        if self.mode == "fixed" and len(self.strategies) != 1:
            raise ValueError("fixed policy takes exactly one strategy")
        if self.mode == "weighted":
            if len(self.weights) != len(self.strategies):
                raise ValueError("weighted policy needs one weight per strategy")
            if any(w <= 0 for w in self.weights):
                raise ValueError("weights must be positive")


def default_policy(rng_seed: int = 0) -> StrategyPolicy:
    return StrategyPolicy(mode="uniform", strategies=TOP4_STRATEGIES, rng_seed=rng_seed)


def pick_strategy(policy: StrategyPolicy, question_index: int) -> VerificationStrategy:
    if policy.mode == "fixed":
        return policy.strategies[0]
    rng = random.Random(f"strategy:{policy.rng_seed}:{question_index}")
    if policy.mode == "uniform":
        return rng.choice(list(policy.strategies))
    return rng.choices(list(policy.strategies), weights=list(policy.weights), k=1)[0]


# --- output parsers -----------------------------------------------------------

_TEACHER_BLOCKS = {
    "reasoning": re.compile(r"\*\*Reasoning:?\*\*:?\s*", re.IGNORECASE),
    "verification_question": re.compile(r"\*\*Verification Question:?\*\*:?\s*", re.IGNORECASE),
    "verification_gold": re.compile(r"\*\*Answer:?\*\*:?\s*", re.IGNORECASE),
}


def parse_teacher_output(text: str) -> dict[str, str]:
    """Extract the reasoning / verification question / answer blocks.

    Blocks may appear in any order; each block runs until the next block
    marker or end of text. Backtick fencing around the verification question
    is stripped.
    """
    starts: list[tuple[int, int, str]] = []  # (content_start, marker_start, name)
    missing = []
    for name, pattern in _TEACHER_BLOCKS.items():
        match = pattern.search(text)
        if match is None:
            missing.append(name)
        else:
            starts.append((match.end(), match.start(), name))
    if missing:
        raise MalformedTeacherOutput(sorted(missing))

    starts.sort(key=lambda t: t[1])
    result: dict[str, str] = {}
    for i, (content_start, _, name) in enumerate(starts):
        content_end = starts[i + 1][1] if i + 1 < len(starts) else len(text)
        result[name] = text[content_start:content_end].strip()

    qv = result["verification_question"].strip()
    qv = qv.strip("`").strip()
    result["verification_question"] = qv
    return result


_LABEL_MARKER_RE = re.compile(r"##\s*Label\s*:?\s*", re.IGNORECASE)
_REASON_MARKER_RE = re.compile(r"##\s*Reason\s*:?\s*", re.IGNORECASE)


def _after_label_marker(text: str) -> str:
    match = _LABEL_MARKER_RE.search(text)
    if match is None:
        raise UnparsableJudgeOutput(f"no '## Label:' marker in judge output: {text[:120]!r}")
    return text[match.end():]


def parse_judge_label(text: str) -> dict:
    """Parse a correctness judge's '## Reason: ...; ## Label: ...' output."""
    tail = _after_label_marker(text)
    word_match = re.search(r"[A-Za-z_]+", tail)
    word = word_match.group(0).lower() if word_match else ""
    labels = {
        "correct": CorrectnessLabel.CORRECT,
        "incorrect": CorrectnessLabel.INCORRECT,
        "refusal": CorrectnessLabel.REFUSAL,
    }
    if word not in labels:
        raise UnparsableJudgeOutput(f"unknown judge label: {tail[:60]!r}")

    reason = ""
    reason_match = _REASON_MARKER_RE.search(text)
    if reason_match is not None:
        label_match = _LABEL_MARKER_RE.search(text)
        end = label_match.start() if label_match else len(text)
        reason = text[reason_match.end():end].strip().rstrip(";").strip()
    return {"reason": reason, "label": labels[word]}


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def parse_consistency_json(text: str) -> dict:
    """Parse the consistency judge's fenced-or-bare JSON verdict pair."""
    fenced = _FENCE_RE.search(text)
    payload = fenced.group(1) if fenced else text
    start = payload.find("{")
    end = payload.rfind("}")
    if start < 0 or end <= start:
        raise UnparsableJudgeOutput(f"no JSON object in consistency output: {text[:120]!r}")
    try:
        data = json.loads(payload[start : end + 1])
    except json.JSONDecodeError as exc:
        raise UnparsableJudgeOutput(f"bad JSON in consistency output: {exc}") from exc

    try:
        correctness = data["correctness"]
        consistency = data["consistency"]
        correctness_verdict = str(correctness["verdict"]).strip().capitalize()
        consistency_verdict = str(consistency["verdict"]).strip().capitalize()
    except (KeyError, TypeError) as exc:
        raise UnparsableJudgeOutput(f"missing verdict fields: {exc}") from exc

    if correctness_verdict not in ("Correct", "Incorrect"):
        raise UnparsableJudgeOutput(f"bad correctness verdict: {correctness_verdict!r}")
    if consistency_verdict not in ("Consistent", "Inconsistent"):
        raise UnparsableJudgeOutput(f"bad consistency verdict: {consistency_verdict!r}")

    return {
        "correctness": (
            CorrectnessLabel(correctness_verdict),
            str(correctness.get("justification", "")).strip(),
        ),
        "consistency": (
            ConsistencyVerdict(consistency_verdict),
            str(consistency.get("justification", "")).strip(),
        ),
    }


SC_LABELS = ("CONSISTENT", "INCONSISTENT", "NOT_ATTEMPTED")


def parse_sc_label(text: str) -> str:
    tail = _after_label_marker(text)
    word_match = re.search(r"[A-Z_]+", tail)
    word = word_match.group(0) if word_match else ""
    # INCONSISTENT contains CONSISTENT as a suffix; exact-match the token.
    if word not in SC_LABELS:
        raise UnparsableJudgeOutput(f"unknown self-consistency label: {tail[:60]!r}")
    return word
