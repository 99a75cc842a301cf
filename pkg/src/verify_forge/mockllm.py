"""Deterministic mock backend for offline pipeline tests.

Two layers of behavior:

* a persona table mapping (role-tag, item-id) to a canned response, used to
  force Correct / Incorrect / Refusal paths through the pipelines;
* role-aware fallbacks that recognize the judge and teacher prompt layouts
  and answer them with simple deterministic text matching, so that unscripted
  pipeline runs still produce parseable outputs.

Everything is a pure function of (backend seed, request fingerprint), so two
runs with the same inputs produce byte-identical transcripts.
"""

from __future__ import annotations

import hashlib
import re
import threading
from typing import Mapping, Optional

from .errors import UnknownPersona
from .gateway import GenerationRequest, GenerationResult, fingerprint

REFUSAL_PHRASES = (
    "i don't know",
    "i do not know",
    "i'm not sure",
    "i am not sure",
    "i cannot answer",
    "i can't answer",
    "insufficient information",
    "i do not have sufficient knowledge",
    "i don't have access",
)

GOLD_ALIAS_SEPARATOR = " OR "


def _normalize(text: str) -> str:
    text = text.lower()
    text = re.sub(r"[*`_]", "", text)
    text = re.sub(r"[^a-z0-9]+", " ", text)
    return text.strip()


def is_refusal_text(text: str) -> bool:
    lowered = text.lower()
    return any(phrase in lowered for phrase in REFUSAL_PHRASES)


def _matches_gold(response: str, gold: str) -> bool:
    resp = _normalize(response)
    return any(
        _normalize(alias) and _normalize(alias) in resp
        for alias in gold.split(GOLD_ALIAS_SEPARATOR)
    )


def _entity_consistent(a: str, b: str) -> bool:
    na, nb = _normalize(a), _normalize(b)
    return bool(na and nb) and (na in nb or nb in na)


def _section(text: str, marker: str, *, stop_markers: tuple[str, ...] = ()) -> str:
    idx = text.find(marker)
    if idx < 0:
        return ""
    start = idx + len(marker)
    end = len(text)
    for stop in stop_markers or ("\n## ",):
        nxt = text.find(stop, start)
        if 0 <= nxt < end:
            end = nxt
    return text[start:end].strip()


def mock_complete(seed: int, request: GenerationRequest) -> str:
    """Deterministic pseudo-text for unscripted, non-judge requests."""
    digest = hashlib.sha256(f"{seed}:{fingerprint(request)}".encode()).hexdigest()[:12]
    if request.continuation:
        return f"The final answer is mock-{digest}."
    return f"Mock answer {digest}."


class MockBackend:
    """Offline stand-in for a chat-completion endpoint.

    personas: {role_tag: {item_id: canned text}}. A request whose role_tag is
    present in the table must have its item_id mapped; otherwise the request
    falls through to the heuristic layer.
    """

    name = "mock"

    def __init__(
        self,
        seed: int = 0,
        personas: Optional[Mapping[str, Mapping[str, str]]] = None,
        latency: float = 0.0,
    ) -> None:
        self.seed = seed
        self.personas = {k: dict(v) for k, v in (personas or {}).items()}
        self.latency = latency
        self.call_count = 0
        self.max_in_flight = 0
        self.request_log: list[GenerationRequest] = []
        self._lock = threading.Lock()
        self._in_flight = 0

    def supports_continuation(self) -> bool:
        return True

    def generate(self, request: GenerationRequest) -> GenerationResult:
        with self._lock:
            self.call_count += 1
            self._in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self._in_flight)
            self.request_log.append(request)
        try:
            if self.latency:
                import time

                time.sleep(self.latency)
            return GenerationResult(text=self._respond(request))
        finally:
            with self._lock:
                self._in_flight -= 1

    # --- response synthesis ---

    def _respond(self, request: GenerationRequest) -> str:
        if request.role_tag is not None and request.role_tag in self.personas:
            table = self.personas[request.role_tag]
            if request.item_id not in table:
                raise UnknownPersona(request.role_tag, request.item_id or "<none>")
            return table[request.item_id]

        prompt = "\n".join(m.content for m in request.messages)
        if "[GROUND-TRUTH ANSWER]" in prompt:
            return self._ground_truth_judge(prompt)
        if "[REFERENCE RESPONSE]" in prompt:
            return self._sc_judge(prompt)
        if "Response B" in prompt and "Model's Updated Response" in prompt:
            return self._consistency_judge(prompt)
        if "impartial judge" in prompt and "[QUESTION]" in prompt:
            return self._no_gold_judge(prompt)
        if "*verification questions*" in prompt:
            return self._teacher(prompt)
        return mock_complete(self.seed, request)

    def _ground_truth_judge(self, prompt: str) -> str:
        gold = _section(prompt, "## [GROUND-TRUTH ANSWER]\n")
        response = _section(prompt, "## [AI ASSISTANT'S RESPONSE]\n")
        if is_refusal_text(response):
            return "## Reason: the response declines to answer; ## Label: Refusal"
        if _matches_gold(response, gold):
            return "## Reason: the response matches the ground truth; ## Label: Correct"
        return "## Reason: the response does not match the ground truth; ## Label: Incorrect"

    def _no_gold_judge(self, prompt: str) -> str:
        response = _section(prompt, "## [AI ASSISTANT'S RESPONSE]\n")
        if is_refusal_text(response):
            return "## Reason: the response declines to answer; ## Label: Refusal"
        return "## Reason: the response attempts a direct answer; ## Label: Correct"

    def _sc_judge(self, prompt: str) -> str:
        reference = _section(prompt, "## [REFERENCE RESPONSE]\n")
        candidate = _section(prompt, "## [CANDIDATE RESPONSE]\n")
        if not candidate or is_refusal_text(candidate):
            return "## Reason: the candidate provides no answer entity; ## Label: NOT_ATTEMPTED"
        if _entity_consistent(reference, candidate):
            return "## Reason: both responses point to the same entity; ## Label: CONSISTENT"
        return "## Reason: the responses name different entities; ## Label: INCONSISTENT"

    def _consistency_judge(self, prompt: str) -> str:
        gold = _section(prompt, "## Correct Answer:")
        a0 = _section(
            prompt,
            "## Model's Initial Response to the Original Question:",
            stop_markers=("\n## [Response B]", "\n## "),
        )
        a1 = _section(
            prompt, "## Model's Updated Response (after verification) to the Original Question:"
        )
        correct = _matches_gold(a1, gold)
        consistent = _entity_consistent(a0, a1)
        if consistent:
            consistency_just = (
                f"My initial response was {a0.strip()} and my revised response was "
                f"{a1.strip()} These refer to the same answer, so the two responses "
                "are consistent with each other."
            )
        else:
            consistency_just = (
                f"My initial response was {a0.strip()} whereas my revised response was "
                f"{a1.strip()} These refer to different answers, so my two responses "
                "are inconsistent."
            )
        correctness_just = (
            "The updated response aligns with the correct answer."
            if correct
            else "The updated response does not match the correct answer."
        )
        return (
            '```json\n{\n  "correctness": {\n'
            f'    "justification": {_json_str(correctness_just)},\n'
            f'    "verdict": "{"Correct" if correct else "Incorrect"}"\n'
            '  },\n  "consistency": {\n'
            f'    "justification": {_json_str(consistency_just)},\n'
            f'    "verdict": "{"Consistent" if consistent else "Inconsistent"}"\n'
            "  }\n}\n```"
        )

    def _teacher(self, prompt: str) -> str:
        q = _section(prompt, "## Original Question:")
        gold = _section(prompt, "## Ground truth Answer:")
        # Strip the fixed closing reminder that follows the last input field.
        q = q.splitlines()[0].strip() if q else "the original question"
        gold = gold.splitlines()[0].strip() if gold else "unknown"
        qv = f"Approaching it from another angle, {q[0].lower() + q[1:] if q else q}"
        return (
            "**Reasoning:**\n"
            "Asking about the same fact from a different angle checks whether the "
            "model's knowledge is stable.\n\n"
            f"**Verification Question:** `{qv}`\n\n"
            f"**Answer:** {gold}"
        )


def _json_str(text: str) -> str:
    import json

    return json.dumps(text, ensure_ascii=False)
