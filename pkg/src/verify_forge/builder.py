"""Five-stage trace construction: answer, verify, re-answer, judge, filter.

Each question costs seven sequential model calls (self answer, ground-truth
judge, teacher verification question, self verification answer, two
verification judges, revised answer + consistency judge). Questions are
independent and run concurrently; an outcome journal makes corpus builds
resumable.
"""

from __future__ import annotations

import hashlib
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

from .core import (
    ABSTENTION_SENTENCE,
    ConsistencyVerdict,
    CorrectnessLabel,
    FinalMode,
    QuestionRecord,
    Stage,
    StageKind,
    VerificationTrace,
    render_trace,
    trace_to_record,
)
from .errors import (
    GatewayError,
    MalformedTeacherOutput,
    MissingLabel,
    RefusalNotFilterable,
    UnparsableJudgeOutput,
    VerifyForgeError,
)
from .gateway import Backend, ChatMessage, GenerationRequest, ResponseCache, complete
from .prompts import (
    StrategyPolicy,
    default_policy,
    parse_consistency_json,
    parse_judge_label,
    parse_teacher_output,
    pick_strategy,
    render_prompt,
    teacher_template_id,
)
from .mockllm import GOLD_ALIAS_SEPARATOR


class FilterDecision(Enum):
    KEEP_ANSWER = "keep_answer"
    KEEP_ABSTAIN = "keep_abstain"
    DISCARD = "discard"


class BuildStatus(str, Enum):
    KEPT = "kept"
    DISCARDED_MISALIGNED = "discarded_misaligned"
    DISCARDED_REFUSAL = "discarded_refusal"
    FAILED = "failed"


@dataclass
class ModelRole:
    backend: Backend
    model_id: str


@dataclass
class BuilderConfig:
    self_role: ModelRole
    teacher_role: ModelRole
    judge_roles: tuple[ModelRole, ModelRole]
    strategy_policy: StrategyPolicy = field(default_factory=default_policy)
    parallelism: int = 4
    run_seed: int = 0
    max_parse_retries: int = 1
    max_tokens: int = 512
    cache: Optional[ResponseCache] = None
    allow_self_teacher: bool = False
    record_timestamps: bool = False

    def __post_init__(self) -> None:
        if len(self.judge_roles) != 2:
            raise ValueError("exactly two judge models are required for consensus")
        if (
            not self.allow_self_teacher
            and self.self_role.model_id == self.teacher_role.model_id
            and self.self_role.backend is self.teacher_role.backend
        ):
            raise ValueError(
                "self and teacher resolve to the same model; set allow_self_teacher to permit"
            )


@dataclass
class BuildOutcome:
    question_id: str
    status: BuildStatus
    trace: Optional[VerificationTrace] = None
    reason: str = ""


def filter_trace(
    label_a0: CorrectnessLabel, consistency: ConsistencyVerdict
) -> FilterDecision:
    """The aligned-outcome filter: keep only mutually confirming traces."""
    if label_a0 is CorrectnessLabel.REFUSAL:
        raise RefusalNotFilterable()
    if label_a0 is CorrectnessLabel.CORRECT and consistency is ConsistencyVerdict.CONSISTENT:
        return FilterDecision.KEEP_ANSWER
    if label_a0 is CorrectnessLabel.INCORRECT and consistency is ConsistencyVerdict.INCONSISTENT:
        return FilterDecision.KEEP_ABSTAIN
    return FilterDecision.DISCARD


def consensus_label(first: CorrectnessLabel, second: CorrectnessLabel) -> CorrectnessLabel:
    """Conjunctive judge consensus: correct only when both judges agree."""
    if first is CorrectnessLabel.CORRECT and second is CorrectnessLabel.CORRECT:
        return CorrectnessLabel.CORRECT
    return CorrectnessLabel.INCORRECT


def assign_hallucination_flags(trace: VerificationTrace) -> VerificationTrace:
    """Set the hallucination indicator on every stage from the stage labels."""
    for kind in (StageKind.INITIAL_ANSWER, StageKind.VERIFICATION_ANSWER, StageKind.REVISED_ANSWER):
        stage = trace.stage(kind)
        if stage.label is None:
            raise MissingLabel(kind)
        stage.hallucinated = stage.label is not CorrectnessLabel.CORRECT
    for kind in (
        StageKind.VERIFICATION_QUESTION,
        StageKind.CONSISTENCY_JUDGMENT,
        StageKind.FINAL_RESPONSE,
    ):
        if trace.has_stage(kind):
            trace.stage(kind).hallucinated = False
    return trace


# --- narrative ----------------------------------------------------------------

_NARRATIVE_HEAD = (
    "Now let me check if my initial answer is consistent with my verification based answer."
)
_NARRATIVE_CONSISTENT_TAIL = (
    "Since my responses are consistent, I am able to answer this question, "
    "so I will now provide my answer."
)
_NARRATIVE_INCONSISTENT_TAIL = (
    "Since my responses are inconsistent, it appears I do not have sufficient "
    "knowledge to answer this question, so I am unable to provide an answer."
)

_THIRD_PERSON_SUBS = (
    (re.compile(r"\bThe (?:AI )?(?:assistant|model)'s\b"), "My"),
    (re.compile(r"\bthe (?:AI )?(?:assistant|model)'s\b"), "my"),
    (re.compile(r"\bThe (?:AI )?(?:assistant|model)\b"), "I"),
    (re.compile(r"\bthe (?:AI )?(?:assistant|model)\b"), "I"),
)


def transpose_first_person(justification: str) -> str:
    for pattern, repl in _THIRD_PERSON_SUBS:
        justification = pattern.sub(repl, justification)
    return justification


def consistency_narrative(verdict: ConsistencyVerdict, justification: str) -> str:
    just = transpose_first_person(justification.strip())
    if just and just[-1] not in ".!?":
        just += "."
    tail = (
        _NARRATIVE_CONSISTENT_TAIL
        if verdict is ConsistencyVerdict.CONSISTENT
        else _NARRATIVE_INCONSISTENT_TAIL
    )
    parts = [_NARRATIVE_HEAD]
    if just:
        parts.append(just)
    parts.append(tail)
    return " ".join(parts)


# --- per-question build ---------------------------------------------------------


def _derive_seed(run_seed: int, question_id: str, role_tag: str, attempt: int = 0) -> int:
    blob = f"{run_seed}:{question_id}:{role_tag}:{attempt}".encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:4], "big")


def gold_slot(question: QuestionRecord) -> str:
    return GOLD_ALIAS_SEPARATOR.join(question.gold_answers)


class TraceBuilder:
    def __init__(self, cfg: BuilderConfig) -> None:
        self.cfg = cfg

    def _ask(
        self,
        role: ModelRole,
        role_tag: str,
        question_id: str,
        prompt: str,
        attempt: int = 0,
    ) -> str:
        request = GenerationRequest(
            model_id=role.model_id,
            messages=(ChatMessage("user", prompt),),
            temperature=0.0,
            max_tokens=self.cfg.max_tokens,
            seed=_derive_seed(self.cfg.run_seed, question_id, role_tag, attempt),
            role_tag=role_tag,
            item_id=question_id,
        )
        return complete(request, role.backend, self.cfg.cache).text

    def _ask_parsed(self, role, role_tag, question_id, prompt, parse: Callable):
        last: Optional[Exception] = None
        for attempt in range(self.cfg.max_parse_retries + 1):
            text = self._ask(role, role_tag, question_id, prompt, attempt)
            try:
                return parse(text)
            except (UnparsableJudgeOutput, MalformedTeacherOutput) as exc:
                last = exc
        raise last  # type: ignore[misc]

    def build_trace(self, question: QuestionRecord, question_index: int = 0) -> BuildOutcome:
        cfg = self.cfg
        qid = question.id
        strategy = pick_strategy(cfg.strategy_policy, question_index)
        gold = gold_slot(question)
        try:
            # (1) unconstrained initial answer
            a0 = self._ask(
                cfg.self_role,
                "self_initial",
                qid,
                render_prompt("self_answer", {"q": question.question}),
            )

            # (2) ground-truth label for the initial answer
            judged_a0 = self._ask_parsed(
                cfg.judge_roles[0],
                "judge_initial",
                qid,
                render_prompt("ground_truth_judge", {"q": question.question, "gold": gold, "a": a0}),
                parse_judge_label,
            )
            label_a0: CorrectnessLabel = judged_a0["label"]
            if label_a0 is CorrectnessLabel.REFUSAL:
                return BuildOutcome(qid, BuildStatus.DISCARDED_REFUSAL)

            # (3) teacher-generated verification question
            teacher = self._ask_parsed(
                cfg.teacher_role,
                "teacher_verify",
                qid,
                render_prompt(
                    teacher_template_id(strategy),
                    {"q": question.question, "gold": gold, "a0": a0},
                ),
                parse_teacher_output,
            )
            qv = teacher["verification_question"]

            # (4) independent verification answer: the request carries only the
            # verification question, never the original question or a0
            av = self._ask(
                cfg.self_role,
                "self_verification",
                qid,
                render_prompt("self_answer", {"q": qv}),
            )

            # (5) two-judge consensus on the verification answer
            judge_labels = []
            for judge_idx, judge_role in enumerate(cfg.judge_roles, start=1):
                judged = self._ask_parsed(
                    judge_role,
                    f"judge_verification_{judge_idx}",
                    qid,
                    render_prompt("no_gold_judge", {"q": qv, "a": av}),
                    parse_judge_label,
                )
                judge_labels.append(judged["label"])
            label_av = consensus_label(*judge_labels)

            # (6) revised answer conditioned on the verification pair
            a1 = self._ask(
                cfg.self_role,
                "self_revised",
                qid,
                render_prompt("revised_answer", {"q": question.question, "qv": qv, "av": av}),
            )

            # (7) correctness + consistency judgment over (a0, a1)
            verdicts = self._ask_parsed(
                cfg.judge_roles[0],
                "consistency_judge",
                qid,
                render_prompt(
                    "consistency_judge",
                    {"q": question.question, "gold": gold, "a0": a0, "a1": a1},
                ),
                parse_consistency_json,
            )
            label_a1, _correct_just = verdicts["correctness"]
            consistency, consistency_just = verdicts["consistency"]
        except (UnparsableJudgeOutput, MalformedTeacherOutput) as exc:
            return BuildOutcome(qid, BuildStatus.FAILED, reason=type(exc).__name__)
        except GatewayError as exc:
            return BuildOutcome(qid, BuildStatus.FAILED, reason=f"GatewayError: {exc}")

        # (8) aligned-outcome filter
        decision = filter_trace(label_a0, consistency)
        if decision is FilterDecision.DISCARD:
            return BuildOutcome(qid, BuildStatus.DISCARDED_MISALIGNED)

        final_mode = (
            FinalMode.ANSWER if decision is FilterDecision.KEEP_ANSWER else FinalMode.ABSTAIN
        )
        final_text = a0 if final_mode is FinalMode.ANSWER else ABSTENTION_SENTENCE
        narrative = consistency_narrative(consistency, consistency_just)

        metadata = {
            "self_model": cfg.self_role.model_id,
            "teacher_model": cfg.teacher_role.model_id,
            "judge_models": [r.model_id for r in cfg.judge_roles],
            "run_seed": cfg.run_seed,
            "question_index": question_index,
            "teacher_gold": teacher["verification_gold"],
            "judge_labels_av": [l.value for l in judge_labels],
        }
        if cfg.record_timestamps:
            import time

            metadata["timestamp"] = time.time()

        trace = VerificationTrace(
            question_id=qid,
            strategy=strategy.value,
            stages=[
                Stage(StageKind.INITIAL_ANSWER, a0, label=label_a0),
                Stage(StageKind.VERIFICATION_QUESTION, qv),
                Stage(StageKind.VERIFICATION_ANSWER, av, label=label_av),
                Stage(StageKind.REVISED_ANSWER, a1, label=label_a1),
                Stage(StageKind.CONSISTENCY_JUDGMENT, narrative),
                Stage(StageKind.FINAL_RESPONSE, final_text),
            ],
            consistency=consistency,
            kept=True,
            final_mode=final_mode,
            generation_metadata=metadata,
        )
        assign_hallucination_flags(trace)
        return BuildOutcome(qid, BuildStatus.KEPT, trace=trace)


def build_trace(question: QuestionRecord, cfg: BuilderConfig, question_index: int = 0) -> BuildOutcome:
    return TraceBuilder(cfg).build_trace(question, question_index)


# --- corpus assembly ------------------------------------------------------------


@dataclass
class CorpusStats:
    total: int = 0
    kept: int = 0
    discarded_misaligned: int = 0
    discarded_refusal: int = 0
    failed: int = 0
    per_strategy: dict = field(default_factory=dict)
    per_outcome: dict = field(default_factory=dict)

    def record(self, outcome: BuildOutcome) -> None:
        self.total += 1
        if outcome.status is BuildStatus.KEPT:
            self.kept += 1
            trace = outcome.trace
            assert trace is not None
            self.per_strategy[trace.strategy] = self.per_strategy.get(trace.strategy, 0) + 1
            mode = trace.final_mode.value
            self.per_outcome[mode] = self.per_outcome.get(mode, 0) + 1
        elif outcome.status is BuildStatus.DISCARDED_MISALIGNED:
            self.discarded_misaligned += 1
        elif outcome.status is BuildStatus.DISCARDED_REFUSAL:
            self.discarded_refusal += 1
        else:
            self.failed += 1

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "kept": self.kept,
            "discarded_misaligned": self.discarded_misaligned,
            "discarded_refusal": self.discarded_refusal,
            "failed": self.failed,
            "per_strategy": dict(sorted(self.per_strategy.items())),
            "per_outcome": dict(sorted(self.per_outcome.items())),
        }


def build_corpus(
    questions: list[QuestionRecord],
    cfg: BuilderConfig,
    out_dir: Path,
) -> CorpusStats:
    """Build traces for every question, appending kept traces to the corpus.

    The outcome journal makes reruns idempotent: questions already journaled
    are skipped entirely, so a completed run replays with zero model calls.
    """
    if not questions:
        raise VerifyForgeError("question list is empty")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    journal_path = out_dir / "journal.jsonl"
    corpus_path = out_dir / "traces.jsonl"
    failures_path = out_dir / "failures.jsonl"

    done: dict[str, dict] = {}
    if journal_path.exists():
        for line in journal_path.read_text(encoding="utf-8").splitlines():
            entry = json.loads(line)
            done[entry["question_id"]] = entry

    builder = TraceBuilder(cfg)
    stats = CorpusStats()
    pending = [(i, q) for i, q in enumerate(questions) if q.id not in done]

    outcomes: dict[str, BuildOutcome] = {}
    if pending:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = pool.map(lambda iq: builder.build_trace(iq[1], iq[0]), pending)
            for (_, question), outcome in zip(pending, results):
                outcomes[question.id] = outcome

    # Journal and corpus are written in input order so runs are byte-stable.
    with journal_path.open("a", encoding="utf-8") as journal, corpus_path.open(
        "a", encoding="utf-8"
    ) as corpus, failures_path.open("a", encoding="utf-8") as failures:
        for _, question in sorted([(i, q) for i, q in enumerate(questions)]):
            if question.id in done:
                entry = done[question.id]
                stats.total += 1
                status = entry["status"]
                if status == BuildStatus.KEPT.value:
                    stats.kept += 1
                    stats.per_strategy[entry.get("strategy", "?")] = (
                        stats.per_strategy.get(entry.get("strategy", "?"), 0) + 1
                    )
                    mode = entry.get("final_mode", "?")
                    stats.per_outcome[mode] = stats.per_outcome.get(mode, 0) + 1
                elif status == BuildStatus.DISCARDED_MISALIGNED.value:
                    stats.discarded_misaligned += 1
                elif status == BuildStatus.DISCARDED_REFUSAL.value:
                    stats.discarded_refusal += 1
                else:
                    stats.failed += 1
                continue

            outcome = outcomes[question.id]
            stats.record(outcome)
            entry = {"question_id": question.id, "status": outcome.status.value}
            if outcome.trace is not None:
                entry["strategy"] = outcome.trace.strategy
                entry["final_mode"] = outcome.trace.final_mode.value
                rendered, _ = render_trace(outcome.trace)
                corpus.write(
                    json.dumps(trace_to_record(outcome.trace, rendered), ensure_ascii=False)
                    + "\n"
                )
            if outcome.status is BuildStatus.FAILED:
                failures.write(
                    json.dumps({"question_id": question.id, "reason": outcome.reason}) + "\n"
                )
            journal.write(json.dumps(entry) + "\n")

    (out_dir / "stats.json").write_text(
        json.dumps(stats.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
    return stats
