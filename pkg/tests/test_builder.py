import itertools
import json

import pytest

from verify_forge.builder import (
    BuildStatus,
    BuilderConfig,
    FilterDecision,
    ModelRole,
    assign_hallucination_flags,
    build_corpus,
    build_trace,
    consensus_label,
    consistency_narrative,
    filter_trace,
    transpose_first_person,
)
from verify_forge.core import (
    ABSTENTION_SENTENCE,
    ConsistencyVerdict,
    CorrectnessLabel,
    FinalMode,
    QuestionRecord,
    StageKind,
    render_trace,
    validate_trace,
)
from verify_forge.dataset_io import load_questions
from verify_forge.errors import MissingLabel, RefusalNotFilterable
from verify_forge.mockllm import MockBackend
from verify_forge.prompts import StrategyPolicy, VerificationStrategy

from trace_helpers import FIXTURES, make_trace


class TestFilterTrace:
    def test_exhaustive_matrix(self):
        expected = {
            (CorrectnessLabel.CORRECT, ConsistencyVerdict.CONSISTENT): FilterDecision.KEEP_ANSWER,
            (CorrectnessLabel.CORRECT, ConsistencyVerdict.INCONSISTENT): FilterDecision.DISCARD,
            (CorrectnessLabel.INCORRECT, ConsistencyVerdict.CONSISTENT): FilterDecision.DISCARD,
            (CorrectnessLabel.INCORRECT, ConsistencyVerdict.INCONSISTENT): FilterDecision.KEEP_ABSTAIN,
        }
        for (label, verdict), decision in expected.items():
            assert filter_trace(label, verdict) is decision

    def test_refusal_rejected(self):
        for verdict in ConsistencyVerdict:
            with pytest.raises(RefusalNotFilterable):
                filter_trace(CorrectnessLabel.REFUSAL, verdict)


class TestConsensusLabel:
    def test_conjunctive(self):
        C, I, R = CorrectnessLabel.CORRECT, CorrectnessLabel.INCORRECT, CorrectnessLabel.REFUSAL
        for a, b in itertools.product([C, I, R], repeat=2):
            label = consensus_label(a, b)
            if a is C and b is C:
                assert label is C
            else:
                assert label is I


class TestHallucinationFlags:
    def test_flags_follow_labels(self):
        trace = make_trace(
            label_a0=CorrectnessLabel.INCORRECT,
            label_av=CorrectnessLabel.CORRECT,
            label_a1=CorrectnessLabel.INCORRECT,
            consistency=ConsistencyVerdict.INCONSISTENT,
            final=ABSTENTION_SENTENCE,
            final_mode=FinalMode.ABSTAIN,
        )
        for stage in trace.stages:
            stage.hallucinated = False
        assign_hallucination_flags(trace)
        assert trace.hallucination_vector() == [True, False, False, True, False, False]

    def test_missing_label_raises(self):
        trace = make_trace()
        trace.stage(StageKind.VERIFICATION_ANSWER).label = None
        with pytest.raises(MissingLabel):
            assign_hallucination_flags(trace)


class TestNarrative:
    def test_consistent_tail(self):
        text = consistency_narrative(ConsistencyVerdict.CONSISTENT, "Both say Paris.")
        assert text.startswith(
            "Now let me check if my initial answer is consistent with my verification based answer."
        )
        assert "Both say Paris." in text
        assert text.endswith("so I will now provide my answer.")

    def test_inconsistent_tail(self):
        text = consistency_narrative(ConsistencyVerdict.INCONSISTENT, "They differ")
        assert "They differ." in text
        assert text.endswith("so I am unable to provide an answer.")

    def test_third_person_transposed(self):
        text = transpose_first_person(
            "The assistant's initial response names Lyon, but the assistant later says Paris."
        )
        assert text == "My initial response names Lyon, but I later says Paris."


def _example_roles(personas, seed=11):
    backend = MockBackend(seed=seed, personas=personas)
    return backend, BuilderConfig(
        self_role=ModelRole(backend, "student"),
        teacher_role=ModelRole(backend, "teacher"),
        judge_roles=(ModelRole(backend, "judge-a"), ModelRole(backend, "judge-b")),
        strategy_policy=StrategyPolicy(
            mode="fixed", strategies=(VerificationStrategy.REPHRASE,)
        ),
        run_seed=seed,
        allow_self_teacher=True,
    )


def _teacher_script(qv, gold):
    return (
        "**Reasoning:** I will reword the question to ask about the same fact "
        "from a different angle.\n\n"
        f"**Verification Question:** {qv}\n\n"
        f"**Answer:** {gold}"
    )


def _consistency_script(correct, consistent, justification):
    return json.dumps(
        {
            "correctness": {
                "justification": "Checked against the reference.",
                "verdict": "Correct" if correct else "Incorrect",
            },
            "consistency": {
                "justification": justification,
                "verdict": "Consistent" if consistent else "Inconsistent",
            },
        }
    )


def _normalize(text: str) -> str:
    return " ".join(text.split())


class TestWorkedExamples:
    """End-to-end builds of the two canonical traces on scripted personas."""

    def test_consistent_example(self):
        question = QuestionRecord("ex1", "Who won Super Bowl XX?", ("Chicago Bears",))
        a0 = "The **Chicago Bears** won Super Bowl XX."
        personas = {
            "self_initial": {"ex1": a0},
            "teacher_verify": {
                "ex1": _teacher_script(
                    "Which team emerged victorious in Super Bowl XX?", "Chicago Bears"
                )
            },
            "self_verification": {"ex1": "The **Chicago Bears** won Super Bowl XX."},
            "self_revised": {"ex1": "The Chicago Bears."},
            "consistency_judge": {
                "ex1": _consistency_script(
                    True,
                    True,
                    "My initial response states the Chicago Bears won Super Bowl XX, "
                    "and my revised response also states the Chicago Bears won Super "
                    "Bowl XX. Therefore, the two responses are consistent with each other.",
                )
            },
        }
        _, cfg = _example_roles(personas)
        outcome = build_trace(question, cfg)
        assert outcome.status is BuildStatus.KEPT
        trace = outcome.trace
        assert trace.final_mode is FinalMode.ANSWER
        assert trace.hallucination_vector() == [False] * 6
        assert validate_trace(trace) == []
        rendered, _ = render_trace(trace)
        expected = (FIXTURES / "trace_example_consistent.txt").read_text()
        assert _normalize(rendered) == _normalize(expected)

    def test_inconsistent_example(self):
        question = QuestionRecord(
            "ex2",
            "Who was President when the first Peanuts cartoon was published?",
            ("Harry S. Truman",),
        )
        personas = {
            "self_initial": {
                "ex2": "President Dwight D. Eisenhower was president during the "
                "publication of the first Peanuts comic strip in 1950."
            },
            "teacher_verify": {
                "ex2": _teacher_script(
                    "Which U.S. leader held office in the year that the Peanuts "
                    "comic strip first appeared?",
                    "Harry S. Truman",
                )
            },
            "self_verification": {
                "ex2": "**Harry S. Truman** was President of the United States in "
                "1950, when the Peanuts comic strip debuted."
            },
            "self_revised": {"ex2": "Harry S. Truman."},
            "consistency_judge": {
                "ex2": _consistency_script(
                    True,
                    False,
                    "I observe that my initial response names Dwight D. Eisenhower "
                    "as the president at the time of the first Peanuts cartoon's "
                    "publication, whereas my revised response states it was Harry "
                    "S. Truman. Since these are distinct individuals who held the "
                    "presidency at different times, my two responses are inconsistent.",
                )
            },
        }
        _, cfg = _example_roles(personas)
        outcome = build_trace(question, cfg)
        assert outcome.status is BuildStatus.KEPT
        trace = outcome.trace
        assert trace.final_mode is FinalMode.ABSTAIN
        assert trace.stage(StageKind.FINAL_RESPONSE).text == ABSTENTION_SENTENCE
        assert trace.hallucination_vector() == [True, False, False, False, False, False]
        assert validate_trace(trace) == []
        rendered, _ = render_trace(trace)
        expected = (FIXTURES / "trace_example_inconsistent.txt").read_text()
        assert _normalize(rendered) == _normalize(expected)


class TestBuildTracePaths:
    def test_refusal_discarded_before_verification(self, personas, builder_config):
        questions = {q.id: q for q in load_questions(FIXTURES / "questions.jsonl")}
        backend = builder_config.self_role.backend
        outcome = build_trace(questions["q20"], builder_config, 19)
        assert outcome.status is BuildStatus.DISCARDED_REFUSAL
        # No teacher or verification calls happen for a refused initial answer.
        tags = [r.role_tag for r in backend.request_log]
        assert "teacher_verify" not in tags
        assert "self_verification" not in tags

    def test_misaligned_discarded(self, builder_config):
        questions = {q.id: q for q in load_questions(FIXTURES / "questions.jsonl")}
        outcome = build_trace(questions["q18"], builder_config, 17)
        assert outcome.status is BuildStatus.DISCARDED_MISALIGNED

    def test_kept_abstain_with_hallucinated_verification(self, builder_config):
        questions = {q.id: q for q in load_questions(FIXTURES / "questions.jsonl")}
        outcome = build_trace(questions["q14"], builder_config, 13)
        assert outcome.status is BuildStatus.KEPT
        trace = outcome.trace
        assert trace.final_mode is FinalMode.ABSTAIN
        # The verification answer is a refusal, so the judge consensus marks it.
        assert trace.hallucination_vector()[0] is True
        assert trace.hallucination_vector()[2] is True
        assert validate_trace(trace) == []

    def test_verification_request_carries_only_the_verification_question(
        self, builder_config
    ):
        questions = {q.id: q for q in load_questions(FIXTURES / "questions.jsonl")}
        backend = builder_config.self_role.backend
        build_trace(questions["q01"], builder_config, 0)
        ver_requests = [
            r for r in backend.request_log if r.role_tag == "self_verification"
        ]
        assert len(ver_requests) == 1
        prompt = ver_requests[0].messages[0].content
        assert questions["q01"].question not in prompt

    def test_self_teacher_guard(self, mock_backend):
        with pytest.raises(ValueError):
            BuilderConfig(
                self_role=ModelRole(mock_backend, "same-model"),
                teacher_role=ModelRole(mock_backend, "same-model"),
                judge_roles=(
                    ModelRole(mock_backend, "judge-a"),
                    ModelRole(mock_backend, "judge-b"),
                ),
            )

    def test_exactly_two_judges_required(self, mock_backend):
        with pytest.raises(ValueError):
            BuilderConfig(
                self_role=ModelRole(mock_backend, "a"),
                teacher_role=ModelRole(mock_backend, "b"),
                judge_roles=(ModelRole(mock_backend, "judge-a"),),  # type: ignore[arg-type]
            )


class TestBuildCorpus:
    def test_fixture_corpus_statistics(self, builder_config, tmp_path):
        questions = load_questions(FIXTURES / "questions.jsonl")
        stats = build_corpus(questions, builder_config, tmp_path)
        assert stats.total == 20
        assert stats.kept == 17
        assert stats.discarded_misaligned == 2
        assert stats.discarded_refusal == 1
        assert stats.failed == 0
        assert stats.per_outcome == {"abstain": 5, "answer": 12}
        lines = (tmp_path / "traces.jsonl").read_text().splitlines()
        assert len(lines) == 17

    def test_kept_traces_all_valid(self, builder_config, tmp_path):
        from verify_forge.core import trace_from_record

        questions = load_questions(FIXTURES / "questions.jsonl")
        build_corpus(questions, builder_config, tmp_path)
        for line in (tmp_path / "traces.jsonl").read_text().splitlines():
            trace = trace_from_record(json.loads(line))
            assert validate_trace(trace) == []

    def test_resume_makes_zero_backend_calls(self, personas, tmp_path):
        backend = MockBackend(seed=20240601, personas=personas)
        cfg = BuilderConfig(
            self_role=ModelRole(backend, "student-s"),
            teacher_role=ModelRole(backend, "teacher-xl"),
            judge_roles=(ModelRole(backend, "judge-a"), ModelRole(backend, "judge-b")),
            run_seed=20240601,
            allow_self_teacher=True,
        )
        questions = load_questions(FIXTURES / "questions.jsonl")
        first = build_corpus(questions, cfg, tmp_path)
        calls_after_first = backend.call_count
        corpus_bytes = (tmp_path / "traces.jsonl").read_bytes()
        second = build_corpus(questions, cfg, tmp_path)
        assert backend.call_count == calls_after_first
        assert second.to_dict() == first.to_dict()
        assert (tmp_path / "traces.jsonl").read_bytes() == corpus_bytes

    def test_corpus_written_in_input_order(self, builder_config, tmp_path):
        questions = load_questions(FIXTURES / "questions.jsonl")
        build_corpus(questions, builder_config, tmp_path)
        ids = [
            json.loads(line)["question_id"]
            for line in (tmp_path / "traces.jsonl").read_text().splitlines()
        ]
        assert ids == sorted(ids)

    def test_empty_question_list_rejected(self, builder_config, tmp_path):
        from verify_forge.errors import VerifyForgeError

        with pytest.raises(VerifyForgeError):
            build_corpus([], builder_config, tmp_path)

    def test_two_runs_byte_identical(self, personas, tmp_path):
        questions = load_questions(FIXTURES / "questions.jsonl")
        outputs = []
        for name in ("one", "two"):
            backend = MockBackend(seed=20240601, personas=personas)
            cfg = BuilderConfig(
                self_role=ModelRole(backend, "student-s"),
                teacher_role=ModelRole(backend, "teacher-xl"),
                judge_roles=(
                    ModelRole(backend, "judge-a"),
                    ModelRole(backend, "judge-b"),
                ),
                run_seed=20240601,
                allow_self_teacher=True,
            )
            out = tmp_path / name
            build_corpus(questions, cfg, out)
            outputs.append((out / "traces.jsonl").read_bytes())
        assert outputs[0] == outputs[1]
