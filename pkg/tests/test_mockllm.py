import pytest

from verify_forge.errors import UnknownPersona
from verify_forge.gateway import ChatMessage, GenerationRequest
from verify_forge.mockllm import MockBackend, is_refusal_text
from verify_forge.prompts import (
    parse_consistency_json,
    parse_judge_label,
    parse_sc_label,
    parse_teacher_output,
    render_prompt,
    teacher_template_id,
)


def _req(prompt, role_tag=None, item_id=None, continuation=False):
    messages = [ChatMessage("user", prompt)]
    if continuation:
        messages.append(ChatMessage("assistant", "partial answer"))
    return GenerationRequest(
        model_id="mock-model",
        messages=tuple(messages),
        role_tag=role_tag,
        item_id=item_id,
        continuation=continuation,
    )


class TestPersonaTable:
    def test_scripted_response(self):
        backend = MockBackend(personas={"self_initial": {"q1": "Scripted."}})
        out = backend.generate(_req("anything", role_tag="self_initial", item_id="q1"))
        assert out.text == "Scripted."

    def test_unknown_item_raises(self):
        backend = MockBackend(personas={"self_initial": {"q1": "Scripted."}})
        with pytest.raises(UnknownPersona):
            backend.generate(_req("anything", role_tag="self_initial", item_id="q2"))

    def test_unscripted_role_falls_through(self):
        backend = MockBackend(personas={"self_initial": {"q1": "Scripted."}})
        out = backend.generate(_req("anything", role_tag="other_role", item_id="q2"))
        assert out.text.startswith("Mock answer ")


class TestDeterminism:
    def test_same_request_same_text(self):
        a = MockBackend(seed=5)
        b = MockBackend(seed=5)
        req = _req("what is the answer?")
        assert a.generate(req).text == b.generate(req).text

    def test_seed_changes_text(self):
        req = _req("what is the answer?")
        assert MockBackend(seed=1).generate(req).text != MockBackend(seed=2).generate(req).text

    def test_continuation_shape(self):
        out = MockBackend(seed=1).generate(_req("q", continuation=True))
        assert out.text.startswith("The final answer is mock-")


class TestHeuristicJudges:
    def test_ground_truth_judge_correct(self):
        prompt = render_prompt(
            "ground_truth_judge",
            {"q": "Capital of France?", "gold": "Paris", "a": "It is Paris."},
        )
        label = parse_judge_label(MockBackend().generate(_req(prompt)).text)["label"]
        assert label.value == "Correct"

    def test_ground_truth_judge_alias_match(self):
        prompt = render_prompt(
            "ground_truth_judge",
            {"q": "Host of 2000 Olympics?", "gold": "Australia OR Sydney", "a": "Sydney hosted it."},
        )
        label = parse_judge_label(MockBackend().generate(_req(prompt)).text)["label"]
        assert label.value == "Correct"

    def test_ground_truth_judge_incorrect(self):
        prompt = render_prompt(
            "ground_truth_judge",
            {"q": "Capital of France?", "gold": "Paris", "a": "It is Lyon."},
        )
        label = parse_judge_label(MockBackend().generate(_req(prompt)).text)["label"]
        assert label.value == "Incorrect"

    def test_ground_truth_judge_refusal(self):
        prompt = render_prompt(
            "ground_truth_judge",
            {"q": "Capital of France?", "gold": "Paris", "a": "I don't know."},
        )
        label = parse_judge_label(MockBackend().generate(_req(prompt)).text)["label"]
        assert label.value == "Refusal"

    def test_sc_judge_labels(self):
        cases = [
            ("The answer is Paris.", "Paris.", "CONSISTENT"),
            ("The answer is Paris.", "It was Lyon.", "INCONSISTENT"),
            ("The answer is Paris.", "I'm not sure.", "NOT_ATTEMPTED"),
        ]
        for reference, candidate, expected in cases:
            prompt = render_prompt(
                "sc_consistency_judge",
                {"q": "Capital of France?", "reference": reference, "candidate": candidate},
            )
            assert parse_sc_label(MockBackend().generate(_req(prompt)).text) == expected

    def test_consistency_judge_parseable(self):
        prompt = render_prompt(
            "consistency_judge",
            {
                "q": "Capital of France?",
                "gold": "Paris",
                "a0": "The answer is Paris.",
                "a1": "Paris.",
            },
        )
        out = parse_consistency_json(MockBackend().generate(_req(prompt)).text)
        assert out["correctness"][0].value == "Correct"
        assert out["consistency"][0].value == "Consistent"

    def test_consistency_judge_inconsistent(self):
        prompt = render_prompt(
            "consistency_judge",
            {
                "q": "Capital of France?",
                "gold": "Paris",
                "a0": "The answer is Lyon.",
                "a1": "Paris.",
            },
        )
        out = parse_consistency_json(MockBackend().generate(_req(prompt)).text)
        assert out["consistency"][0].value == "Inconsistent"

    def test_teacher_output_parseable(self):
        prompt = render_prompt(
            teacher_template_id("rephrase"),
            {"q": "What is the capital of France?", "gold": "Paris", "a0": "Paris."},
        )
        out = parse_teacher_output(MockBackend().generate(_req(prompt)).text)
        assert "capital of France" in out["verification_question"]
        assert out["verification_gold"] == "Paris"


class TestRefusalDetection:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("I don't know.", True),
            ("I do not have sufficient knowledge to answer this question.", True),
            ("I'm not sure, sorry.", True),
            ("The answer is Paris.", False),
        ],
    )
    def test_cases(self, text, expected):
        assert is_refusal_text(text) is expected


class TestInstrumentation:
    def test_call_count_and_log(self):
        backend = MockBackend()
        backend.generate(_req("one"))
        backend.generate(_req("two"))
        assert backend.call_count == 2
        assert len(backend.request_log) == 2
