import json

import pytest
import yaml

from verify_forge.dataset_io import (
    REQUIRED_ROLES,
    load_config,
    load_questions,
    write_questions,
)
from verify_forge.errors import (
    ConfigError,
    DuplicateId,
    MissingRole,
    MissingSeed,
    ParseError,
    SecretsInFile,
    UnwritablePath,
)

from trace_helpers import FIXTURES


def _write_jsonl(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")


class TestLoadQuestionsNative:
    def test_basic_load(self, tmp_path):
        path = tmp_path / "q.jsonl"
        _write_jsonl(
            path,
            [
                {"id": "a", "question": "Q1?", "gold_answers": ["A1"]},
                {"id": "b", "question": "Q2?", "gold_answers": ["A2", "alias"]},
                {"id": "c", "question": "Q3?", "gold_answers": ["A3"]},
            ],
        )
        records = load_questions(path)
        assert [r.id for r in records] == ["a", "b", "c"]
        assert records[1].gold_answers == ("A2", "alias")

    def test_missing_id_synthesized_stably(self, tmp_path):
        path = tmp_path / "q.jsonl"
        _write_jsonl(
            path,
            [
                {"question": "Q1?", "gold_answers": ["A1"], "dataset_tag": "demo"},
                {"id": "kept", "question": "Q2?", "gold_answers": ["A2"]},
                {"question": "Q3?", "gold_answers": ["A3"], "dataset_tag": "demo"},
            ],
        )
        records = load_questions(path)
        assert records[0].id == "demo-000000"
        assert records[1].id == "kept"
        assert records[2].id == "demo-000002"

    def test_parse_error_carries_line_number(self, tmp_path):
        path = tmp_path / "q.jsonl"
        path.write_text(
            json.dumps({"id": "a", "question": "Q?", "gold_answers": ["A"]})
            + "\nnot json\n"
        )
        with pytest.raises(ParseError) as exc:
            load_questions(path)
        assert exc.value.line == 2

    def test_missing_field(self, tmp_path):
        path = tmp_path / "q.jsonl"
        _write_jsonl(path, [{"id": "a", "question": "Q?"}])
        with pytest.raises(ParseError):
            load_questions(path)

    def test_empty_gold_rejected(self, tmp_path):
        path = tmp_path / "q.jsonl"
        _write_jsonl(path, [{"id": "a", "question": "Q?", "gold_answers": []}])
        with pytest.raises(ParseError):
            load_questions(path)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "q.jsonl"
        _write_jsonl(
            path,
            [
                {"id": "a", "question": "Q1?", "gold_answers": ["A"]},
                {"id": "a", "question": "Q2?", "gold_answers": ["B"]},
            ],
        )
        with pytest.raises(DuplicateId):
            load_questions(path)

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "q.jsonl"
        path.write_text(
            "\n" + json.dumps({"id": "a", "question": "Q?", "gold_answers": ["A"]}) + "\n\n"
        )
        assert len(load_questions(path)) == 1

    def test_round_trip(self, tmp_path):
        original = load_questions(FIXTURES / "questions.jsonl")
        out = tmp_path / "copy.jsonl"
        write_questions(original, out)
        assert load_questions(out) == original


class TestLoadQuestionsTriviaqa:
    def test_aliases_folded_into_gold(self, tmp_path):
        path = tmp_path / "t.jsonl"
        _write_jsonl(
            path,
            [
                {
                    "QuestionId": "tq_1",
                    "Question": "Largest planet?",
                    "Answer": {"Value": "Jupiter", "Aliases": ["Jupiter", "planet Jupiter"]},
                }
            ],
        )
        (record,) = load_questions(path)
        assert record.id == "tq_1"
        assert record.gold_answers == ("Jupiter", "planet Jupiter")
        assert record.dataset_tag == "triviaqa"

    def test_format_sniffed(self, tmp_path):
        path = tmp_path / "t.jsonl"
        _write_jsonl(
            path,
            [
                {
                    "QuestionId": "tq_2",
                    "Question": "Q?",
                    "Answer": {"Value": "A"},
                }
            ],
        )
        (record,) = load_questions(path, fmt="auto")
        assert record.dataset_tag == "triviaqa"

    def test_answer_without_value_or_aliases(self, tmp_path):
        path = tmp_path / "t.jsonl"
        _write_jsonl(path, [{"QuestionId": "tq_3", "Question": "Q?", "Answer": {}}])
        with pytest.raises(ParseError):
            load_questions(path, fmt="triviaqa")

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            load_questions(tmp_path / "missing.jsonl", fmt="csv")


def _base_config(tmp_path, **overrides):
    data = {
        "seed": 1234,
        "parallelism": 2,
        "roles": {
            "self": {"backend": "mock", "model": "student"},
            "teacher": {"backend": "mock", "model": "teacher"},
            "judge_1": {"backend": "mock", "model": "judge-a"},
            "judge_2": {"backend": "mock", "model": "judge-b"},
        },
    }
    data.update(overrides)
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


class TestLoadConfig:
    def test_valid_config(self, tmp_path):
        cfg = load_config(_base_config(tmp_path))
        assert cfg.seed == 1234
        assert cfg.parallelism == 2
        assert set(REQUIRED_ROLES) <= set(cfg.roles)
        assert cfg.roles["self"].model == "student"

    def test_eval_judge_defaults_to_first_judge(self, tmp_path):
        cfg = load_config(_base_config(tmp_path))
        assert cfg.roles["eval_judge"] == cfg.roles["judge_1"]

    def test_fixture_config_loads(self):
        cfg = load_config(FIXTURES / "config.yaml")
        assert cfg.seed == 20240601

    def test_missing_seed(self, tmp_path):
        path = _base_config(tmp_path)
        data = yaml.safe_load(path.read_text())
        del data["seed"]
        path.write_text(yaml.safe_dump(data))
        with pytest.raises(MissingSeed):
            load_config(path)

    def test_missing_role(self, tmp_path):
        path = _base_config(tmp_path)
        data = yaml.safe_load(path.read_text())
        del data["roles"]["judge_2"]
        path.write_text(yaml.safe_dump(data))
        with pytest.raises(MissingRole):
            load_config(path)

    def test_inline_secret_rejected(self, tmp_path):
        path = _base_config(
            tmp_path, backends={"remote": {"url": "https://x", "api_key": "sk-123"}}
        )
        with pytest.raises(SecretsInFile):
            load_config(path)

    def test_nested_secret_rejected(self, tmp_path):
        path = _base_config(
            tmp_path, backends={"remote": {"auth": {"token": "abc"}, "url": "https://x"}}
        )
        with pytest.raises(SecretsInFile):
            load_config(path)

    def test_key_env_reference_allowed(self, tmp_path):
        path = _base_config(
            tmp_path,
            backends={"remote": {"url": "https://x", "key_env": "MY_CUSTOM_KEY"}},
        )
        cfg = load_config(path)
        assert cfg.key_env("remote") == "MY_CUSTOM_KEY"

    def test_default_key_env_naming(self, tmp_path):
        path = _base_config(tmp_path, backends={"open-router": {"url": "https://x"}})
        cfg = load_config(path)
        assert cfg.key_env("open-router") == "VERIFY_FORGE_API_KEY_OPEN_ROUTER"

    def test_unknown_backend_reference(self, tmp_path):
        path = _base_config(tmp_path)
        data = yaml.safe_load(path.read_text())
        data["roles"]["self"]["backend"] = "nowhere"
        path.write_text(yaml.safe_dump(data))
        with pytest.raises(ConfigError):
            load_config(path)

    def test_unwritable_output_dir(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory")
        path = _base_config(tmp_path, output_dir=str(blocker / "out"))
        with pytest.raises(UnwritablePath):
            load_config(path)

    def test_bad_strategy_policy(self, tmp_path):
        path = _base_config(
            tmp_path, strategy_policy={"mode": "weighted", "weights": [1.0]}
        )
        with pytest.raises(ConfigError):
            load_config(path)

    def test_bad_parallelism(self, tmp_path):
        path = _base_config(tmp_path, parallelism=0)
        with pytest.raises(ConfigError):
            load_config(path)
