"""Question-set loading and run configuration.

Two question formats are accepted: the native JSONL schema and the raw
TriviaQA export shape (``Question`` / ``Answer.Aliases``). Run configs are
YAML; API keys never live in the file, only environment variable names do
(``VERIFY_FORGE_API_KEY_<BACKEND>`` by convention).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import yaml

from .core import QuestionRecord
from .errors import (
    ConfigError,
    DuplicateId,
    MissingRole,
    MissingSeed,
    ParseError,
    SecretsInFile,
    UnwritablePath,
)
from .prompts import StrategyPolicy, VerificationStrategy, default_policy


def _native_record(data: dict, line_no: int, index: int) -> QuestionRecord:
    try:
        question = str(data["question"])
        gold = data["gold_answers"]
    except KeyError as exc:
        raise ParseError(line_no, f"missing field {exc.args[0]!r}") from exc
    if not isinstance(gold, list) or not gold:
        raise ParseError(line_no, "gold_answers must be a non-empty list")
    tag = str(data.get("dataset_tag", "native"))
    # Records without an id get a synthesized, position-stable one.
    qid = str(data["id"]) if "id" in data else f"{tag}-{index:06d}"
    return QuestionRecord(
        id=qid,
        question=question,
        gold_answers=tuple(str(a) for a in gold),
        dataset_tag=tag,
    )


def _triviaqa_record(data: dict, line_no: int) -> QuestionRecord:
    try:
        qid = str(data["QuestionId"])
        question = str(data["Question"])
        answer = data["Answer"]
    except KeyError as exc:
        raise ParseError(line_no, f"missing field {exc.args[0]!r}") from exc
    aliases = list(answer.get("Aliases", []))
    value = answer.get("Value")
    gold = []
    if value:
        gold.append(str(value))
    gold.extend(str(a) for a in aliases if str(a) not in gold)
    if not gold:
        raise ParseError(line_no, "answer has neither Value nor Aliases")
    return QuestionRecord(
        id=qid, question=question, gold_answers=tuple(gold), dataset_tag="triviaqa"
    )


def load_questions(path: Union[str, Path], fmt: str = "auto") -> list[QuestionRecord]:
    """Load a JSONL question set, rejecting malformed lines and duplicate ids.

    fmt is "native", "triviaqa", or "auto" (sniffed from the first record).
    """
    if fmt not in ("auto", "native", "triviaqa"):
        raise ValueError(f"unknown question format: {fmt}")
    records: list[QuestionRecord] = []
    seen: set[str] = set()
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(data, dict):
                raise ParseError(line_no, "record is not a JSON object")
            if fmt == "auto":
                fmt = "triviaqa" if "QuestionId" in data else "native"
            try:
                record = (
                    _triviaqa_record(data, line_no)
                    if fmt == "triviaqa"
                    else _native_record(data, line_no, len(records))
                )
            except ValueError as exc:
                if isinstance(exc, ParseError):
                    raise
                raise ParseError(line_no, str(exc)) from exc
            if record.id in seen:
                raise DuplicateId(record.id)
            seen.add(record.id)
            records.append(record)
    return records


def write_questions(records: list[QuestionRecord], path: Union[str, Path]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {
                        "id": r.id,
                        "question": r.question,
                        "gold_answers": list(r.gold_answers),
                        "dataset_tag": r.dataset_tag,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


# --- run configuration ------------------------------------------------------------

_SECRET_KEY_HINTS = ("api_key", "apikey", "secret", "token", "password")
REQUIRED_ROLES = ("self", "teacher", "judge_1", "judge_2")


@dataclass(frozen=True)
class RoleBinding:
    backend: str
    model: str


@dataclass
class RunConfig:
    seed: int
    roles: dict[str, RoleBinding]
    backends: dict[str, dict]
    parallelism: int = 4
    output_dir: Optional[Path] = None
    cache_dir: Optional[Path] = None
    strategy_policy: StrategyPolicy = field(default_factory=default_policy)

    def key_env(self, backend_name: str) -> str:
        custom = self.backends.get(backend_name, {}).get("key_env")
        if custom:
            return str(custom)
        return "VERIFY_FORGE_API_KEY_" + backend_name.upper().replace("-", "_")


def _check_no_inline_secrets(node, path: str = "") -> None:
    if isinstance(node, dict):
        for key, value in node.items():
            where = f"{path}.{key}" if path else str(key)
            lowered = str(key).lower()
            if any(hint in lowered for hint in _SECRET_KEY_HINTS) and lowered != "key_env":
                raise SecretsInFile(where)
            _check_no_inline_secrets(value, where)
    elif isinstance(node, list):
        for i, value in enumerate(node):
            _check_no_inline_secrets(value, f"{path}[{i}]")


def _writable_dir(raw: str) -> Path:
    path = Path(raw)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write_probe"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise UnwritablePath(str(path)) from exc
    return path


def _parse_policy(data: dict) -> StrategyPolicy:
    strategies = tuple(VerificationStrategy(s) for s in data.get("strategies", []))
    kwargs = {
        "mode": data.get("mode", "uniform"),
        "rng_seed": int(data.get("rng_seed", 0)),
    }
    if strategies:
        kwargs["strategies"] = strategies
    if "weights" in data:
        kwargs["weights"] = tuple(float(w) for w in data["weights"])
    try:
        return StrategyPolicy(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"bad strategy policy: {exc}") from exc


def load_config(path: Union[str, Path]) -> RunConfig:
    """Load and validate a YAML run config.

    Seeds must be explicit, every pipeline role must be bound, output paths
    must be writable, and credential material must not appear inline.
    """
    with Path(path).open("r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")

    _check_no_inline_secrets(data)

    if "seed" not in data:
        raise MissingSeed()
    try:
        seed = int(data["seed"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seed must be an integer: {data['seed']!r}") from exc

    roles_raw = data.get("roles") or {}
    roles: dict[str, RoleBinding] = {}
    for name in REQUIRED_ROLES:
        if not roles_raw.get(name):
            raise MissingRole(name)
    for name, binding in roles_raw.items():
        try:
            roles[name] = RoleBinding(str(binding["backend"]), str(binding["model"]))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"role {name} needs backend and model fields") from exc
    # The evaluation judge is optional and defaults to the first trace judge.
    roles.setdefault("eval_judge", roles["judge_1"])

    backends = data.get("backends") or {}
    if not isinstance(backends, dict):
        raise ConfigError("backends must be a mapping")
    for name, binding in roles.items():
        if binding.backend != "mock" and binding.backend not in backends:
            raise ConfigError(f"role {name} references unknown backend {binding.backend!r}")

    output_dir = _writable_dir(data["output_dir"]) if data.get("output_dir") else None
    cache_dir = _writable_dir(data["cache_dir"]) if data.get("cache_dir") else None

    policy = (
        _parse_policy(data["strategy_policy"])
        if data.get("strategy_policy")
        else default_policy(rng_seed=seed)
    )

    parallelism = int(data.get("parallelism", 4))
    if parallelism < 1:
        raise ConfigError("parallelism must be >= 1")

    return RunConfig(
        seed=seed,
        roles=roles,
        backends={str(k): dict(v or {}) for k, v in backends.items()},
        parallelism=parallelism,
        output_dir=output_dir,
        cache_dir=cache_dir,
        strategy_policy=policy,
    )
