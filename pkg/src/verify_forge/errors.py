"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class VerifyForgeError(Exception):
    """Base class for all toolkit errors."""


# --- trace rendering / parsing ---

class MissingStage(VerifyForgeError):
    def __init__(self, kind) -> None:
        self.kind = kind
        super().__init__(f"trace is missing stage: {kind}")


class EmptyStageText(VerifyForgeError):
    def __init__(self, kind) -> None:
        self.kind = kind
        super().__init__(f"stage has empty text: {kind}")


class ScaffoldMismatch(VerifyForgeError):
    def __init__(self, expected: str) -> None:
        self.expected = expected
        super().__init__(f"rendered trace does not match scaffold at: {expected!r}")


class UnterminatedVerifyBlock(VerifyForgeError):
    def __init__(self) -> None:
        super().__init__("rendered trace has no closing </verify> delimiter")


# --- prompt templates / output parsing ---

class UnknownTemplate(VerifyForgeError):
    def __init__(self, template_id: str) -> None:
        self.template_id = template_id
        super().__init__(f"unknown prompt template: {template_id}")


class UnboundSlot(VerifyForgeError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"unbound template slot: {name}")


class MalformedTeacherOutput(VerifyForgeError):
    def __init__(self, missing: list[str]) -> None:
        self.missing = missing
        super().__init__(f"teacher output missing blocks: {', '.join(missing)}")


class UnparsableJudgeOutput(VerifyForgeError):
    pass


# --- gateway ---

class GatewayError(VerifyForgeError):
    pass


class Timeout(GatewayError):
    pass


class EndpointError(GatewayError):
    def __init__(self, status: int, body: str) -> None:
        self.status = status
        self.body = body
        super().__init__(f"endpoint error {status}: {body[:200]}")


class ContextOverflow(GatewayError):
    pass


class ContinuationUnsupported(GatewayError):
    def __init__(self, backend: str) -> None:
        self.backend = backend
        super().__init__(f"backend does not support continuation requests: {backend}")


class UnknownPersona(GatewayError):
    def __init__(self, role_tag: str, item_id: str) -> None:
        self.role_tag = role_tag
        self.item_id = item_id
        super().__init__(f"no persona scripted for ({role_tag}, {item_id})")


class InvalidRequest(GatewayError):
    pass


# --- building / annotation ---

class RefusalNotFilterable(VerifyForgeError):
    def __init__(self) -> None:
        super().__init__("a refusal initial answer cannot enter the aligned-outcome filter")


class MissingLabel(VerifyForgeError):
    def __init__(self, kind) -> None:
        self.kind = kind
        super().__init__(f"stage has no correctness label: {kind}")


# --- metrics ---

class UndefinedMetric(VerifyForgeError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"metric undefined (zero denominator): {name}")


class QuestionSetMismatch(VerifyForgeError):
    def __init__(self, only_base: set, only_treated: set) -> None:
        self.only_base = only_base
        self.only_treated = only_treated
        super().__init__(
            f"question sets differ: {len(only_base)} only in base, "
            f"{len(only_treated)} only in treated"
        )


# --- dataset io / config ---

class ParseError(VerifyForgeError):
    def __init__(self, line: int, reason: str) -> None:
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class DuplicateId(VerifyForgeError):
    def __init__(self, qid: str) -> None:
        self.qid = qid
        super().__init__(f"duplicate question id: {qid}")


class ConfigError(VerifyForgeError):
    pass


class MissingRole(ConfigError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"config is missing role binding: {name}")


class MissingSeed(ConfigError):
    def __init__(self) -> None:
        super().__init__("config must set seeds explicitly (no wall-clock defaults)")


class UnwritablePath(ConfigError):
    def __init__(self, path: str) -> None:
        self.path = path
        super().__init__(f"path is not writable: {path}")


class SecretsInFile(ConfigError):
    def __init__(self, key: str) -> None:
        self.key = key
        super().__init__(
            f"config contains an inline secret ({key}); secrets must come from the environment"
        )
