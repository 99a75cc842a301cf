"""Uniform chat-completion client with deterministic caching and bounded
parallel batching.

Every request carries a determinism fingerprint (a stable hash over all
request fields). The on-disk cache is content-addressed by that fingerprint,
so replaying a pipeline with caching enabled is free and byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence, Union

import requests

from .errors import (
    ContextOverflow,
    EndpointError,
    InvalidRequest,
    Timeout,
)

VALID_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in VALID_ROLES:
            raise InvalidRequest(f"bad message role: {self.role}")
        if self.role in ("user", "assistant") and not self.content:
            raise InvalidRequest(f"empty content for role {self.role}")


@dataclass(frozen=True)
class GenerationRequest:
    model_id: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int = 512
    seed: Optional[int] = None
    # When true, the final assistant message is left open (no end-of-turn
    # marker) and the model continues it.
    continuation: bool = False
    # Routing hints for the deterministic mock backend; part of the
    # fingerprint like every other field.
    role_tag: Optional[str] = None
    item_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.temperature < 0 or self.temperature > 2:
            raise InvalidRequest(f"temperature out of range: {self.temperature}")
        if self.max_tokens <= 0:
            raise InvalidRequest("max_tokens must be positive")
        if self.continuation:
            if not self.messages or self.messages[-1].role != "assistant":
                raise InvalidRequest("continuation requires a trailing assistant message")


@dataclass
class GenerationResult:
    text: str
    finish_reason: str = "stop"
    token_usage: dict = field(default_factory=dict)
    from_cache: bool = False
    request_fingerprint: str = ""


def fingerprint(request: GenerationRequest) -> str:
    payload = {
        "model_id": request.model_id,
        "messages": [[m.role, m.content] for m in request.messages],
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
        "seed": request.seed,
        "continuation": request.continuation,
        "role_tag": request.role_tag,
        "item_id": request.item_id,
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


class Backend(Protocol):
    name: str

    def generate(self, request: GenerationRequest) -> GenerationResult: ...

    def supports_continuation(self) -> bool: ...


class ResponseCache:
    """Content-addressed on-disk response store keyed by fingerprint.

    Concurrent readers are lock-free; writes are serialized in-process and
    atomic on disk (write to a temp file, then rename).
    """

    def __init__(self, root: Union[str, Path]) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> Optional[GenerationResult]:
        path = self._path(key)
        if not path.exists():
            return None
        data = json.loads(path.read_text(encoding="utf-8"))
        return GenerationResult(
            text=data["text"],
            finish_reason=data.get("finish_reason", "stop"),
            token_usage=data.get("token_usage", {}),
            from_cache=True,
            request_fingerprint=key,
        )

    def put(self, key: str, result: GenerationResult) -> None:
        payload = json.dumps(
            {
                "text": result.text,
                "finish_reason": result.finish_reason,
                "token_usage": result.token_usage,
            },
            ensure_ascii=False,
        )
        with self._write_lock:
            tmp = self._path(key).with_suffix(".tmp")
            tmp.write_text(payload, encoding="utf-8")
            tmp.replace(self._path(key))


def _cacheable(request: GenerationRequest) -> bool:
    # Sampling without a seed is not reproducible, so never cache it.
    return request.temperature == 0.0 or request.seed is not None


RETRY_BACKOFF = (1.0, 4.0, 16.0)
RETRYABLE_STATUSES = {429, 500, 502, 503, 504}


class HTTPBackend:
    """OpenAI-compatible chat-completions backend over HTTP."""

    def __init__(
        self,
        name: str,
        endpoint: str,
        key_env: Optional[str] = None,
        timeout: float = 120.0,
        max_attempts: int = 3,
        sleep=time.sleep,
    ) -> None:
        self.name = name
        self.endpoint = endpoint.rstrip("/")
        self.key_env = key_env
        self.timeout = timeout
        self.max_attempts = max_attempts
        self._sleep = sleep

    def supports_continuation(self) -> bool:
        return True

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.key_env:
            key = os.environ.get(self.key_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def generate(self, request: GenerationRequest) -> GenerationResult:
        body = {
            "model": request.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.seed is not None:
            body["seed"] = request.seed
        if request.continuation:
            # vLLM-style flag: the trailing assistant message is continued
            # rather than closed with an end-of-turn marker.
            body["continue_final_message"] = True
            body["add_generation_prompt"] = False

        last_error: Exception = Timeout("no attempt made")
        for attempt in range(self.max_attempts):
            try:
                resp = requests.post(
                    f"{self.endpoint}/v1/chat/completions",
                    json=body,
                    headers=self._headers(),
                    timeout=self.timeout,
                )
            except requests.Timeout as exc:
                last_error = Timeout(str(exc))
            except requests.RequestException as exc:
                last_error = EndpointError(0, str(exc))
            else:
                if resp.status_code == 200:
                    data = resp.json()
                    choice = data["choices"][0]
                    return GenerationResult(
                        text=choice["message"]["content"],
                        finish_reason=choice.get("finish_reason", "stop"),
                        token_usage=data.get("usage", {}),
                    )
                if resp.status_code == 400 and "context" in resp.text.lower():
                    raise ContextOverflow(resp.text[:200])
                last_error = EndpointError(resp.status_code, resp.text)
                if resp.status_code not in RETRYABLE_STATUSES:
                    raise last_error
            if attempt + 1 < self.max_attempts:
                self._sleep(RETRY_BACKOFF[min(attempt, len(RETRY_BACKOFF) - 1)])
        raise last_error


def complete(
    request: GenerationRequest,
    backend: Backend,
    cache: Optional[ResponseCache] = None,
) -> GenerationResult:
    """Run one chat completion, serving from the cache when possible."""
    key = fingerprint(request)
    if cache is not None and _cacheable(request):
        hit = cache.get(key)
        if hit is not None:
            return hit
    result = backend.generate(request)
    result.request_fingerprint = key
    if cache is not None and _cacheable(request):
        cache.put(key, result)
    return result


def complete_batch(
    requests_: Sequence[GenerationRequest],
    backend: Backend,
    parallelism: int = 4,
    cache: Optional[ResponseCache] = None,
) -> list[Union[GenerationResult, Exception]]:
    """Run a batch with at most `parallelism` requests in flight.

    Results come back in input order; a failing item yields its exception in
    that slot instead of aborting the batch.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")

    def run_one(req: GenerationRequest) -> Union[GenerationResult, Exception]:
        try:
            return complete(req, backend, cache)
        except Exception as exc:  # reported positionally
            return exc

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(run_one, requests_))
