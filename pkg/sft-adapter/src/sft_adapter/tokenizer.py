"""A small word-chunk tokenizer with exact byte-offset tracking.

The point of this tokenizer is not linguistic quality: it exists so that mask
alignment can be tested against a tokenizer whose tokens genuinely span
multiple bytes (and can therefore straddle mask-block boundaries), while
still being fully deterministic and dependency-free.

Text is split into alternating whitespace/non-whitespace runs; runs longer
than ``max_token_chars`` are chunked. The vocabulary grows as new token
strings are seen, up to ``vocab_size``; ids are stable for a fixed
feeding order, and decoding is exact.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_RUNS = re.compile(r"\s+|\S+")

PAD, BOS, EOS, USER, ASSISTANT = range(5)
SPECIAL_TOKENS = {
    PAD: "<|pad|>",
    BOS: "<|bos|>",
    EOS: "<|eos|>",
    USER: "<|user|>",
    ASSISTANT: "<|assistant|>",
}


@dataclass(frozen=True)
class Encoding:
    ids: list[int]
    # Half-open byte offsets into the UTF-8 encoding of the input text.
    offsets: list[tuple[int, int]]


class ChunkTokenizer:
    tokenizer_id = "chunk-tokenizer"
    has_byte_offsets = True

    def __init__(self, vocab_size: int = 8192, max_token_chars: int = 5):
        if vocab_size <= len(SPECIAL_TOKENS):
            raise ValueError("vocab_size must exceed the special-token count")
        self.vocab_size = vocab_size
        self.max_token_chars = max_token_chars
        self._token_to_id: dict[str, int] = {
            text: tid for tid, text in SPECIAL_TOKENS.items()
        }
        self._id_to_token: dict[int, str] = dict(SPECIAL_TOKENS)

    def __len__(self) -> int:
        return len(self._token_to_id)

    def _register(self, token: str) -> int:
        tid = self._token_to_id.get(token)
        if tid is None:
            tid = len(self._token_to_id)
            if tid >= self.vocab_size:
                raise ValueError(
                    f"vocabulary overflow: more than {self.vocab_size} distinct tokens"
                )
            self._token_to_id[token] = tid
            self._id_to_token[tid] = token
        return tid

    def encode(self, text: str) -> Encoding:
        ids: list[int] = []
        offsets: list[tuple[int, int]] = []
        byte_pos = 0
        for run in _RUNS.findall(text):
            for i in range(0, len(run), self.max_token_chars):
                chunk = run[i : i + self.max_token_chars]
                chunk_bytes = len(chunk.encode("utf-8"))
                ids.append(self._register(chunk))
                offsets.append((byte_pos, byte_pos + chunk_bytes))
                byte_pos += chunk_bytes
        return Encoding(ids=ids, offsets=offsets)

    def decode(self, ids: list[int]) -> str:
        return "".join(self._id_to_token[i] for i in ids)
