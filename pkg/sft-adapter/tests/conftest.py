from pathlib import Path

import pytest

from sft_adapter import ChunkTokenizer, load_records

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def nm_records():
    return load_records(FIXTURES / "sft_nm.jsonl")


@pytest.fixture(scope="session")
def mm_records():
    return load_records(FIXTURES / "sft_mm.jsonl")


@pytest.fixture(scope="session")
def sm_records():
    return load_records(FIXTURES / "sft_sm.jsonl")


@pytest.fixture
def tokenizer():
    return ChunkTokenizer()
