import json
from pathlib import Path

import pytest

from verify_forge.builder import BuilderConfig, ModelRole
from verify_forge.mockllm import MockBackend

from trace_helpers import FIXTURES


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def personas() -> dict:
    return json.loads((FIXTURES / "personas.json").read_text())


@pytest.fixture
def mock_backend(personas) -> MockBackend:
    return MockBackend(seed=20240601, personas=personas)


@pytest.fixture
def builder_config(mock_backend) -> BuilderConfig:
    return BuilderConfig(
        self_role=ModelRole(mock_backend, "student-s"),
        teacher_role=ModelRole(mock_backend, "teacher-xl"),
        judge_roles=(
            ModelRole(mock_backend, "judge-a"),
            ModelRole(mock_backend, "judge-b"),
        ),
        run_seed=20240601,
        allow_self_teacher=True,
    )
