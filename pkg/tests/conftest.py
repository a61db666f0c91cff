from pathlib import Path

import pytest

from facade_audit.config import LlmConfig, PipelineConfig
from facade_audit.llm_client import FixtureClient

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
RESPONSES = FIXTURES / "responses"
EVALUATION = FIXTURES / "evaluation"


@pytest.fixture
def fixtures_root() -> Path:
    return FIXTURES


@pytest.fixture
def manifest_path() -> Path:
    return FIXTURES / "manifest.json"


@pytest.fixture
def truth_path() -> Path:
    return FIXTURES / "ground_truth.csv"


@pytest.fixture
def responses_dir() -> Path:
    return RESPONSES


@pytest.fixture
def mock_config(tmp_path) -> PipelineConfig:
    """Mock-mode config with a per-test response cache."""
    return PipelineConfig(
        llm=LlmConfig(api_key=None),
        fixtures_dir=RESPONSES,
        cache_dir=tmp_path / "cache",
        parallel_properties=2,
    )


@pytest.fixture
def copied_responses(tmp_path) -> Path:
    """Writable copy of the recorded responses, for tests that break or remove some."""
    target = tmp_path / "responses"
    for source in RESPONSES.rglob("*.txt"):
        dest = target / source.relative_to(RESPONSES)
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_bytes(source.read_bytes())
    return target


@pytest.fixture(autouse=True)
def _no_api_key(monkeypatch):
    """Keep real credentials out of every test."""
    monkeypatch.delenv("FACADE_AUDIT_API_KEY", raising=False)
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)


class RecordingClient(FixtureClient):
    """Fixture playback that also keeps every payload it was sent."""

    def __init__(self, fixtures_dir):
        super().__init__(fixtures_dir)
        self.payloads = []

    def complete(self, payload, property_id):
        self.payloads.append(payload)
        return super().complete(payload, property_id)


class ClosingClient(FixtureClient):
    """Fixture playback that counts how often it was closed."""

    def __init__(self, fixtures_dir):
        super().__init__(fixtures_dir)
        self.closed = 0

    def close(self):
        self.closed += 1
