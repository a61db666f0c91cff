from pathlib import Path

import pytest

from facade_audit.config import DEFAULT_LLM_CONFIG, LlmConfig, PipelineConfig, api_key_from_env
from facade_audit.errors import ConfigError
from facade_audit.promptkit import PIPELINE_STAGES, PromptId


class TestLlmConfig:
    def test_defaults(self):
        config = LlmConfig()
        assert config.model_name == "gpt-4o"
        assert config.base_url == "https://api.openai.com/v1"
        assert config.api_key is None
        assert config.temperature is None
        assert config.max_retries == 3

    def test_key_not_in_repr(self):
        assert "sk-secret" not in repr(LlmConfig(api_key="sk-secret"))

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"base_url": "api.openai.com"},
            {"max_retries": -1},
            {"max_inflight": 0},
            {"timeout": 0},
            {"backoff_base": -1.0},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            LlmConfig(**kwargs)

    def test_env_key_preferred(self, monkeypatch):
        monkeypatch.setenv("OPENAI_API_KEY", "fallback")
        assert api_key_from_env() == "fallback"
        monkeypatch.setenv("FACADE_AUDIT_API_KEY", "primary")
        assert LlmConfig.from_env().api_key == "primary"

    def test_explicit_key_beats_env(self, monkeypatch):
        monkeypatch.setenv("FACADE_AUDIT_API_KEY", "from-env")
        assert LlmConfig.from_env(api_key="given").api_key == "given"

    def test_no_key(self):
        assert LlmConfig.from_env().api_key is None


class TestPipelineConfig:
    def test_defaults(self):
        config = PipelineConfig()
        assert not config.mock
        assert config.stages == frozenset(PIPELINE_STAGES)
        assert config.cache_dir == Path(".facade-audit-cache")
        assert config.llm == DEFAULT_LLM_CONFIG

    def test_mock_mode(self, responses_dir):
        assert PipelineConfig(fixtures_dir=responses_dir).mock

    def test_rejects_zero_parallelism(self):
        with pytest.raises(ConfigError):
            PipelineConfig(parallel_properties=0)

    def test_rejects_empty_stages(self):
        with pytest.raises(ConfigError, match="At least one stage"):
            PipelineConfig(stages=frozenset())

    def test_rejects_experiment_prompts_as_stages(self):
        with pytest.raises(ConfigError, match="X1"):
            PipelineConfig(stages=frozenset({PromptId.P1, PromptId.X1}))
