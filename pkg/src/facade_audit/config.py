import os
from dataclasses import dataclass, field
from pathlib import Path

from facade_audit.errors import ConfigError
from facade_audit.promptkit import PIPELINE_STAGES, PromptId

API_KEY_ENV = "FACADE_AUDIT_API_KEY"
FALLBACK_API_KEY_ENV = "OPENAI_API_KEY"


def api_key_from_env() -> str | None:
    """API key from the environment, preferring the project-specific variable."""
    return os.environ.get(API_KEY_ENV) or os.environ.get(FALLBACK_API_KEY_ENV) or None


@dataclass(frozen=True)
class LlmConfig:
    """Immutable settings for the chat-completions client."""

    base_url: str = "https://api.openai.com/v1"
    model_name: str = "gpt-4o"
    api_key: str | None = field(default=None, repr=False)
    temperature: float | None = None  # None = provider default
    max_retries: int = 3
    timeout: float = 120.0  # read timeout, seconds
    max_inflight: int = 4
    backoff_base: float = 1.0  # first retry delay, doubled on each attempt

    def __post_init__(self):
        if not self.base_url.startswith(("http://", "https://")):
            raise ConfigError(f"base_url must be an absolute http(s) URL, got {self.base_url!r}")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.max_inflight < 1:
            raise ConfigError("max_inflight must be >= 1")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.backoff_base <= 0:
            raise ConfigError("backoff_base must be positive")

    @classmethod
    def from_env(cls, **overrides) -> "LlmConfig":
        """Build a config whose api_key comes from the environment unless overridden."""
        overrides.setdefault("api_key", api_key_from_env())
        return cls(**overrides)


DEFAULT_LLM_CONFIG = LlmConfig()


@dataclass(frozen=True)
class PipelineConfig:
    """Immutable settings for assessing properties.

    Setting ``fixtures_dir`` switches to mock mode: responses are played back from recorded
    files and the live endpoint is never contacted.
    """

    llm: LlmConfig = DEFAULT_LLM_CONFIG
    fixtures_dir: Path | None = None
    cache_dir: Path | None = Path(".facade-audit-cache")
    parallel_properties: int = 4
    stages: frozenset[PromptId] = frozenset(PIPELINE_STAGES)

    def __post_init__(self):
        if self.parallel_properties < 1:
            raise ConfigError("parallel_properties must be >= 1")
        unknown = set(self.stages) - set(PIPELINE_STAGES)
        if unknown:
            raise ConfigError(f"Not pipeline stages: {', '.join(sorted(unknown))}")
        if not self.stages:
            raise ConfigError("At least one stage must be selected")

    @property
    def mock(self) -> bool:
        return self.fixtures_dir is not None
