"""Masking of credentials before text reaches logs, error messages or output files."""

import logging
import re
from dataclasses import dataclass
from typing import Pattern

REDACTED = "[REDACTED]"


@dataclass(frozen=True)
class SecretPattern:
    """A pattern for detecting secrets."""

    name: str
    pattern: Pattern[str]
    description: str


class SecretRedactor:
    """Detects and masks API credentials in text.

    Besides the generic patterns, any literal secret registered with the redactor (the configured
    API key) is masked wherever it appears, whatever its shape.
    """

    PATTERNS: list[SecretPattern] = [
        SecretPattern(
            name="bearer_token",
            pattern=re.compile(r"(?i)(?<=bearer\s)[a-zA-Z0-9_\-\.=]{8,}"),
            description="Bearer tokens in authorization headers",
        ),
        SecretPattern(
            name="openai_key",
            pattern=re.compile(r"\bsk-(?:proj-)?[a-zA-Z0-9_\-]{20,}"),
            description="OpenAI-style secret keys",
        ),
        SecretPattern(
            name="api_key",
            pattern=re.compile(
                r'(?i)(?<=api[_-]key)(["\s:=]+)[a-zA-Z0-9_\-]{16,}'
                r'|(?<=apikey)(["\s:=]+)[a-zA-Z0-9_\-]{16,}'
            ),
            description="API keys in key=value form",
        ),
        SecretPattern(
            name="env_secret",
            pattern=re.compile(
                r"(?<=FACADE_AUDIT_API_KEY=)\S+|(?<=OPENAI_API_KEY=)\S+",
            ),
            description="API key environment assignments",
        ),
    ]

    def __init__(self, secrets: list[str] | None = None):
        self.patterns = self.PATTERNS.copy()
        # Longest first so a key containing another registered key is masked whole.
        self.secrets = sorted({s for s in secrets or [] if s}, key=len, reverse=True)

    def contains_secret(self, text: str) -> bool:
        return bool(text) and self.redact(text) != text

    def redact(self, text: str) -> str:
        """Return ``text`` with every detected secret replaced by [REDACTED]."""
        if not text:
            return text
        for secret in self.secrets:
            text = text.replace(secret, REDACTED)
        for p in self.patterns:
            text = p.pattern.sub(_keep_separator, text)
        return text


def _keep_separator(match: re.Match) -> str:
    # The api_key pattern captures the separator so "api_key: xyz" becomes "api_key: [REDACTED]".
    separator = next((g for g in match.groups() if g), "")
    return separator + REDACTED


class RedactingFilter(logging.Filter):
    """Logging filter that masks secrets in the fully formatted message."""

    def __init__(self, redactor: SecretRedactor):
        super().__init__()
        self.redactor = redactor

    def filter(self, record: logging.LogRecord) -> bool:
        message = record.getMessage()
        redacted = self.redactor.redact(message)
        if redacted != message:
            record.msg = redacted
            record.args = None
        return True
