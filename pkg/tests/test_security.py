"""Tests for credential redaction in text and log records."""

import logging

from facade_audit.security import REDACTED, RedactingFilter, SecretRedactor

KEY = "sk-proj-AbCdEfGhIjKlMnOpQrStUvWx0123"


class TestSecretRedactor:
    def test_empty_text(self):
        redactor = SecretRedactor()
        assert not redactor.contains_secret("")
        assert not redactor.contains_secret("   ")
        assert redactor.redact("") == ""

    def test_safe_text(self):
        redactor = SecretRedactor()
        safe_texts = [
            "(4) Apartments in buildings with 5 or more units",
            "HTTP 429: rate limit reached for gpt-4o",
            "The energy consumption is around 35 kWh/m² to 50 kWh/m².",
            "Set FACADE_AUDIT_API_KEY to use live mode",
        ]
        for text in safe_texts:
            assert not redactor.contains_secret(text), f"False positive on: {text}"
            assert redactor.redact(text) == text

    def test_openai_key(self):
        redactor = SecretRedactor()
        text = f"Incorrect API key provided: {KEY}."
        assert redactor.contains_secret(text)
        assert redactor.redact(text) == f"Incorrect API key provided: {REDACTED}."

    def test_bearer_header(self):
        redactor = SecretRedactor()
        redacted = redactor.redact("Authorization: Bearer abc123def456ghi789")
        assert redacted == f"Authorization: Bearer {REDACTED}"

    def test_key_value_keeps_separator(self):
        redactor = SecretRedactor()
        assert redactor.redact("api_key: abcdefghijklmnop1234") == f"api_key: {REDACTED}"

    def test_environment_assignment(self):
        redactor = SecretRedactor()
        assert redactor.redact("OPENAI_API_KEY=whatever") == f"OPENAI_API_KEY={REDACTED}"

    def test_configured_secret_of_any_shape(self):
        redactor = SecretRedactor(["short-but-secret"])
        text = "token short-but-secret rejected"
        assert redactor.contains_secret(text)
        assert not SecretRedactor().contains_secret(text)
        assert redactor.redact(text) == f"token {REDACTED} rejected"

    def test_longest_secret_masked_first(self):
        redactor = SecretRedactor(["abc", "abcdef"])
        assert redactor.redact("key abcdef") == f"key {REDACTED}"


class TestRedactingFilter:
    def _record(self, msg, *args) -> logging.LogRecord:
        return logging.LogRecord("facade_audit", logging.WARNING, __file__, 1, msg, args, None)

    def test_masks_formatted_message(self):
        log_filter = RedactingFilter(SecretRedactor([KEY]))
        record = self._record("retrying with key %s", KEY)
        assert log_filter.filter(record)
        assert record.getMessage() == f"retrying with key {REDACTED}"

    def test_leaves_clean_records_alone(self):
        log_filter = RedactingFilter(SecretRedactor([KEY]))
        record = self._record("fixture-0/P3: parsed %s", "warm air")
        assert log_filter.filter(record)
        assert record.args == ("warm air",)

    def test_end_to_end_logging(self, caplog):
        logger = logging.getLogger("facade_audit.test")
        log_filter = RedactingFilter(SecretRedactor([KEY]))
        logger.addFilter(log_filter)
        try:
            with caplog.at_level(logging.WARNING, logger="facade_audit.test"):
                logger.warning(f"HTTP 401: bad key {KEY}")
        finally:
            logger.removeFilter(log_filter)
        assert KEY not in caplog.text
        assert REDACTED in caplog.text
