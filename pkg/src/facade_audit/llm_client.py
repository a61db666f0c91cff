"""Thin wrapper around an OpenAI-compatible chat-completions endpoint, plus fixture playback.

Three clients share one interface (``complete(payload, property_id)``):

- ChatCompletionsClient talks to ``<base_url>/chat/completions`` over httpx.
- FixtureClient plays back recorded answers from ``<fixtures_dir>/<property>/<prompt>.txt``.
- CachingClient wraps either one with an on-disk response cache.
"""

import base64
import hashlib
import logging
import mimetypes
import os
import tempfile
import textwrap
import threading
import time
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx

from facade_audit.config import API_KEY_ENV, FALLBACK_API_KEY_ENV, LlmConfig
from facade_audit.errors import (
    AuthError,
    FixtureMissing,
    ImageUnavailable,
    LlmError,
    MalformedResponse,
    RateLimited,
    RequestRejected,
    TransportError,
)
from facade_audit.promptkit import PromptId, PromptPayload
from facade_audit.security import SecretRedactor

logger = logging.getLogger(__name__)

_CONNECT_TIMEOUT = 10.0
FIXTURE_MODEL_NAME = "fixture"


@dataclass(frozen=True)
class CompletionResult:
    text: str
    prompt_id: PromptId
    property_id: str
    token_usage: dict[str, int] | None = None
    from_cache: bool = False


class CompletionClient(Protocol):
    model_name: str
    calls: int

    def complete(self, payload: PromptPayload, property_id: str) -> CompletionResult: ...

    def close(self) -> None: ...


def image_part(ref: str) -> dict:
    """Content part for one image: URLs pass by reference, local files are inlined."""
    if ref.startswith(("http://", "https://", "data:")):
        url = ref
    else:
        path = Path(ref.removeprefix("file://"))
        try:
            data = path.read_bytes()
        except OSError as e:
            raise ImageUnavailable(f"Cannot read image {path}: {e.strerror or e}") from e
        mime = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        url = f"data:{mime};base64,{base64.b64encode(data).decode('ascii')}"
    return {"type": "image_url", "image_url": {"url": url}}


def build_request(payload: PromptPayload, config: LlmConfig) -> dict:
    """Request body for one prompt. The API key is never part of it."""
    content = [{"type": "text", "text": payload.text}]
    content.extend(image_part(ref) for ref in payload.images)
    body: dict = {
        "model": config.model_name,
        "messages": [{"role": "user", "content": content}],
    }
    if config.temperature is not None:
        body["temperature"] = config.temperature
    return body


def _assistant_text(data: object) -> str | None:
    try:
        content = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        return None
    if isinstance(content, list):
        content = "".join(
            part.get("text", "") for part in content if isinstance(part, dict)
        )
    if not isinstance(content, str) or not content.strip():
        return None
    return content


def _token_usage(data: dict) -> dict[str, int] | None:
    usage = data.get("usage")
    if not isinstance(usage, dict):
        return None
    counters = {k: v for k, v in usage.items() if isinstance(v, int)}
    return counters or None


class ChatCompletionsClient:
    """Live client. Shareable across threads; at most ``max_inflight`` requests in flight."""

    def __init__(
        self,
        config: LlmConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not config.api_key:
            raise AuthError(
                f"No API key: set {API_KEY_ENV} (or {FALLBACK_API_KEY_ENV}) for live mode"
            )
        self.config = config
        self.model_name = config.model_name
        self.calls = 0
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(config.max_inflight)
        self._lock = threading.Lock()
        self._redactor = SecretRedactor([config.api_key])
        self._client = httpx.Client(
            base_url=config.base_url.rstrip("/"),
            headers={"Authorization": f"Bearer {config.api_key}"},
            timeout=httpx.Timeout(_CONNECT_TIMEOUT, read=config.timeout),
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "ChatCompletionsClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _post(self, body: dict) -> httpx.Response:
        with self._slots:
            with self._lock:
                self.calls += 1
            return self._client.post("/chat/completions", json=body)

    def _describe(self, response: httpx.Response) -> str:
        detail = self._redactor.redact(textwrap.shorten(response.text, 200, placeholder="..."))
        return f"HTTP {response.status_code}: {detail}"

    def complete(self, payload: PromptPayload, property_id: str) -> CompletionResult:
        """Send one prompt. Retries 429, 5xx and transport failures with exponential backoff."""
        body = build_request(payload, self.config)
        retries = self.config.max_retries
        for attempt in range(retries + 1):
            try:
                response = self._post(body)
            except httpx.TransportError as e:
                error: LlmError = TransportError(f"{type(e).__name__}: {e}")
            else:
                status = response.status_code
                if status in (401, 403):
                    raise AuthError(self._describe(response))
                if status == 429:
                    error = RateLimited(self._describe(response))
                elif status >= 500:
                    error = TransportError(self._describe(response))
                elif status >= 400:
                    raise RequestRejected(self._describe(response))
                else:
                    return self._result(response, payload, property_id)

            if attempt == retries:
                raise error
            delay = self.config.backoff_base * 2**attempt
            logger.warning(
                f"{property_id}/{payload.prompt_id}: {error}; "
                f"retry {attempt + 1}/{retries} in {delay:.1f}s"
            )
            self._sleep(delay)
        raise AssertionError("unreachable")  # pragma: no cover

    def _result(
        self, response: httpx.Response, payload: PromptPayload, property_id: str
    ) -> CompletionResult:
        try:
            data = response.json()
        except ValueError as e:
            raise MalformedResponse(f"Reply is not JSON: {self._describe(response)}") from e
        text = _assistant_text(data)
        if text is None:
            raise MalformedResponse(f"No assistant text in reply: {self._describe(response)}")
        return CompletionResult(
            text=text,
            prompt_id=payload.prompt_id,
            property_id=property_id,
            token_usage=_token_usage(data),
        )


def mock_complete(payload: PromptPayload, property_id: str, fixtures_dir: Path) -> CompletionResult:
    """Play back ``<fixtures_dir>/<property_id>/<prompt_id>.txt`` verbatim."""
    path = Path(fixtures_dir) / property_id / f"{payload.prompt_id}.txt"
    try:
        text = path.read_bytes().decode("utf-8")
    except FileNotFoundError as e:
        raise FixtureMissing(f"No recorded response at {path}") from e
    except (OSError, UnicodeDecodeError) as e:
        raise FixtureMissing(f"Unreadable recorded response at {path}: {e}") from e
    if not text.strip():
        raise MalformedResponse(f"Recorded response is empty: {path}")
    return CompletionResult(
        text=text, prompt_id=payload.prompt_id, property_id=property_id, from_cache=True
    )


class FixtureClient:
    """Deterministic stand-in for the live client. Never touches the network."""

    model_name = FIXTURE_MODEL_NAME

    def __init__(self, fixtures_dir: Path):
        self.fixtures_dir = Path(fixtures_dir)
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, payload: PromptPayload, property_id: str) -> CompletionResult:
        with self._lock:
            self.calls += 1
        return mock_complete(payload, property_id, self.fixtures_dir)

    def close(self) -> None:
        pass


def cache_key(payload: PromptPayload, model_name: str) -> str:
    """SHA-256 over the model, the prompt text and every image reference."""
    digest = hashlib.sha256()
    for part in (model_name, payload.text, *payload.images):
        digest.update(part.encode("utf-8"))
        digest.update(b"\0")
    return digest.hexdigest()


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


class CachingClient:
    """On-disk response cache in front of another client.

    Layout: ``<cache_dir>/<property_id>/<prompt_id>.<hash>.txt`` holds the answer and
    ``<prompt_id>.<hash>.prompt.txt`` the request text it answered. Both are written
    temp-then-rename, so readers never see a partial file.
    """

    def __init__(self, inner: CompletionClient, cache_dir: Path):
        self.inner = inner
        self.cache_dir = Path(cache_dir)
        self.model_name = inner.model_name

    @property
    def calls(self) -> int:
        return self.inner.calls

    def close(self) -> None:
        self.inner.close()

    def path_for(self, payload: PromptPayload, property_id: str) -> Path:
        digest = cache_key(payload, self.model_name)[:16]
        return self.cache_dir / property_id / f"{payload.prompt_id}.{digest}.txt"

    def complete(self, payload: PromptPayload, property_id: str) -> CompletionResult:
        path = self.path_for(payload, property_id)
        try:
            text = path.read_bytes().decode("utf-8")
        except FileNotFoundError:
            pass
        else:
            logger.debug(f"Cache hit {path}")
            return CompletionResult(
                text=text, prompt_id=payload.prompt_id, property_id=property_id, from_cache=True
            )

        result = self.inner.complete(payload, property_id)
        try:
            _write_atomic(path.with_suffix(".prompt.txt"), payload.text)
            _write_atomic(path, result.text)
        except OSError as e:
            logger.warning(f"Could not write cache entry {path}: {e}")
        return result


def complete(payload: PromptPayload, property_id: str, config: LlmConfig) -> CompletionResult:
    """One-shot live completion with a short-lived client."""
    with ChatCompletionsClient(config) as client:
        return client.complete(payload, property_id)
