"""Text-completion backends.

Two implementations of one small contract: a live HTTP client speaking the
de facto chat-completions wire protocol, and a scripted backend that replays
canned responses so pipelines can be tested deterministically without a
provider.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Protocol, runtime_checkable
from urllib.parse import urlparse

import httpx

DEFAULT_API_KEY_ENV = "WITSCRIPT_API_KEY"
DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"
DEFAULT_MODEL = "gpt-3.5-turbo"

#: Conventional creative-generation defaults; overridable per stage.
DEFAULT_TEMPERATURE = 0.8
DEFAULT_MAX_TOKENS = 128

MAX_STOP_SEQUENCES = 4
MAX_RETRY_LIMIT = 5


class BackendError(Exception):
    """Base class for completion-backend failures."""

    code = "BackendError"


class AuthError(BackendError):
    """API key missing from the environment or rejected by the provider."""

    code = "AuthError"


class TransportError(BackendError):
    """Network failure or persistent transient status after all retries."""

    code = "TransportError"


class ProtocolError(BackendError):
    """Response body could not be parsed as a completion."""

    code = "ProtocolError"


class EmptyCompletion(BackendError):
    """Provider returned empty text."""

    code = "EmptyCompletion"


class ScriptExhausted(BackendError):
    """No unconsumed script entry matches the prompt (a test-ordering bug)."""

    code = "ScriptExhausted"


@dataclass(frozen=True)
class CompletionRequest:
    """One prompt plus decoding parameters."""

    prompt: str
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = DEFAULT_TEMPERATURE
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if len(self.stop_sequences) > MAX_STOP_SEQUENCES:
            raise ValueError(f"at most {MAX_STOP_SEQUENCES} stop sequences")


@dataclass(frozen=True)
class DecodingParams:
    """Optional per-stage overrides of the default decoding parameters."""

    temperature: float | None = None
    max_tokens: int | None = None
    stop_sequences: tuple[str, ...] | None = None


@dataclass(frozen=True)
class BackendConfig:
    """Connection settings for the live backend. The model is config, not code."""

    endpoint_url: str = DEFAULT_ENDPOINT
    model_name: str = DEFAULT_MODEL
    api_key_env_var: str = DEFAULT_API_KEY_ENV
    request_timeout: float = 30.0
    max_retries: int = 3
    retry_backoff_base: float = 0.5

    def __post_init__(self) -> None:
        parsed = urlparse(self.endpoint_url)
        if not parsed.scheme or not parsed.netloc:
            raise ValueError(f"endpoint_url must be absolute: {self.endpoint_url!r}")
        if not 0 <= self.max_retries <= MAX_RETRY_LIMIT:
            raise ValueError(f"max_retries must be in [0, {MAX_RETRY_LIMIT}]")
        if self.request_timeout <= 0:
            raise ValueError("request_timeout must be positive")
        if self.retry_backoff_base < 0:
            raise ValueError("retry_backoff_base must be >= 0")


class MatchMode(str, Enum):
    ANY = "any"
    SUBSTRING = "substring"
    EXACT = "exact"


@dataclass(frozen=True)
class ScriptEntry:
    """One canned completion, consumed when its pattern matches the prompt."""

    match_mode: MatchMode
    pattern: str
    response: str

    def __post_init__(self) -> None:
        if self.match_mode is MatchMode.ANY and self.pattern:
            raise ValueError("pattern must be empty for match mode 'any'")
        if self.match_mode is not MatchMode.ANY and not self.pattern:
            raise ValueError(f"match mode {self.match_mode.value!r} needs a pattern")

    def matches(self, prompt: str) -> bool:
        if self.match_mode is MatchMode.ANY:
            return True
        if self.match_mode is MatchMode.SUBSTRING:
            return self.pattern in prompt
        return prompt == self.pattern


def any_entry(response: str) -> ScriptEntry:
    return ScriptEntry(MatchMode.ANY, "", response)


def substring_entry(pattern: str, response: str) -> ScriptEntry:
    return ScriptEntry(MatchMode.SUBSTRING, pattern, response)


def exact_entry(pattern: str, response: str) -> ScriptEntry:
    return ScriptEntry(MatchMode.EXACT, pattern, response)


@runtime_checkable
class Backend(Protocol):
    """What the pipeline needs from any completion provider."""

    kind: str
    model_name: str

    def complete(self, request: CompletionRequest) -> str:
        ...

    def health_check(self) -> bool:
        ...


class ScriptedBackend:
    """Deterministic backend replaying an ordered script of canned responses.

    Each call consumes the first unconsumed entry whose pattern matches the
    prompt. Consumption is serialized under a lock, and the transcript order
    is the serialization order, so identical scripts plus identical call
    sequences always produce identical transcripts.
    """

    kind = "scripted"

    def __init__(self, entries: Iterable[ScriptEntry], model_name: str = "scripted"):
        self.model_name = model_name
        self._entries = list(entries)
        self._consumed = [False] * len(self._entries)
        self._transcript: list[tuple[str, str]] = []
        self._lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> str:
        with self._lock:
            for i, entry in enumerate(self._entries):
                if self._consumed[i] or not entry.matches(request.prompt):
                    continue
                self._consumed[i] = True
                text = entry.response.strip()
                if not text:
                    raise EmptyCompletion("script entry has empty response")
                self._transcript.append((request.prompt, text))
                return text
            raise ScriptExhausted(
                f"no unconsumed script entry matches prompt starting "
                f"{request.prompt[:60]!r}"
            )

    def health_check(self) -> bool:
        return True

    @property
    def transcript(self) -> tuple[tuple[str, str], ...]:
        """All (prompt, response) pairs served so far, in consumption order."""
        with self._lock:
            return tuple(self._transcript)

    @property
    def remaining(self) -> int:
        with self._lock:
            return self._consumed.count(False)

    @property
    def fully_consumed(self) -> bool:
        return self.remaining == 0


def load_script(path: str | Path, model_name: str | None = None) -> ScriptedBackend:
    """Load a scripted backend from a JSON array of {match, pattern, response}.

    ``match`` defaults to "substring"; ``pattern`` defaults to empty (only
    valid together with "any").
    """
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise ValueError(f"script file {path} must hold a JSON array")
    entries = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or "response" not in item:
            raise ValueError(f"script entry {i} in {path} needs a 'response' field")
        mode = MatchMode(item.get("match", MatchMode.SUBSTRING.value))
        entries.append(ScriptEntry(mode, item.get("pattern", ""), str(item["response"])))
    return ScriptedBackend(entries, model_name=model_name or f"scripted:{path.name}")


class LiveBackend:
    """HTTP client for chat-completions style endpoints.

    Sends ``{model, messages, temperature, max_tokens}`` and reads the single
    choice back. Transient failures (timeouts, connection errors, HTTP 429
    and 5xx) are retried with exponential backoff up to ``max_retries``.
    The API key travels only in the Authorization header; it never appears
    in prompts, errors, or logs.
    """

    kind = "live"

    def __init__(
        self,
        config: BackendConfig | None = None,
        transport: Callable[[dict], httpx.Response] | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self.config = config or BackendConfig()
        self.model_name = self.config.model_name
        self._transport = transport
        self._sleeper = sleeper
        self._client = httpx.Client(timeout=self.config.request_timeout)
        self.last_retries = 0

    def _api_key(self) -> str:
        key = os.environ.get(self.config.api_key_env_var, "")
        if not key:
            raise AuthError(
                f"environment variable {self.config.api_key_env_var} is not set"
            )
        return key

    def _send(self, payload: dict, key: str) -> httpx.Response:
        if self._transport is not None:
            return self._transport(payload)
        return self._client.post(
            self.config.endpoint_url,
            json=payload,
            headers={"Authorization": f"Bearer {key}"},
        )

    def _parse(self, response: httpx.Response) -> str:
        try:
            body = response.json()
            choice = body["choices"][0]
            text = choice["message"]["content"] if "message" in choice else choice["text"]
        except (json.JSONDecodeError, LookupError, TypeError) as exc:
            raise ProtocolError(f"unparseable completion response: {exc}") from exc
        if not isinstance(text, str) or not text.strip():
            raise EmptyCompletion("provider returned empty text")
        return text.strip()

    def complete(self, request: CompletionRequest) -> str:
        key = self._api_key()
        payload: dict = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.stop_sequences:
            payload["stop"] = list(request.stop_sequences)

        last_failure = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            self.last_retries = attempt
            try:
                response = self._send(payload, key)
            except httpx.HTTPError as exc:
                last_failure = f"transport failure: {exc}"
            else:
                status = response.status_code
                if status in (401, 403):
                    raise AuthError(f"provider rejected credentials (HTTP {status})")
                if status == 429 or status >= 500:
                    last_failure = f"HTTP {status}"
                elif status != 200:
                    raise ProtocolError(f"unexpected HTTP {status}")
                else:
                    return self._parse(response)
            if attempt < self.config.max_retries:
                self._sleeper(self.config.retry_backoff_base * (2 ** attempt))
        raise TransportError(
            f"giving up after {self.config.max_retries} retries; last: {last_failure}"
        )

    def health_check(self) -> bool:
        """Cheap reachability gate: the key must at least be present."""
        try:
            self._api_key()
        except AuthError:
            return False
        return True
