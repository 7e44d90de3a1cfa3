"""Generation backends: a live chat-completion HTTP gateway and a strict
fixture-replay backend for offline, reproducible runs.

Every pipeline stage goes through ``Backend.complete``; nothing else in the
engine talks to the network. The replay backend keys canned responses on a
stable fingerprint of (tag, user text), so identical request sequences always
produce identical responses.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Protocol

import requests

from .errors import (
    FixtureMiss,
    NoPayloadFound,
    RateLimitExhausted,
    Timeout,
    UnbalancedPayload,
    UpstreamError,
)

API_KEY_ENV = "CORPUSLOOP_API_KEY"


@dataclass(frozen=True)
class DecodeSettings:
    temperature: float = 0.2
    max_tokens: int = 2048
    greedy: bool = False

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


# Greedy settings used when the engine drives evaluation inference itself:
# deterministic decoding, short generations sized for bare option letters.
EVAL_DECODE = DecodeSettings(temperature=0.0, max_tokens=15, greedy=True)


@dataclass(frozen=True)
class PromptRequest:
    role_preamble: str
    user_text: str
    decode: DecodeSettings = field(default_factory=DecodeSettings)
    tag: str = ""

    def __post_init__(self):
        if not self.user_text:
            raise ValueError("user_text must be non-empty")


@dataclass(frozen=True)
class BackendConfig:
    endpoint_url: str = ""
    model_name: str = ""
    timeout: float = 60.0
    max_retries: int = 3
    requests_per_minute: int = 60

    def __post_init__(self):
        if self.max_retries < 0 or self.max_retries > 10:
            raise ValueError("max_retries must be in 0..10")
        if self.requests_per_minute <= 0:
            raise ValueError("requests_per_minute must be positive")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


def _normalize_text(text: str) -> str:
    return " ".join(text.split())


def fingerprint(tag: str, user_text: str) -> str:
    """Stable request fingerprint: hash of the tag plus whitespace-collapsed
    user text. The tag disambiguates stages whose prompts embed the same
    variable content."""
    payload = tag + "\x1f" + _normalize_text(user_text)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Backend(Protocol):
    def complete(self, request: PromptRequest) -> str:
        ...


class FixtureBackend:
    """Replay backend over a canned fingerprint -> response map.

    Read-only after load; a missing fingerprint is always an error, never a
    silent fallback.
    """

    def __init__(self, entries: dict[str, str]):
        self.entries = dict(entries)

    @classmethod
    def load(cls, path: str | Path) -> "FixtureBackend":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"fixture file {path} must hold a JSON object")
        return cls({str(k): str(v) for k, v in data.items()})

    def save(self, path: str | Path) -> None:
        body = json.dumps(dict(sorted(self.entries.items())), ensure_ascii=False, indent=1)
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(body + "\n", encoding="utf-8")

    def complete(self, request: PromptRequest) -> str:
        fp = fingerprint(request.tag, request.user_text)
        try:
            return self.entries[fp]
        except KeyError:
            raise FixtureMiss(fp, request.tag) from None


class RecordingBackend:
    """Wraps any backend and captures (fingerprint -> response) pairs,
    used to author fixture files from a scripted run."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.entries: dict[str, str] = {}

    def complete(self, request: PromptRequest) -> str:
        response = self.inner.complete(request)
        self.entries[fingerprint(request.tag, request.user_text)] = response
        return response

    def to_fixture(self) -> FixtureBackend:
        return FixtureBackend(self.entries)


class _RateLimiter:
    """Global minimum-interval throttle shared by all in-flight requests."""

    def __init__(self, requests_per_minute: int):
        self.interval = 60.0 / requests_per_minute
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def wait(self) -> None:
        with self._lock:
            now = time.monotonic()
            slot = max(now, self._next_slot)
            self._next_slot = slot + self.interval
        delay = slot - now
        if delay > 0:
            time.sleep(delay)


class HttpBackend:
    """Chat-completion style HTTP client with retry, backoff and throttling.

    Retries transient failures (timeouts, connection errors, 429, 5xx) with
    exponential backoff: base 1s doubling, +/-20% jitter. Non-retryable
    upstream statuses raise immediately.
    """

    def __init__(self, config: BackendConfig, session: Optional[requests.Session] = None):
        if not config.endpoint_url:
            raise ValueError("endpoint_url required for live backend")
        self.config = config
        self.session = session or requests.Session()
        self._limiter = _RateLimiter(config.requests_per_minute)
        self._rng = random.Random()

    def _backoff(self, attempt: int) -> float:
        base = 1.0 * (2 ** attempt)
        return base * self._rng.uniform(0.8, 1.2)

    def complete(self, request: PromptRequest) -> str:
        body = {
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": request.role_preamble},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": 0.0 if request.decode.greedy else request.decode.temperature,
            "max_tokens": request.decode.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_exc: Optional[BaseException] = None
        rate_limited = False
        attempts = self.config.max_retries + 1
        for attempt in range(attempts):
            self._limiter.wait()
            try:
                resp = self.session.post(
                    self.config.endpoint_url,
                    json=body,
                    headers=headers,
                    timeout=self.config.timeout,
                )
            except requests.Timeout as exc:
                last_exc = exc
                rate_limited = False
            except requests.RequestException as exc:
                last_exc = exc
                rate_limited = False
            else:
                if resp.status_code == 200:
                    data = resp.json()
                    return data["choices"][0]["message"]["content"]
                if resp.status_code == 429:
                    last_exc = UpstreamError(429, "rate limited")
                    rate_limited = True
                elif resp.status_code >= 500:
                    last_exc = UpstreamError(resp.status_code, resp.text[:200])
                    rate_limited = False
                else:
                    raise UpstreamError(resp.status_code, resp.text[:200])
            if attempt < attempts - 1:
                time.sleep(self._backoff(attempt))

        if rate_limited:
            raise RateLimitExhausted(f"gave up after {attempts} attempts")
        if isinstance(last_exc, requests.Timeout):
            raise Timeout(f"request timed out after {attempts} attempts")
        if isinstance(last_exc, UpstreamError):
            raise last_exc
        raise UpstreamError(0, f"connection failed after {attempts} attempts: {last_exc}")


def complete(request: PromptRequest, config: BackendConfig) -> str:
    """One-shot completion against a live endpoint. Long-running callers
    should hold an HttpBackend instead so retries share one rate limiter."""
    return HttpBackend(config).complete(request)


_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n?")
_TRAILING_COMMA_RE = re.compile(r",(\s*[\]}])")


def _find_balanced(text: str) -> str:
    """Return the first balanced top-level JSON array or object in ``text``."""
    start = None
    for i, ch in enumerate(text):
        if ch in "[{":
            start = i
            break
    if start is None:
        raise NoPayloadFound("no JSON array or object found")
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    raise UnbalancedPayload("JSON payload never closes")


def extract_json_payload(raw: str) -> Any:
    """Recover the first top-level JSON array or object from model output.

    Strips code fences and surrounding prose; applies a single trailing-comma
    fix if the initial parse fails. The result is schema-unchecked.
    """
    if not raw or not raw.strip():
        raise NoPayloadFound("empty response")
    cleaned = _FENCE_RE.sub("", raw)
    candidate = _find_balanced(cleaned)
    try:
        return json.loads(candidate)
    except json.JSONDecodeError:
        repaired = _TRAILING_COMMA_RE.sub(r"\1", candidate)
        try:
            return json.loads(repaired)
        except json.JSONDecodeError as exc:
            raise UnbalancedPayload(f"payload is not valid JSON: {exc}") from None
