"""LLM gateway: one chat-completions door with caching, retries, and limits.

Every model call in the package flows through LLMGateway.complete(). Requests
are content-addressed (model + temperature + messages) so a filesystem cache
makes batch runs idempotent, and a scriptable mock transport stands in for
the network during tests and offline runs.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import httpx

from .errors import (
    GatewayConfigError,
    StatusError,
    TransportError,
    UnscriptedRequestError,
)

Message = dict  # {"role": ..., "content": ...}


@dataclass(frozen=True)
class BackendConfig:
    """Connection settings for an OpenAI-compatible chat-completions backend."""

    endpoint: str = "http://localhost:8000/v1"
    model: str = "default-model"
    temperature: float = 0.0
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_base_s: float = 0.5
    max_inflight: int = 8
    cache_dir: str | None = None
    api_key_env: str = "COWRITE_API_KEY"

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_inflight < 1:
            raise ValueError("max_inflight must be >= 1")


def canonical_payload(model: str, temperature: float, messages: Sequence[Message]) -> dict:
    return {
        "model": model,
        "temperature": temperature,
        "messages": [{"role": m["role"], "content": m["content"]} for m in messages],
    }


def cache_key(model: str, temperature: float, messages: Sequence[Message]) -> str:
    """256-bit content digest of the canonical request payload."""
    blob = json.dumps(
        canonical_payload(model, temperature, messages),
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class HttpTransport:
    """POSTs to {endpoint}/chat/completions with bearer auth."""

    def __init__(self, config: BackendConfig):
        self.config = config
        self._client = httpx.Client(timeout=config.timeout_s)

    def __call__(self, payload: dict) -> str:
        key = os.environ.get(self.config.api_key_env, "")
        if not key:
            raise GatewayConfigError(
                f"no API key in ${self.config.api_key_env}; set it or use a mock backend"
            )
        url = self.config.endpoint.rstrip("/") + "/chat/completions"
        try:
            response = self._client.post(
                url,
                json=payload,
                headers={"Authorization": f"Bearer {key}"},
            )
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if response.status_code != 200:
            raise StatusError(response.status_code, response.text[:500])
        body = response.json()
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion body: {body!r:.200}") from exc


@dataclass
class MockBackend:
    """Scripted stand-in transport.

    Scripts are (matcher, response) pairs. A matcher is either a 64-hex
    request digest (checked first) or a substring of the flattened prompt
    text (checked in registration order). Responses may be strings or
    callables taking the flattened prompt (callables may raise to simulate
    transport faults). Strict mode errors on unmatched requests; otherwise
    default_response answers them.
    """

    strict: bool = True
    default_response: str = ""
    calls: list = field(default_factory=list)
    call_count: int = 0
    inflight: int = 0
    inflight_peak: int = 0
    delay_s: float = 0.0
    _digest_scripts: dict = field(default_factory=dict)
    _substring_scripts: list = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def script(self, matcher: str, response) -> None:
        if len(matcher) == 64 and all(c in "0123456789abcdef" for c in matcher):
            self._digest_scripts[matcher] = response
        else:
            self._substring_scripts.append((matcher, response))

    def __call__(self, payload: dict) -> str:
        prompt_text = "\n".join(m["content"] for m in payload["messages"])
        with self._lock:
            self.call_count += 1
            self.calls.append(payload)
            self.inflight += 1
            self.inflight_peak = max(self.inflight_peak, self.inflight)
        try:
            if self.delay_s:
                time.sleep(self.delay_s)
            digest = cache_key(payload["model"], payload["temperature"], payload["messages"])
            response = self._digest_scripts.get(digest)
            if response is None:
                for matcher, scripted in self._substring_scripts:
                    if matcher in prompt_text:
                        response = scripted
                        break
            if response is None:
                if self.strict:
                    raise UnscriptedRequestError(
                        f"no script matches request (digest {digest[:12]}..., "
                        f"prompt head {prompt_text[:80]!r})"
                    )
                return self.default_response
            if callable(response):
                return response(prompt_text)
            return response
        finally:
            with self._lock:
                self.inflight -= 1


class LLMGateway:
    """Cache, in-flight limiting, and retry policy around a transport."""

    def __init__(self, config: BackendConfig, transport: Callable[[dict], str] | None = None):
        self.config = config
        self.transport = transport if transport is not None else HttpTransport(config)
        self._semaphore = threading.BoundedSemaphore(config.max_inflight)

    # cache paths fan out on the first two digest bytes to keep dirs small
    def _cache_path(self, digest: str) -> str:
        assert self.config.cache_dir is not None
        return os.path.join(self.config.cache_dir, digest[:2], digest[2:4], digest + ".json")

    def _cache_read(self, digest: str) -> str | None:
        if self.config.cache_dir is None:
            return None
        try:
            with open(self._cache_path(digest), "r", encoding="utf-8") as fh:
                return json.load(fh)["response"]
        except (OSError, ValueError, KeyError):
            return None

    def _cache_write(self, digest: str, payload: dict, response: str) -> None:
        if self.config.cache_dir is None:
            return
        path = self._cache_path(digest)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        entry = {"digest": digest, "request": payload, "response": response}
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(entry, fh, ensure_ascii=False)
            os.replace(tmp, path)  # write-once-then-rename: readers never see partials
        except OSError:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def complete(
        self,
        messages: Sequence[Message],
        *,
        model: str | None = None,
        temperature: float | None = None,
    ) -> str:
        """Return the completion text for messages, via cache when possible."""
        eff_model = model if model is not None else self.config.model
        eff_temp = temperature if temperature is not None else self.config.temperature
        digest = cache_key(eff_model, eff_temp, messages)
        cached = self._cache_read(digest)
        if cached is not None:
            return cached
        payload = canonical_payload(eff_model, eff_temp, messages)
        response = self._send_with_retries(payload)
        self._cache_write(digest, payload, response)
        return response

    def _send_with_retries(self, payload: dict) -> str:
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.backoff_base_s * (2 ** (attempt - 1)))
            try:
                with self._semaphore:
                    return self.transport(payload)
            except (TransportError, StatusError) as exc:
                if isinstance(exc, StatusError) and not _retryable_status(exc.status_code):
                    raise
                last_error = exc
        if isinstance(last_error, StatusError):
            raise last_error
        raise TransportError(f"request failed after {self.config.max_retries + 1} attempts: {last_error}")


def _retryable_status(status_code: int) -> bool:
    return status_code == 429 or status_code >= 500
