"""Gateway behavior: content-addressed caching, scripting, retries, limits."""

from __future__ import annotations

import json
import threading

import pytest

from cowrite.errors import (
    GatewayConfigError,
    StatusError,
    TransportError,
    UnscriptedRequestError,
)
from cowrite.gateway import (
    BackendConfig,
    HttpTransport,
    LLMGateway,
    MockBackend,
    cache_key,
)


def messages(text: str) -> list[dict]:
    return [{"role": "user", "content": text}]


def make_gateway(tmp_path=None, **mock_kwargs) -> tuple[LLMGateway, MockBackend]:
    config = BackendConfig(
        cache_dir=str(tmp_path / "cache") if tmp_path is not None else None,
        backoff_base_s=0.0,
    )
    mock = MockBackend(**mock_kwargs)
    return LLMGateway(config, transport=mock), mock


class TestCacheKey:
    def test_stable_across_message_object_identity(self):
        a = cache_key("m", 0.0, [{"role": "user", "content": "hi"}])
        b = cache_key("m", 0.0, [dict(role="user", content="hi")])
        assert a == b
        assert len(a) == 64

    def test_sensitive_to_each_component(self):
        base = cache_key("m", 0.0, messages("hi"))
        assert cache_key("m2", 0.0, messages("hi")) != base
        assert cache_key("m", 0.5, messages("hi")) != base
        assert cache_key("m", 0.0, messages("hi!")) != base
        assert cache_key("m", 0.0, [{"role": "system", "content": "hi"}]) != base

    def test_ignores_extra_message_keys(self):
        noisy = [{"role": "user", "content": "hi", "name": "x"}]
        assert cache_key("m", 0.0, noisy) == cache_key("m", 0.0, messages("hi"))


class TestCaching:
    def test_second_identical_call_hits_cache(self, tmp_path):
        gateway, mock = make_gateway(tmp_path)
        mock.script("ping", "pong")
        first = gateway.complete(messages("ping"))
        assert first == "pong"
        assert mock.call_count == 1
        second = gateway.complete(messages("ping"))
        assert second == first
        assert mock.call_count == 1  # served from disk, no transport call

    def test_distinct_requests_miss(self, tmp_path):
        gateway, mock = make_gateway(tmp_path)
        mock.script("ping", "pong")
        mock.script("pang", "pung")
        gateway.complete(messages("ping"))
        gateway.complete(messages("pang"))
        assert mock.call_count == 2

    def test_cache_survives_gateway_restart(self, tmp_path):
        gateway, mock = make_gateway(tmp_path)
        mock.script("ping", "pong")
        gateway.complete(messages("ping"))
        fresh_mock = MockBackend()  # unscripted and strict: any call would raise
        fresh = LLMGateway(
            BackendConfig(cache_dir=str(tmp_path / "cache")), transport=fresh_mock
        )
        assert fresh.complete(messages("ping")) == "pong"
        assert fresh_mock.call_count == 0

    def test_cache_entry_is_self_describing(self, tmp_path):
        gateway, mock = make_gateway(tmp_path)
        mock.script("ping", "pong")
        gateway.complete(messages("ping"))
        files = list((tmp_path / "cache").rglob("*.json"))
        assert len(files) == 1
        entry = json.loads(files[0].read_text(encoding="utf-8"))
        assert entry["response"] == "pong"
        assert entry["request"]["messages"][0]["content"] == "ping"
        assert files[0].stem == entry["digest"]

    def test_no_cache_dir_means_no_reuse(self):
        gateway, mock = make_gateway(None)
        mock.script("ping", "pong")
        gateway.complete(messages("ping"))
        gateway.complete(messages("ping"))
        assert mock.call_count == 2

    def test_corrupt_cache_entry_refetched(self, tmp_path):
        gateway, mock = make_gateway(tmp_path)
        mock.script("ping", "pong")
        gateway.complete(messages("ping"))
        entry = next((tmp_path / "cache").rglob("*.json"))
        entry.write_text("{not json", encoding="utf-8")
        assert gateway.complete(messages("ping")) == "pong"
        assert mock.call_count == 2


class TestMockBackend:
    def test_digest_script_wins_over_substring(self, tmp_path):
        gateway, mock = make_gateway(tmp_path)
        digest = cache_key("default-model", 0.0, messages("ping"))
        mock.script("ping", "substring answer")
        mock.script(digest, "digest answer")
        assert gateway.complete(messages("ping")) == "digest answer"

    def test_substring_scripts_in_registration_order(self, tmp_path):
        gateway, mock = make_gateway(tmp_path)
        mock.script("needle", "first")
        mock.script("needle in", "second")
        assert gateway.complete(messages("a needle in a haystack")) == "first"

    def test_strict_mode_raises_on_unscripted(self):
        gateway, mock = make_gateway(None)
        with pytest.raises(UnscriptedRequestError):
            gateway.complete(messages("surprise"))

    def test_lenient_mode_returns_default(self):
        gateway, mock = make_gateway(None, strict=False, default_response="shrug")
        assert gateway.complete(messages("surprise")) == "shrug"

    def test_callable_response_sees_prompt(self):
        gateway, mock = make_gateway(None)
        mock.script("echo", lambda prompt: prompt.upper())
        assert gateway.complete(messages("echo me")) == "ECHO ME"


class TestRetries:
    def test_transport_error_then_success(self):
        gateway, mock = make_gateway(None)
        attempts = []

        def flaky(prompt: str) -> str:
            attempts.append(prompt)
            if len(attempts) < 3:
                raise TransportError("connection reset")
            return "recovered"

        mock.script("flaky", flaky)
        assert gateway.complete(messages("flaky")) == "recovered"
        assert len(attempts) == 3

    def test_retryable_status_then_success(self):
        gateway, mock = make_gateway(None)
        attempts = []

        def throttled(prompt: str) -> str:
            attempts.append(prompt)
            if len(attempts) == 1:
                raise StatusError(429, "slow down")
            return "ok"

        mock.script("throttled", throttled)
        assert gateway.complete(messages("throttled")) == "ok"
        assert len(attempts) == 2

    def test_client_error_not_retried(self):
        gateway, mock = make_gateway(None)
        attempts = []

        def rejected(prompt: str) -> str:
            attempts.append(prompt)
            raise StatusError(400, "bad request")

        mock.script("rejected", rejected)
        with pytest.raises(StatusError):
            gateway.complete(messages("rejected"))
        assert len(attempts) == 1

    def test_exhausted_retries_raise(self):
        gateway, mock = make_gateway(None)

        def always_down(prompt: str) -> str:
            raise TransportError("down")

        mock.script("down", always_down)
        with pytest.raises(TransportError):
            gateway.complete(messages("down"))
        assert mock.call_count == 4  # initial + max_retries(3)


class TestInflightLimit:
    def test_peak_concurrency_bounded(self):
        config = BackendConfig(max_inflight=3, backoff_base_s=0.0)
        mock = MockBackend(delay_s=0.02)
        for i in range(12):
            mock.script(f"job-{i} ", f"done-{i}")
        gateway = LLMGateway(config, transport=mock)
        threads = [
            threading.Thread(target=gateway.complete, args=(messages(f"job-{i} n"),))
            for i in range(12)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert mock.call_count == 12
        assert mock.inflight_peak <= 3


class TestHttpTransport:
    def test_missing_api_key_fails_before_network(self, monkeypatch):
        monkeypatch.delenv("COWRITE_API_KEY", raising=False)
        transport = HttpTransport(BackendConfig(endpoint="http://127.0.0.1:1/v1"))
        with pytest.raises(GatewayConfigError):
            transport({"model": "m", "temperature": 0.0, "messages": messages("hi")})


class TestConfigValidation:
    def test_negative_retries_rejected(self):
        with pytest.raises(ValueError):
            BackendConfig(max_retries=-1)

    def test_zero_inflight_rejected(self):
        with pytest.raises(ValueError):
            BackendConfig(max_inflight=0)
