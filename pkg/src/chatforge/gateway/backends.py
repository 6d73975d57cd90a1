"""Generation backends: deterministic mocks and the remote prediction API."""

from __future__ import annotations

import os
import re
import threading
import time
from typing import Optional

import requests

from .config import BackendConfig, GatewayConfigError, MockBackendConfig, RemoteBackendConfig

RETRY_BASE_DELAY_S = 0.25


class UpstreamUnavailable(Exception):
    """Timeout or connection failure after all retries; maps to HTTP 503."""


class UpstreamProtocolError(Exception):
    """Upstream answered with something other than the expected JSON; HTTP 502."""


_LAST_USER_RE = re.compile(r"^User: (.*)$", re.MULTILINE)


def last_user_message(prompt: str) -> str:
    """The newest user turn in a rendered prompt (mock backends key on it)."""
    matches = _LAST_USER_RE.findall(prompt)
    return matches[-1] if matches else prompt


class MockBackend:
    """Echo or canned-table generation; counts calls for test assertions."""

    def __init__(self, cfg: Optional[MockBackendConfig] = None):
        self.cfg = cfg or MockBackendConfig()
        self.calls = 0
        self._lock = threading.Lock()

    def generate(self, prompt: str, max_tokens: int) -> str:
        with self._lock:
            self.calls += 1
        message = last_user_message(prompt)
        if self.cfg.mode == "echo":
            return f"MOCK: {message}"
        lowered = set(re.findall(r"[\w'-]+", message.lower()))
        for keyword, reply in self.cfg.canned:
            if keyword.lower() in lowered:
                return reply
        return self.cfg.fallback


class RemoteBackend:
    """POSTs to ``{base_url}/predictions`` with bearer auth and retries.

    Retries 5xx and connection failures with exponential backoff (base
    250 ms, factor 2) up to max_retries; a bounded semaphore caps concurrent
    upstream calls, queueing the rest.
    """

    def __init__(
        self,
        cfg: RemoteBackendConfig,
        max_concurrent: int = 8,
        sleeper=time.sleep,
        session: Optional[requests.Session] = None,
    ):
        self.cfg = cfg
        token = os.environ.get(cfg.auth_token_env)
        if not token:
            raise GatewayConfigError(
                f"auth token environment variable {cfg.auth_token_env!r} is not set"
            )
        self._headers = {"Authorization": f"Bearer {token}"}
        self._semaphore = threading.BoundedSemaphore(max_concurrent)
        self._sleep = sleeper
        self._session = session or requests.Session()
        self.calls = 0
        self._lock = threading.Lock()

    def generate(self, prompt: str, max_tokens: int) -> str:
        with self._lock:
            self.calls += 1
        body = {
            "model": self.cfg.model,
            "input": {"prompt": prompt, "max_tokens": max_tokens},
        }
        url = self.cfg.base_url.rstrip("/") + "/predictions"
        attempts = self.cfg.max_retries + 1
        with self._semaphore:
            for attempt in range(attempts):
                try:
                    response = self._session.post(
                        url,
                        json=body,
                        headers=self._headers,
                        timeout=self.cfg.timeout_ms / 1000.0,
                    )
                except (requests.ConnectionError, requests.Timeout) as exc:
                    if attempt + 1 == attempts:
                        raise UpstreamUnavailable(str(exc)) from exc
                    self._sleep(RETRY_BASE_DELAY_S * (2**attempt))
                    continue
                if 500 <= response.status_code < 600:
                    if attempt + 1 == attempts:
                        raise UpstreamUnavailable(f"upstream returned {response.status_code}")
                    self._sleep(RETRY_BASE_DELAY_S * (2**attempt))
                    continue
                if response.status_code != 200:
                    raise UpstreamProtocolError(f"upstream returned {response.status_code}")
                try:
                    payload = response.json()
                except ValueError as exc:
                    raise UpstreamProtocolError("upstream response is not JSON") from exc
                output = payload.get("output") if isinstance(payload, dict) else None
                if not isinstance(output, str):
                    raise UpstreamProtocolError("upstream JSON lacks a string 'output'")
                return output
        raise AssertionError("unreachable")


def build_backend(cfg: BackendConfig, max_concurrent_upstream: int = 8):
    if cfg.kind == "mock":
        return MockBackend(cfg.mock)
    return RemoteBackend(cfg.remote, max_concurrent=max_concurrent_upstream)


def backend_generate(backend, prompt: str, max_tokens: int) -> str:
    return backend.generate(prompt, max_tokens)
