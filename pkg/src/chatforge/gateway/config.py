"""Gateway configuration and lexicon loading.

Everything is read once at startup; request handling only sees immutable
config objects. The auth token for a remote backend is read from the
environment by name and never lives in a config file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional


class GatewayConfigError(Exception):
    """Bad gateway configuration; the service refuses to start."""


_LOOPBACK_HOSTS = {"127.0.0.1", "localhost", "::1", ""}


def default_data_path(name: str) -> Path:
    return Path(resources.files("chatforge").joinpath("data", name))


DEFAULT_CANNED_REPLIES: list[tuple[str, str]] = [
    ("hello", "Hello! I'm glad you reached out. How are you feeling today?"),
    ("hi", "Hi there! I'm here to listen. What's on your mind?"),
    (
        "anxious",
        "I'm sorry you're feeling anxious; that can be exhausting. A slow breathing "
        "exercise sometimes helps: breathe in for four counts, hold for four, out for "
        "four. Would you like to talk through what's been driving it?",
    ),
    (
        "overwhelmed",
        "It sounds like a lot is landing on you at once. Breaking things into one "
        "small next step can make the load feel lighter. What feels heaviest right now?",
    ),
    (
        "resources",
        "A good starting point is your primary care provider or a local community "
        "mental health clinic; many offer sliding-scale fees. Psychology Today's "
        "directory and the APA locator can help you find a licensed therapist.",
    ),
    (
        "meditation",
        "Meditation and prayer are meaningful supports for many people, and they can "
        "sit alongside professional care rather than replacing it. What does your "
        "practice look like at the moment?",
    ),
]


@dataclass
class MockBackendConfig:
    mode: str = "canned"  # "echo" | "canned"
    #: ordered (keyword, reply); first keyword found in the message wins
    canned: list[tuple[str, str]] = field(default_factory=lambda: list(DEFAULT_CANNED_REPLIES))
    fallback: str = (
        "Thank you for sharing that with me. I'm here with you. "
        "Can you tell me more about how this has been affecting you?"
    )

    def __post_init__(self):
        if self.mode not in ("echo", "canned"):
            raise GatewayConfigError(f"unknown mock mode {self.mode!r}")


@dataclass
class RemoteBackendConfig:
    base_url: str = ""
    model: str = ""
    auth_token_env: str = "CHATFORGE_UPSTREAM_TOKEN"
    timeout_ms: int = 10_000
    max_retries: int = 2

    def __post_init__(self):
        if not self.base_url or not self.model or not self.auth_token_env:
            raise GatewayConfigError("remote backend requires base_url, model and auth_token_env")
        if self.timeout_ms <= 0 or self.max_retries < 0:
            raise GatewayConfigError("remote backend timeout/retries out of range")


@dataclass
class BackendConfig:
    kind: str = "mock"  # "mock" | "remote"
    mock: MockBackendConfig = field(default_factory=MockBackendConfig)
    remote: Optional[RemoteBackendConfig] = None

    def __post_init__(self):
        if self.kind not in ("mock", "remote"):
            raise GatewayConfigError(f"unknown backend kind {self.kind!r}")
        if self.kind == "remote" and self.remote is None:
            raise GatewayConfigError("remote backend selected but not configured")


@dataclass
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    insecure_override: bool = False
    backend: BackendConfig = field(default_factory=BackendConfig)
    blocklist_path: str | Path = field(default_factory=lambda: default_data_path("blocklist.txt"))
    trigger_lexicon_path: str | Path = field(
        default_factory=lambda: default_data_path("trigger_lexicon.txt")
    )
    prompt_cap: int = 4000  # characters of rendered prompt
    max_concurrent_upstream: int = 8
    static_dir: Optional[str | Path] = None

    def __post_init__(self):
        if self.prompt_cap < 1 or self.max_concurrent_upstream < 1:
            raise GatewayConfigError("limits out of range")
        if self.host not in _LOOPBACK_HOSTS and not self.insecure_override:
            raise GatewayConfigError(
                f"refusing to bind non-loopback address {self.host!r} without "
                "server.insecure_override (TLS termination belongs in front of this service)"
            )


def load_lexicon_terms(path: str | Path) -> frozenset[str]:
    """Blocklist format: one lowercase term per line."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise GatewayConfigError(f"cannot read lexicon {path}: {exc}") from exc
    return frozenset(t.strip().lower() for t in lines if t.strip())


def load_trigger_lexicon(path: str | Path) -> dict[str, str]:
    """Trigger format: one ``term:category`` per line (bare terms -> "sensitive")."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise GatewayConfigError(f"cannot read trigger lexicon {path}: {exc}") from exc
    mapping: dict[str, str] = {}
    for line in lines:
        line = line.strip().lower()
        if not line:
            continue
        term, _, category = line.partition(":")
        mapping[term.strip()] = category.strip() or "sensitive"
    return mapping


def _parse_backend(section: dict) -> BackendConfig:
    kind = section.get("kind", "mock")
    mock_raw = section.get("mock", {})
    canned_raw = mock_raw.get("canned")
    mock = MockBackendConfig(
        mode=mock_raw.get("mode", "canned"),
        canned=(
            list(DEFAULT_CANNED_REPLIES)
            if canned_raw is None
            else [tuple(entry) for entry in canned_raw]
        ),
        fallback=mock_raw.get("fallback", MockBackendConfig().fallback),
    )
    remote = None
    if "remote" in section:
        raw = section["remote"]
        remote = RemoteBackendConfig(
            base_url=raw.get("base_url", ""),
            model=raw.get("model", ""),
            auth_token_env=raw.get("auth_token_env", "CHATFORGE_UPSTREAM_TOKEN"),
            timeout_ms=raw.get("timeout_ms", 10_000),
            max_retries=raw.get("max_retries", 2),
        )
    return BackendConfig(kind=kind, mock=mock, remote=remote)


def load_gateway_config(path: str | Path) -> GatewayConfig:
    """Single JSON config file with server/backend/safety/limits sections."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise GatewayConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise GatewayConfigError(f"config {path} is not valid JSON: {exc}") from exc

    server = raw.get("server", {})
    safety = raw.get("safety", {})
    limits = raw.get("limits", {})
    bind = server.get("bind", "127.0.0.1:8080")
    host, _, port = bind.rpartition(":")
    if not host:
        host, port = bind, "8080"
    try:
        port_no = int(port)
    except ValueError as exc:
        raise GatewayConfigError(f"bad bind address {bind!r}") from exc
    return GatewayConfig(
        host=host,
        port=port_no,
        insecure_override=bool(server.get("insecure_override", False)),
        backend=_parse_backend(raw.get("backend", {})),
        blocklist_path=safety.get("blocklist_path", default_data_path("blocklist.txt")),
        trigger_lexicon_path=safety.get(
            "trigger_lexicon_path", default_data_path("trigger_lexicon.txt")
        ),
        prompt_cap=limits.get("prompt_cap", 4000),
        max_concurrent_upstream=limits.get("max_concurrent_upstream", 8),
        static_dir=raw.get("static_dir"),
    )
