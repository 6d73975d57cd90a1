"""Privacy-enforcing HTTP chat gateway with pluggable generation backends."""

from .backends import (
    MockBackend,
    RemoteBackend,
    UpstreamProtocolError,
    UpstreamUnavailable,
    backend_generate,
    build_backend,
)
from .config import (
    BackendConfig,
    GatewayConfig,
    GatewayConfigError,
    MockBackendConfig,
    RemoteBackendConfig,
    load_gateway_config,
)
from .prompt import (
    ChatRequest,
    ChatResponse,
    PromptTooLong,
    ValidationError,
    parse_chat_request,
    postprocess_reply,
    preprocess_prompt,
)
from .safety import CRISIS_FOOTER, DISCLOSURE, SAFE_REFUSAL, SafetyVerdict, safety_check
from .server import GatewayApp, MetricsTracker, ServerThread, make_server, serve_forever

__all__ = [
    "BackendConfig",
    "ChatRequest",
    "ChatResponse",
    "CRISIS_FOOTER",
    "DISCLOSURE",
    "GatewayApp",
    "GatewayConfig",
    "GatewayConfigError",
    "MetricsTracker",
    "MockBackend",
    "MockBackendConfig",
    "PromptTooLong",
    "RemoteBackend",
    "RemoteBackendConfig",
    "SAFE_REFUSAL",
    "SafetyVerdict",
    "ServerThread",
    "UpstreamProtocolError",
    "UpstreamUnavailable",
    "ValidationError",
    "backend_generate",
    "build_backend",
    "load_gateway_config",
    "make_server",
    "parse_chat_request",
    "postprocess_reply",
    "preprocess_prompt",
    "safety_check",
    "serve_forever",
]
