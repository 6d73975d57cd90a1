"""HTTP chat gateway.

Request path: validate -> inbound safety check (a block short-circuits the
backend entirely) -> prompt render -> backend -> outbound safety check ->
post-process -> respond. The process keeps no durable record of any message
or reply: handlers touch memory only, and the access log is disabled.

Endpoints:
    POST /v1/chat     ChatRequest JSON in, ChatResponse JSON out
    GET  /v1/health   {"status": "ok"}
    GET  /v1/metrics  request/error counters and latency quantiles only
"""

from __future__ import annotations

import json
import math
import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .backends import UpstreamProtocolError, UpstreamUnavailable, build_backend
from .config import GatewayConfig, load_lexicon_terms, load_trigger_lexicon
from .prompt import (
    ChatRequest,
    ChatResponse,
    PromptTooLong,
    ValidationError,
    parse_chat_request,
    postprocess_reply,
    preprocess_prompt,
)
from .safety import safety_check


class MetricsTracker:
    """Atomic counters plus a latency reservoir; holds no message content."""

    def __init__(self):
        self._lock = threading.Lock()
        self._requests = 0
        self._errors: dict[str, int] = {}
        self._latencies_ms: list[int] = []

    def record(self, status: int, latency_ms: Optional[int] = None) -> None:
        with self._lock:
            self._requests += 1
            if status >= 400:
                key = str(status)
                self._errors[key] = self._errors.get(key, 0) + 1
            if latency_ms is not None:
                self._latencies_ms.append(latency_ms)

    @staticmethod
    def _quantile(sorted_values: list[int], q: float) -> int:
        if not sorted_values:
            return 0
        rank = max(math.ceil(q * len(sorted_values)), 1)
        return sorted_values[rank - 1]

    def snapshot(self) -> dict:
        with self._lock:
            latencies = sorted(self._latencies_ms)
            return {
                "requests": self._requests,
                "errors": dict(sorted(self._errors.items())),
                "latency_ms": {
                    "p50": self._quantile(latencies, 0.50),
                    "p90": self._quantile(latencies, 0.90),
                    "p99": self._quantile(latencies, 0.99),
                },
            }


class GatewayApp:
    """Everything a request handler needs, loaded once at startup."""

    def __init__(self, cfg: GatewayConfig, backend=None):
        self.cfg = cfg
        self.blocklist = load_lexicon_terms(cfg.blocklist_path)
        self.triggers = load_trigger_lexicon(cfg.trigger_lexicon_path)
        self.backend = backend if backend is not None else build_backend(
            cfg.backend, cfg.max_concurrent_upstream
        )
        self.metrics = MetricsTracker()
        self.static_dir = Path(cfg.static_dir) if cfg.static_dir else None

    def handle_chat(self, body: object) -> tuple[int, dict]:
        """Run one chat request; returns (status, response JSON object)."""
        started = time.perf_counter()

        def elapsed_ms() -> int:
            return math.ceil((time.perf_counter() - started) * 1000)

        try:
            request = parse_chat_request(body)
        except ValidationError as exc:
            return 400, {"error": "invalid_request", "detail": str(exc)}

        inbound = safety_check(request.message, self.blocklist, self.triggers)
        if inbound.blocked:
            reply, warnings = postprocess_reply("", [], blocked=True)
            response = ChatResponse(
                reply=reply, latency_ms=elapsed_ms(), warnings=warnings, blocked=True
            )
            return 200, response.to_dict()

        try:
            prompt = preprocess_prompt(request, cap=self.cfg.prompt_cap)
        except PromptTooLong as exc:
            return 413, {"error": "prompt_too_long", "detail": str(exc)}

        try:
            raw_reply = self.backend.generate(prompt, request.max_tokens)
        except UpstreamUnavailable as exc:
            return 503, {"error": "upstream_unavailable", "detail": str(exc)}
        except UpstreamProtocolError as exc:
            return 502, {"error": "upstream_protocol_error", "detail": str(exc)}

        outbound = safety_check(raw_reply, self.blocklist, self.triggers)
        # Warnings surface trigger categories from both directions; a crisis
        # tag raised by the user must reach the footer even if the reply is
        # itself neutral.
        warnings = sorted(set(inbound.tags) | set(outbound.tags))
        reply, warnings = postprocess_reply(
            raw_reply, warnings, blocked=outbound.blocked, max_tokens=request.max_tokens
        )
        response = ChatResponse(
            reply=reply,
            latency_ms=elapsed_ms(),
            warnings=warnings,
            blocked=outbound.blocked,
        )
        return 200, response.to_dict()


class _Handler(BaseHTTPRequestHandler):
    app: GatewayApp  # set on the subclass built in make_server

    server_version = "chatforge-gateway"
    protocol_version = "HTTP/1.1"

    # Privacy: no access log at all; nothing about a request is persisted.
    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):  # noqa: N802 - stdlib naming
        if self.path == "/v1/health":
            self._send_json(200, {"status": "ok"})
        elif self.path == "/v1/metrics":
            self._send_json(200, self.app.metrics.snapshot())
        elif self._try_static():
            pass
        else:
            self._send_json(404, {"error": "not_found"})

    def _try_static(self) -> bool:
        static_dir = self.app.static_dir
        if static_dir is None or not static_dir.is_dir():
            return False
        rel = self.path.split("?", 1)[0].lstrip("/")
        target = (static_dir / (rel or "index.html")).resolve()
        if not str(target).startswith(str(static_dir.resolve())) or not target.is_file():
            return False
        content_types = {
            ".html": "text/html; charset=utf-8",
            ".js": "text/javascript; charset=utf-8",
            ".css": "text/css; charset=utf-8",
            ".json": "application/json",
        }
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", content_types.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)
        return True

    def do_POST(self):  # noqa: N802 - stdlib naming
        if self.path != "/v1/chat":
            self._send_json(404, {"error": "not_found"})
            return
        content_type = self.headers.get("Content-Type", "")
        length = int(self.headers.get("Content-Length", 0) or 0)
        raw = self.rfile.read(length) if length else b""
        if "application/json" not in content_type:
            self.app.metrics.record(400)
            self._send_json(400, {"error": "invalid_request", "detail": "expected JSON body"})
            return
        try:
            body = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            self.app.metrics.record(400)
            self._send_json(400, {"error": "invalid_request", "detail": "body is not valid JSON"})
            return
        status, payload = self.app.handle_chat(body)
        self.app.metrics.record(status, payload.get("latency_ms") if status == 200 else None)
        self._send_json(status, payload)


class _GatewayServer(ThreadingHTTPServer):
    daemon_threads = True
    # the socketserver default backlog of 5 drops connections under burst load
    request_queue_size = 128


def make_server(app: GatewayApp, host: Optional[str] = None, port: Optional[int] = None) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"app": app})
    return _GatewayServer(
        (host if host is not None else app.cfg.host, port if port is not None else app.cfg.port),
        handler,
    )


def serve_forever(app: GatewayApp) -> None:
    server = make_server(app)
    host, port = server.server_address[:2]
    print(f"chatforge gateway listening on {host}:{port}", file=sys.stderr, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


class ServerThread:
    """Run the gateway on a background thread (tests, local tooling)."""

    def __init__(self, app: GatewayApp, host: str = "127.0.0.1", port: int = 0):
        self.server = make_server(app, host=host, port=port)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> "ServerThread":
        self.thread.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)
