"""Local OpenAI-compatible serving of a tiny model.

Exposes `POST /v1/chat/completions` over plain HTTP. Requests carry the
usual chat payload; the completion is produced by greedy (temperature-0)
decoding, so serving the same model twice yields identical content for
identical prompts. One request is decoded at a time — the model is tiny
and the endpoint exists for smoke-scale evaluation, not throughput.
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import EndpointStartupError
from .model import TinyCausalLM, greedy_decode

COMPLETIONS_PATH = "/v1/chat/completions"


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str) -> None:
        self._send_json(status, {"error": {"message": message, "type": "invalid_request_error"}})

    def do_GET(self):  # noqa: N802 - stdlib naming
        self._error(404, f"no such route: GET {self.path}")

    def do_POST(self):  # noqa: N802 - stdlib naming
        if self.path.rstrip("/") != COMPLETIONS_PATH:
            self._error(404, f"no such route: POST {self.path}")
            return
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length)
        try:
            payload = json.loads(raw)
        except (ValueError, UnicodeDecodeError):
            self._error(400, "request body is not valid JSON")
            return
        messages = payload.get("messages") if isinstance(payload, dict) else None
        if not isinstance(messages, list) or not messages:
            self._error(400, "payload must contain a non-empty 'messages' list")
            return
        prompt = None
        for message in reversed(messages):
            if isinstance(message, dict) and message.get("role") == "user":
                prompt = message.get("content")
                break
        if not isinstance(prompt, str):
            self._error(400, "no user message with string content found")
            return
        server: _ModelHTTPServer = self.server  # type: ignore[assignment]
        with server.model_lock:
            server.request_count += 1
            request_id = server.request_count
            completion = greedy_decode(server.model, prompt)
        self._send_json(200, {
            "id": f"chatcmpl-{request_id}",
            "object": "chat.completion",
            "created": int(time.time()),
            "model": server.model_name,
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": completion},
                "finish_reason": "stop",
            }],
            "usage": {
                "prompt_tokens": len(prompt.encode("utf-8")),
                "completion_tokens": len(completion.encode("utf-8")),
                "total_tokens": len(prompt.encode("utf-8")) + len(completion.encode("utf-8")),
            },
        })


class _ModelHTTPServer(ThreadingHTTPServer):
    daemon_threads = True
    model: TinyCausalLM
    model_name: str
    model_lock: threading.Lock
    request_count: int


class AdapterServer:
    """Serve one model on a local port; usable as a context manager."""

    def __init__(self, model: TinyCausalLM, model_name: str,
                 host: str = "127.0.0.1", port: int = 0):
        self._model = model
        self._model_name = model_name
        self._host = host
        self._port = port
        self._server: _ModelHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        if self._server is None:
            raise EndpointStartupError("server is not running")
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "AdapterServer":
        try:
            server = _ModelHTTPServer((self._host, self._port), _Handler)
        except OSError as exc:
            raise EndpointStartupError(
                f"could not bind {self._host}:{self._port}: {exc}"
            ) from exc
        server.model = self._model
        server.model_name = self._model_name
        server.model_lock = threading.Lock()
        server.request_count = 0
        self._server = server
        self._thread = threading.Thread(target=server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def wait(self) -> None:
        """Block until the server is shut down (for foreground serving)."""
        if self._thread is not None:
            self._thread.join()

    def __enter__(self) -> "AdapterServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
