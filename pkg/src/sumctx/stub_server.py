"""Local HTTP stub for the remote summarizer and generator protocols.

``POST /summarize`` replies with the extractive summary of the posted turns
(or ``fixed_summary``); ``POST /generate`` echoes the request segment of the
posted context (or ``fixed_response``). The first ``fail_first`` requests get
a 500, which exercises client retries.
"""

from __future__ import annotations

import contextlib
import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .corpus import Speaker, Turn
from .summarize import summarize_extractive
from .tokenizer import DEFAULT_MARKERS, truncate_tokens


@dataclass
class StubState:
    fixed_summary: str | None = None
    fixed_response: str | None = None
    fail_first: int = 0
    fail_always: bool = False
    bad_schema: bool = False
    requests: list[tuple[str, dict]] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _echo_request(context: str) -> str:
    marker = DEFAULT_MARKERS.request + " "
    pos = context.rfind(marker)
    return context[pos + len(marker):] if pos >= 0 else context


def make_handler(state: StubState):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _reply(self, status: int, payload: dict):
            data = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            try:
                body = json.loads(self.rfile.read(length) or b"{}")
            except ValueError:
                return self._reply(400, {"error": "invalid JSON"})
            with state.lock:
                state.requests.append((self.path, body))
                failing = state.fail_always or len(state.requests) <= state.fail_first
            if failing:
                return self._reply(500, {"error": "stub failure"})
            if state.bad_schema:
                return self._reply(200, {"unexpected": True})
            max_tokens = int(body.get("max_tokens", 60))
            if self.path.rstrip("/").endswith("/summarize"):
                if state.fixed_summary is not None:
                    return self._reply(200, {"summary": state.fixed_summary})
                turns = [Turn(k, Speaker(t["speaker"]), t["text"])
                         for k, t in enumerate(body.get("turns", []), start=1)]
                return self._reply(200, {"summary": summarize_extractive(turns, max_tokens)})
            if self.path.rstrip("/").endswith("/generate"):
                text = state.fixed_response
                if text is None:
                    text = truncate_tokens(_echo_request(body.get("context", "")), max_tokens)
                return self._reply(200, {"response": text})
            return self._reply(404, {"error": f"no route {self.path}"})

    return Handler


@contextlib.contextmanager
def running_stub(host: str = "127.0.0.1", port: int = 0, **state_kwargs):
    """Start the stub in a background thread; yields ``(base_url, state)``."""
    state = StubState(**state_kwargs)
    server = ThreadingHTTPServer((host, port), make_handler(state))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://{host}:{server.server_address[1]}", state
    finally:
        server.shutdown()
        server.server_close()


def serve(host: str = "127.0.0.1", port: int = 8765, **state_kwargs) -> None:
    server = ThreadingHTTPServer((host, port), make_handler(StubState(**state_kwargs)))
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
