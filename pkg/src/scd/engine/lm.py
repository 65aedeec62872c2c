"""Language-model providers: the interface, an HTTP client and a mock server.

Wire protocol (``POST /logits``)::

    request   {"prefix": [int, ...], "context_id": str, "context": {...}}
    response  {"logits": [float, ...]}      # length == vocab size

``context`` carries the full prompt context so a stateless server can
condition on it; servers may ignore it and key on ``context_id`` alone.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
import requests

from ..context import PromptContext

log = logging.getLogger(__name__)


class LMUnavailable(Exception):
    pass


class ProtocolError(Exception):
    pass


@runtime_checkable
class LMProvider(Protocol):
    def next_logits(self, prefix: Sequence[int], context: PromptContext) -> np.ndarray:
        """Next-token scores over the whole vocabulary (log-probabilities or logits)."""
        ...


class RemoteLM:
    """LMProvider backed by a ``POST /logits`` endpoint.

    Without an explicit ``session`` each thread gets its own
    ``requests.Session``, so one client can serve concurrent decodes.
    """

    def __init__(self, endpoint: str, vocab_size: int, timeout: float = 30.0, session=None):
        endpoint = endpoint.rstrip("/")
        self.url = endpoint if endpoint.endswith("/logits") else endpoint + "/logits"
        self.vocab_size = vocab_size
        self.timeout = timeout
        self._shared = session
        self._local = threading.local()

    @property
    def _session(self):
        if self._shared is not None:
            return self._shared
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def next_logits(self, prefix: Sequence[int], context: PromptContext) -> np.ndarray:
        payload = {
            "prefix": [int(t) for t in prefix],
            "context_id": context.context_id,
            "context": context.to_dict(),
        }
        try:
            resp = self._session.post(self.url, json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            raise LMUnavailable(f"{self.url}: {exc}") from exc
        if resp.status_code != 200:
            raise LMUnavailable(f"{self.url}: HTTP {resp.status_code}")
        try:
            logits = resp.json()["logits"]
            arr = np.asarray(logits, dtype=np.float64)
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed reply from {self.url}: {exc}") from exc
        if arr.ndim != 1 or arr.shape[0] != self.vocab_size:
            raise ProtocolError(
                f"expected {self.vocab_size} logits, got shape {tuple(arr.shape)}"
            )
        return arr


def remote_lm(endpoint: str, vocab_size: int, **kwargs) -> RemoteLM:
    return RemoteLM(endpoint, vocab_size, **kwargs)


def _handler_for(lm: LMProvider):
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):  # noqa: N802
            if self.path.rstrip("/") != "/logits":
                self._reply(404, {"error": "not found"})
                return
            try:
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                prefix = [int(t) for t in body["prefix"]]
                context = PromptContext.from_dict(body.get("context") or {})
            except (ValueError, KeyError, TypeError) as exc:
                self._reply(400, {"error": str(exc)})
                return
            logits = lm.next_logits(prefix, context)
            self._reply(200, {"logits": [float(x) for x in logits]})

        def _reply(self, code: int, obj: dict) -> None:
            data = json.dumps(obj).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, fmt, *args):
            log.debug("%s - %s", self.address_string(), fmt % args)

    return Handler


def make_server(lm: LMProvider, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """HTTP server exposing ``lm`` on ``POST /logits``; port 0 picks a free port."""
    server = ThreadingHTTPServer((host, port), _handler_for(lm))
    server.daemon_threads = True
    return server


def serve_in_thread(lm: LMProvider, host: str = "127.0.0.1", port: int = 0):
    """Start a server on a daemon thread; returns ``(server, base_url)``."""
    server = make_server(lm, host, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    h, p = server.server_address[:2]
    return server, f"http://{h}:{p}"
