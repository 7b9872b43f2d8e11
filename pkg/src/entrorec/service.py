"""JSON-over-HTTP front end for a loaded knowledge base.

Endpoints: ``POST /recommend`` and ``GET /health``. The knowledge base is
read once and shared read-only by all request threads.
"""

from __future__ import annotations

import json
import logging
import signal
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import DataError
from .recommender import DOI_DECIMALS, KnowledgeBase, aggregate, match_indices, resolve_pages

log = logging.getLogger(__name__)

MAX_BODY = 1 << 20


class RequestError(Exception):
    def __init__(self, status, message):
        super().__init__(message)
        self.status = status


def recommend(kb: KnowledgeBase, payload, match_beta=0.5) -> dict:
    """Answer one recommendation request; raises RequestError for 400/422 cases."""
    if not isinstance(payload, dict):
        raise RequestError(400, "request body must be a JSON object")
    visited = payload.get("visited")
    n = payload.get("n", 10)
    if not isinstance(visited, list) or not visited or not all(isinstance(v, str) for v in visited):
        raise RequestError(400, "'visited' must be a non-empty list of URL strings")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise RequestError(400, "'n' must be an integer >= 1")
    known, unknown = resolve_pages(kb, visited)
    warnings = [f"unknown URL ignored: {u}" for u in dict.fromkeys(unknown)]
    if not known:
        raise RequestError(422, "no recognizable pages")
    users = match_indices(kb, known, match_beta)
    recs = aggregate(kb, users, known, n)
    return {
        "recommendations": [{"url": kb.pages[i], "doi": round(d, DOI_DECIMALS)} for i, d in recs],
        "matched_users": len(users),
        "warnings": warnings,
    }


def health(kb: KnowledgeBase) -> dict:
    return {"status": "ok", "kb_users": len(kb.entries), "kb_pages": len(kb.pages)}


class _Handler(BaseHTTPRequestHandler):
    server_version = "entrorec"
    protocol_version = "HTTP/1.1"

    def _send(self, status, body):
        data = json.dumps(body, separators=(",", ":")).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        if self.path == "/health":
            self._send(200, health(self.server.kb))
        else:
            self._send(404, {"error": f"no route for GET {self.path}"})

    def do_POST(self):
        if self.path != "/recommend":
            self._send(404, {"error": f"no route for POST {self.path}"})
            return
        try:
            try:
                length = int(self.headers.get("Content-Length", "0"))
            except ValueError:
                raise RequestError(400, "bad Content-Length header") from None
            if length < 0:
                raise RequestError(400, "bad Content-Length header")
            if length > MAX_BODY:
                raise RequestError(413, "request body too large")
            try:
                payload = json.loads(self.rfile.read(length) or b"null")
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise RequestError(400, f"malformed JSON: {exc}") from None
            self._send(200, recommend(self.server.kb, payload, self.server.match_beta))
        except RequestError as exc:
            self._send(exc.status, {"error": str(exc)})

    def log_message(self, fmt, *args):
        log.info("%s - %s", self.address_string(), fmt % args)


class RecommendationServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, kb: KnowledgeBase, host="127.0.0.1", port=8080, match_beta=0.5):
        self.kb = kb
        self.match_beta = match_beta
        super().__init__((host, port), _Handler)


def load_kb(path) -> KnowledgeBase:
    try:
        return KnowledgeBase.read(path)
    except OSError as exc:
        raise DataError(f"cannot read knowledge base {path}: {exc.strerror}") from None


def serve(kb_path, host="127.0.0.1", port=8080, match_beta=0.5) -> None:
    """Serve until SIGTERM/SIGINT."""
    kb = load_kb(kb_path)
    server = RecommendationServer(kb, host, port, match_beta)

    def stop(signum, frame):
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGTERM, stop)
    signal.signal(signal.SIGINT, stop)
    print(f"serving {len(kb.entries)} users / {len(kb.pages)} pages on http://{host}:{server.server_port}", flush=True)
    try:
        server.serve_forever()
    finally:
        server.server_close()
