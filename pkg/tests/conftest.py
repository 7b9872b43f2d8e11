from __future__ import annotations

import json
import threading
import urllib.error
import urllib.request
from pathlib import Path

import numpy as np
import pytest

from entrorec.dataset import PageViewMatrix

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def make_matrix(rows, users=None, pages=None) -> PageViewMatrix:
    cells = np.asarray(rows, dtype=np.uint8)
    n_users, n_pages = cells.shape
    users = users or [f"u{i}" for i in range(n_users)]
    pages = pages or [f"/p{j}.html" for j in range(n_pages)]
    return PageViewMatrix(tuple(users), tuple(pages), cells)


class LiveServer:
    """A RecommendationServer running on an ephemeral port in a daemon thread."""

    def __init__(self, server):
        self.server = server
        self.base = f"http://127.0.0.1:{server.server_port}"
        self.thread = threading.Thread(target=server.serve_forever, daemon=True)
        self.thread.start()

    def request(self, method, path, body=None, raw: bytes | None = None):
        data = raw if raw is not None else (None if body is None else json.dumps(body).encode())
        req = urllib.request.Request(self.base + path, data=data, method=method)
        req.add_header("Content-Type", "application/json")
        try:
            with urllib.request.urlopen(req, timeout=10) as resp:
                return resp.status, json.loads(resp.read())
        except urllib.error.HTTPError as exc:
            return exc.code, json.loads(exc.read())

    def close(self):
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts as one line per criterion."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: (int(k.split(".")[0]), k)):
        ok, title, detail = RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'} - {title}: {detail}")
