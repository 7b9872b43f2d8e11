"""Access-log parsing, page-request filtering and sessionization."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from itertools import groupby
from pathlib import Path
from typing import Iterable, Iterator, Sequence
from urllib.parse import urlsplit

from .errors import LogParseError

log = logging.getLogger(__name__)

_LINE_RE = re.compile(
    r'^(?P<host>\S+) (?P<ident>\S+) (?P<user>\S+) '
    r'\[(?P<time>[^\]]+)\] '
    r'"(?P<request>[^"]*)" '
    r'(?P<status>\S+) (?P<size>\S+)'
    r'(?: "(?P<referrer>[^"]*)" "(?P<agent>[^"]*)")?\s*$'
)
_SLASHES_RE = re.compile(r"/{2,}")

DEFAULT_EXCLUDED_EXTENSIONS = frozenset(
    {".css", ".js", ".png", ".jpg", ".jpeg", ".gif", ".ico", ".svg", ".woff", ".woff2", ".pdf"}
)
DEFAULT_TIMEOUT = 30 * 60.0
DEFAULT_MAX_DURATION = 2 * 60 * 60.0


@dataclass(frozen=True)
class LogRecord:
    visitor_key: str
    timestamp: float
    url: str
    method: str
    status: int
    user_agent: str = ""


@dataclass(frozen=True)
class Session:
    session_id: str
    visitor_key: str
    requests: tuple[tuple[float, str], ...]

    @property
    def start(self) -> float:
        return self.requests[0][0]

    @property
    def end(self) -> float:
        return self.requests[-1][0]

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def urls(self) -> list[str]:
        return [url for _, url in self.requests]


def normalize_url(target: str) -> str:
    """Host-relative, lowercase path without query, fragment or doubled slashes."""
    if "://" in target:
        path = urlsplit(target).path
    else:
        path = target.split("#", 1)[0].split("?", 1)[0]
    path = _SLASHES_RE.sub("/", path.strip().lower())
    if not path.startswith("/"):
        path = "/" + path
    return path


def _parse_time(text: str, lineno):
    try:
        return datetime.strptime(text, "%d/%b/%Y:%H:%M:%S %z").timestamp()
    except ValueError:
        raise LogParseError(f"malformed timestamp {text!r}", lineno) from None


def parse_log_line(line: str, fmt: str | None = None, lineno: int | None = None) -> LogRecord:
    """Parse one Common or Combined Log Format line.

    ``fmt`` is ``"common"``, ``"combined"`` or ``None`` to detect from the
    presence of the referrer/user-agent fields.
    """
    if fmt not in (None, "common", "combined"):
        raise ValueError(f"unknown log format {fmt!r}")
    m = _LINE_RE.match(line.rstrip("\r\n"))
    if m is None:
        raise LogParseError("too few fields or unrecognized layout", lineno)
    has_agent = m.group("agent") is not None
    if fmt == "combined" and not has_agent:
        raise LogParseError("combined format requires referrer and user-agent fields", lineno)
    if fmt is None:
        fmt = "combined" if has_agent else "common"

    timestamp = _parse_time(m.group("time"), lineno)
    parts = m.group("request").split()
    if len(parts) not in (2, 3) or not parts[1]:
        raise LogParseError(f"unparseable request {m.group('request')!r}", lineno)
    try:
        status = int(m.group("status"))
    except ValueError:
        raise LogParseError(f"bad status {m.group('status')!r}", lineno) from None

    host = m.group("host")
    agent = ""
    if fmt == "combined":
        agent = m.group("agent")
        if agent == "-":
            agent = ""
    visitor_key = f"{host}|{agent}" if agent else host
    return LogRecord(
        visitor_key=visitor_key,
        timestamp=timestamp,
        url=normalize_url(parts[1]),
        method=parts[0].upper(),
        status=status,
        user_agent=agent,
    )


def format_log_record(record: LogRecord) -> str:
    """Render a record back as a Combined Log Format line (UTC)."""
    host = record.visitor_key.split("|", 1)[0]
    when = datetime.fromtimestamp(record.timestamp, tz=timezone.utc)
    stamp = when.strftime("%d/%b/%Y:%H:%M:%S +0000")
    agent = record.user_agent or "-"
    return f'{host} - - [{stamp}] "{record.method} {record.url} HTTP/1.1" {record.status} 0 "-" "{agent}"'


def iter_log_lines(path) -> Iterator[tuple[int, str]]:
    """Yield ``(lineno, text)``; each line decodes as UTF-8, falling back to Latin-1."""
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.rstrip(b"\r\n")
            if not raw.strip():
                continue
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError:
                text = raw.decode("latin-1")
            yield lineno, text


def read_log(path: str | Path, fmt: str | None = None, strict: bool = False) -> tuple[list[LogRecord], int]:
    """Parse a whole log file; returns the records and the number of skipped lines."""
    records = []
    skipped = 0
    for lineno, text in iter_log_lines(path):
        try:
            records.append(parse_log_line(text, fmt, lineno))
        except LogParseError as exc:
            if strict:
                raise
            skipped += 1
            log.warning("skipping %s", exc)
    if skipped:
        log.warning("%d malformed line(s) skipped in %s", skipped, path)
    return records, skipped


def _extension(url: str) -> str:
    last = url.rsplit("/", 1)[-1]
    return "." + last.rsplit(".", 1)[-1].lower() if "." in last else ""


def filter_page_requests(
    records: Iterable[LogRecord], excluded_extensions: Iterable[str] = DEFAULT_EXCLUDED_EXTENSIONS
) -> list[LogRecord]:
    """Keep successful GET requests for pages, dropping static assets."""
    excluded = {e.lower() for e in excluded_extensions}
    return [
        r
        for r in records
        if r.method == "GET" and 200 <= r.status <= 399 and _extension(r.url) not in excluded
    ]


def sessionize(
    records: Iterable[LogRecord],
    timeout: float = DEFAULT_TIMEOUT,
    max_duration: float = DEFAULT_MAX_DURATION,
) -> list[Session]:
    """Group requests into per-visitor sessions.

    A gap strictly longer than ``timeout`` seconds starts a new session.
    Sessions whose first-to-last span exceeds ``max_duration`` are dropped.
    Output is sorted by ``(visitor_key, start)``.
    """
    ordered = sorted(records, key=lambda r: (r.visitor_key, r.timestamp, r.url))
    sessions = []
    for visitor, group in groupby(ordered, key=lambda r: r.visitor_key):
        chunks: list[list[tuple[float, str]]] = []
        prev = None
        for r in group:
            if prev is None or r.timestamp - prev > timeout:
                chunks.append([])
            chunks[-1].append((r.timestamp, r.url))
            prev = r.timestamp
        for ordinal, chunk in enumerate(chunks, start=1):
            if chunk[-1][0] - chunk[0][0] > max_duration:
                continue
            sessions.append(Session(f"{visitor}#{ordinal}", visitor, tuple(chunk)))
    return sessions


def write_sessions_tsv(sessions: Sequence[Session], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sessions:
            for ts, url in s.requests:
                fh.write(f"{s.session_id}\t{s.visitor_key}\t{ts:.0f}\t{url}\n")
