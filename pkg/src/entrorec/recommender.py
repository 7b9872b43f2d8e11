"""Offline recommendation generation, the knowledge base and online lookup."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import PageViewMatrix, level_sizes, split_levels
from .errors import DataError, FormatError
from .similarity import (
    SimilarityConfig,
    TrustRecord,
    as_fraction,
    check_beta,
    sle_records,
    sle_table,
    trust_table,
)

log = logging.getLogger(__name__)

KB_HEADER = "ENTROPY-REC-KB v1"
DOI_DECIMALS = 6


@dataclass(frozen=True)
class Recommendation:
    page: str
    doi: float


@dataclass(frozen=True)
class KBEntry:
    pattern: tuple[int, ...]
    recs: tuple[tuple[int, float], ...]


@dataclass(eq=False)
class KnowledgeBase:
    """Click pattern and DOI-ranked recommendations per training user.

    ``config`` is an ordered str -> str mapping echoed into the file.
    """

    pages: tuple[str, ...]
    entries: dict[str, KBEntry]
    config: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.pages = tuple(self.pages)
        self._page_index = {p: i for i, p in enumerate(self.pages)}
        for user, entry in self.entries.items():
            rec_pages = {i for i, _ in entry.recs}
            if rec_pages & set(entry.pattern):
                raise ValueError(f"entry {user!r} recommends a page it already visited")

    def page_index(self, url: str) -> int | None:
        return self._page_index.get(url)

    def recommendations(self, user: str) -> list[Recommendation]:
        return [Recommendation(self.pages[i], d) for i, d in self.entries[user].recs]

    def __eq__(self, other):
        if not isinstance(other, KnowledgeBase):
            return NotImplemented
        return self.pages == other.pages and self.entries == other.entries and self.config == other.config

    # -- file format -------------------------------------------------------

    def to_text(self) -> str:
        lines = [KB_HEADER, "[CONFIG]"]
        lines += [f"{k}\t{v}" for k, v in self.config.items()]
        lines.append("[PAGES]")
        lines += [f"{i}\t{p}" for i, p in enumerate(self.pages)]
        lines.append("[ENTRIES]")
        for user, entry in self.entries.items():
            lines.append(f"PATTERN\t{user}\t" + ",".join(str(i) for i in entry.pattern))
            lines.append(f"RECS\t{user}\t" + ",".join(f"{i}:{d:.{DOI_DECIMALS}f}" for i, d in entry.recs))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> KnowledgeBase:
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines or lines[0] != KB_HEADER:
            got = lines[0] if lines else ""
            raise FormatError(f"expected header {KB_HEADER!r}, got {got!r}")
        section = None
        config: dict[str, str] = {}
        pages: list[str] = []
        entries: dict[str, KBEntry] = {}
        pending: tuple[str, tuple[int, ...]] | None = None
        for lineno, line in enumerate(lines[1:], start=2):
            if line in ("[CONFIG]", "[PAGES]", "[ENTRIES]"):
                section = line
                continue
            fields = line.split("\t")
            try:
                if section == "[CONFIG]" and len(fields) == 2:
                    config[fields[0]] = fields[1]
                elif section == "[PAGES]" and len(fields) == 2:
                    if int(fields[0]) != len(pages):
                        raise ValueError("page indices must be 0..P-1 in order")
                    pages.append(fields[1])
                elif section == "[ENTRIES]" and len(fields) == 3 and fields[0] == "PATTERN" and pending is None:
                    pending = (fields[1], _parse_ints(fields[2], len(pages)))
                elif section == "[ENTRIES]" and len(fields) == 3 and fields[0] == "RECS" and pending is not None:
                    if fields[1] != pending[0]:
                        raise ValueError("RECS user does not match preceding PATTERN")
                    if pending[0] in entries:
                        raise ValueError(f"duplicate user {pending[0]!r}")
                    entries[pending[0]] = KBEntry(pending[1], _parse_recs(fields[2], len(pages)))
                    pending = None
                else:
                    raise ValueError("unexpected line")
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from None
        if pending is not None:
            raise FormatError(f"entry {pending[0]!r} has no RECS line")
        try:
            return cls(tuple(pages), entries, config)
        except ValueError as exc:
            raise FormatError(str(exc)) from None

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def read(cls, path) -> KnowledgeBase:
        with open(path, encoding="utf-8", newline="") as fh:
            return cls.from_text(fh.read())


def _parse_ints(text: str, n_pages: int) -> tuple[int, ...]:
    if not text:
        return ()
    values = tuple(int(v) for v in text.split(","))
    if any(not 0 <= v < n_pages for v in values) or list(values) != sorted(set(values)):
        raise ValueError("pattern indices must be ascending, unique and in range")
    return values


def _parse_recs(text: str, n_pages: int) -> tuple[tuple[int, float], ...]:
    if not text:
        return ()
    recs = []
    for item in text.split(","):
        idx, doi = item.split(":")
        i, d = int(idx), float(doi)
        if not 0 <= i < n_pages or not math.isfinite(d):
            raise ValueError(f"bad recommendation {item!r}")
        recs.append((i, d))
    return tuple(recs)


# -- offline generation -------------------------------------------------------


def candidate_pages(target: str, trust: Sequence[TrustRecord], pv: PageViewMatrix) -> dict[int, list[TrustRecord]]:
    """Pages the target has not viewed but some trustworthy recommender has.

    Keys are column indices of ``pv`` in ascending order.
    """
    row_t = pv.row(target)
    out: dict[int, list[TrustRecord]] = {}
    for rec in trust:
        if rec.target != target:
            raise ValueError(f"trust record for {rec.target!r} passed for target {target!r}")
        row_x = pv.row(rec.recommender)
        for p in np.flatnonzero((row_x == 1) & (row_t == 0)):
            out.setdefault(int(p), []).append(rec)
    return dict(sorted(out.items()))


def doi_score(entropies: Sequence[float], viewers: int) -> float:
    """``(1 - E_c / T_c) * F_c`` from the supporters' entropy gaps and the viewer count."""
    if not entropies:
        raise ValueError("degree of importance needs at least one supporter")
    return (1 - math.fsum(entropies) / len(entropies)) * viewers


def degree_of_importance(page, supporters: Sequence[TrustRecord], pv: PageViewMatrix) -> float:
    """DOI of ``page`` (URL or column index); viewers are counted over all rows of ``pv``."""
    col = page if isinstance(page, (int, np.integer)) else pv.pages.index(page)
    return doi_score([r.actual_entropy for r in supporters], int(pv.cells[:, col].sum()))


def _ranked(cands: dict[int, list[TrustRecord]], col_sums) -> list[tuple[int, float]]:
    scored = [(p, doi_score([r.actual_entropy for r in s], int(col_sums[p]))) for p, s in cands.items()]
    scored.sort(key=lambda x: (-x[1], x[0]))
    return scored


def build_recommendations(target: str, trust: Sequence[TrustRecord], pv: PageViewMatrix) -> list[Recommendation]:
    ranked = _ranked(candidate_pages(target, trust, pv), pv.column_sums())
    return [Recommendation(pv.pages[p], d) for p, d in ranked]


def _build_time(build_time=None) -> str:
    if build_time is None:
        build_time = int(os.environ.get("SOURCE_DATE_EPOCH", "0"))
    return datetime.fromtimestamp(build_time, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _format_beta(beta) -> str:
    frac = as_fraction(beta)
    return repr(float(frac)) if isinstance(beta, float) else str(beta)


def _chunks(seq, jobs):
    size = max(1, math.ceil(len(seq) / jobs))
    return [seq[i : i + size] for i in range(0, len(seq), size)]


def compute_trust(pv: PageViewMatrix, config: SimilarityConfig, jobs: int = 1):
    """``{user: (valuable, trust)}`` for every training user.

    With ``jobs > 1`` targets are processed in parallel chunks; the merged
    result is identical to the sequential one.
    """
    level1, level2 = split_levels(pv)
    users = list(pv.users)
    if jobs <= 1 or len(users) < 2:
        return trust_table(level1, level2, config.beta)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        parts = pool.map(lambda chunk: trust_table(level1, level2, config.beta, chunk), _chunks(users, jobs))
        merged = {}
        for part in parts:
            merged.update(part)
    return {u: merged[u] for u in users}


def knowledge_base_from_trust(
    pv: PageViewMatrix, trust: Mapping[str, Sequence[TrustRecord]], config: dict[str, str]
) -> KnowledgeBase:
    col_sums = pv.column_sums()
    entries = {}
    for user in pv.users:
        pattern = tuple(int(p) for p in np.flatnonzero(pv.row(user)))
        ranked = _ranked(candidate_pages(user, trust.get(user, ()), pv), col_sums)
        # store at file precision so a KB equals its own re-read copy
        stored = sorted(((p, round(d, DOI_DECIMALS)) for p, d in ranked), key=lambda x: (-x[1], x[0]))
        entries[user] = KBEntry(pattern, tuple(stored))
    return KnowledgeBase(pv.pages, entries, config)


def build_knowledge_base(
    pv: PageViewMatrix, config: SimilarityConfig = SimilarityConfig(), jobs: int = 1, build_time=None, table=None
) -> KnowledgeBase:
    """Run level split, trust selection and DOI ranking for every training user.

    ``build_time`` (epoch seconds) defaults to ``SOURCE_DATE_EPOCH`` or 0 so
    that rebuilding the same matrix yields the same file. ``table`` reuses a
    result of :func:`compute_trust` for the same matrix and config.
    """
    if table is None:
        table = compute_trust(pv, config, jobs)
    n1, n2 = level_sizes(pv.shape[1])
    echo = {
        "method": "proposed",
        "beta": _format_beta(config.beta),
        "level1_pages": str(n1),
        "level2_pages": str(n2),
        "built": _build_time(build_time),
    }
    return knowledge_base_from_trust(pv, {u: t for u, (_, t) in table.items()}, echo)


def build_sle_knowledge_base(pv: PageViewMatrix, config: SimilarityConfig = SimilarityConfig(), build_time=None) -> KnowledgeBase:
    """Same DOI machinery fed by the single-level baseline selection."""
    records = sle_records(sle_table(pv, config.beta))
    echo = {
        "method": "sle",
        "beta": _format_beta(config.beta),
        "level1_pages": str(pv.shape[1]),
        "level2_pages": "0",
        "built": _build_time(build_time),
    }
    return knowledge_base_from_trust(pv, records, echo)


# -- online lookup ---------------------------------------------------------------


def resolve_pages(kb: KnowledgeBase, visited: Iterable[str]) -> tuple[set[int], list[str]]:
    """Map URLs to KB page indices; returns ``(indices, unknown urls)``."""
    known, unknown = set(), []
    for url in visited:
        idx = kb.page_index(url)
        if idx is None:
            unknown.append(url)
        else:
            known.add(idx)
    return known, unknown


def match_indices(kb: KnowledgeBase, visited: set[int], beta) -> list[str]:
    frac = check_beta(beta)
    scored = []
    for order, (user, entry) in enumerate(kb.entries.items()):
        overlap = len(visited.intersection(entry.pattern))
        if overlap * frac.denominator >= frac.numerator * len(visited):
            scored.append((-overlap, user, order))
    scored.sort(key=lambda x: (x[0], x[1]))
    return [user for _, user, _ in scored]


def match_online(kb: KnowledgeBase, visited: Iterable[str], beta=0.5) -> list[str]:
    """Training users whose click pattern covers at least ``beta`` of the visited pages.

    Sorted by overlap (descending), then user id.
    """
    known, unknown = resolve_pages(kb, visited)
    if unknown:
        log.warning("%d unknown URL(s) ignored", len(unknown))
    if not known:
        raise DataError("no recognizable pages")
    return match_indices(kb, known, beta)


def aggregate(kb: KnowledgeBase, users: Iterable[str], exclude: set[int], n: int | None = None) -> list[tuple[int, float]]:
    """Merge users' stored lists: best DOI per page, excluded pages removed."""
    best: dict[int, float] = {}
    for user in users:
        for idx, doi in kb.entries[user].recs:
            if idx not in exclude and (idx not in best or doi > best[idx]):
                best[idx] = doi
    ranked = sorted(best.items(), key=lambda x: (-x[1], x[0]))
    return ranked if n is None else ranked[:n]


def top_n(kb: KnowledgeBase, visited: Iterable[str], n: int = 10, beta=0.5) -> list[Recommendation]:
    if n < 1:
        raise ValueError("n must be >= 1")
    known, unknown = resolve_pages(kb, visited)
    if not known:
        raise DataError("no recognizable pages")
    users = match_indices(kb, known, beta)
    return [Recommendation(kb.pages[i], d) for i, d in aggregate(kb, users, known, n)]
