"""Binary page-view matrix: construction, pruning, splits and file format."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, FormatError
from .logs import Session

MATRIX_HEADER = "PVMATRIX v1"


@dataclass(frozen=True, eq=False)
class PageViewMatrix:
    """Users x pages 0/1 matrix with row and column labels."""

    users: tuple[str, ...]
    pages: tuple[str, ...]
    cells: np.ndarray

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.uint8, copy=True)
        if cells.ndim != 2:
            cells = cells.reshape(len(self.users), len(self.pages))
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "pages", tuple(self.pages))
        if cells.shape != (len(self.users), len(self.pages)):
            raise ValueError(f"cells shape {cells.shape} does not match labels ({len(self.users)}, {len(self.pages)})")
        if len(set(self.users)) != len(self.users):
            raise ValueError("duplicate user labels")
        if len(set(self.pages)) != len(self.pages):
            raise ValueError("duplicate page labels")
        if cells.size and cells.max() > 1:
            raise ValueError("cells must be 0 or 1")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "_user_index", {u: i for i, u in enumerate(self.users)})

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def user_index(self, user: str) -> int:
        try:
            return self._user_index[user]
        except KeyError:
            raise KeyError(f"unknown user {user!r}") from None

    def row(self, user: str) -> np.ndarray:
        return self.cells[self.user_index(user)]

    def column_sums(self) -> np.ndarray:
        return self.cells.sum(axis=0, dtype=np.int64)

    def row_sums(self) -> np.ndarray:
        return self.cells.sum(axis=1, dtype=np.int64)

    def take_rows(self, idx) -> PageViewMatrix:
        idx = np.asarray(idx, dtype=np.int64)
        return PageViewMatrix(tuple(self.users[i] for i in idx), self.pages, self.cells[idx, :])

    def take_columns(self, idx) -> PageViewMatrix:
        idx = np.asarray(idx, dtype=np.int64)
        return PageViewMatrix(self.users, tuple(self.pages[i] for i in idx), self.cells[:, idx])

    def __eq__(self, other):
        if not isinstance(other, PageViewMatrix):
            return NotImplemented
        return self.users == other.users and self.pages == other.pages and np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash((self.users, self.pages, self.cells.tobytes()))

    # -- file format -------------------------------------------------------

    def to_text(self) -> str:
        for label in self.users + self.pages:
            if any(c in label for c in "\t\r\n"):
                raise ValueError(f"label {label!r} contains a tab or newline")
        lines = [MATRIX_HEADER, "\t".join(self.pages)]
        for user, row in zip(self.users, self.cells):
            lines.append(user + "\t" + "\t".join("1" if v else "0" for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> PageViewMatrix:
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines or lines[0] != MATRIX_HEADER:
            got = lines[0] if lines else ""
            raise FormatError(f"expected header {MATRIX_HEADER!r}, got {got!r}")
        if len(lines) < 2:
            raise FormatError("missing page header line")
        pages = tuple(lines[1].split("\t")) if lines[1] else ()
        users, rows = [], []
        for lineno, line in enumerate(lines[2:], start=3):
            fields = line.split("\t")
            if len(fields) != len(pages) + 1 or any(f not in ("0", "1") for f in fields[1:]):
                raise FormatError(f"line {lineno}: expected user id and {len(pages)} 0/1 cells")
            users.append(fields[0])
            rows.append([int(f) for f in fields[1:]])
        cells = np.array(rows, dtype=np.uint8).reshape(len(users), len(pages))
        try:
            return cls(tuple(users), pages, cells)
        except ValueError as exc:
            raise FormatError(str(exc)) from None

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def read(cls, path) -> PageViewMatrix:
        with open(path, encoding="utf-8", newline="") as fh:
            return cls.from_text(fh.read())


@dataclass(frozen=True)
class MatrixSplit:
    train: PageViewMatrix
    test: PageViewMatrix
    level1: PageViewMatrix
    level2: PageViewMatrix


def build_pv_matrix(sessions: Sequence[Session]) -> PageViewMatrix:
    """One row per session, one column per distinct URL.

    Rows follow session start time (ties by session id); columns follow the
    order in which URLs first appear when walking the rows.
    """
    if not sessions:
        raise DataError("no sessions to build a page-view matrix from")
    ordered = sorted(sessions, key=lambda s: (s.start, s.session_id))
    page_index: dict[str, int] = {}
    for s in ordered:
        for url in s.urls:
            page_index.setdefault(url, len(page_index))
    cells = np.zeros((len(ordered), len(page_index)), dtype=np.uint8)
    for i, s in enumerate(ordered):
        cells[i, [page_index[u] for u in s.urls]] = 1
    return PageViewMatrix(tuple(s.session_id for s in ordered), tuple(page_index), cells)


def prune(
    matrix: PageViewMatrix, min_pages: int = 5, min_url_sessions: int = 3, fixpoint: bool = False
) -> PageViewMatrix:
    """Drop short sessions, then rarely visited pages.

    One pass by default; ``fixpoint=True`` repeats until nothing changes.
    """
    if min_pages < 1 or min_url_sessions < 1:
        raise ValueError("min_pages and min_url_sessions must be >= 1")
    current = matrix
    while True:
        rows = np.flatnonzero(current.row_sums() >= min_pages)
        pruned = current.take_rows(rows)
        cols = np.flatnonzero(pruned.column_sums() >= min_url_sessions)
        pruned = pruned.take_columns(cols)
        if pruned.shape[0] == 0 or pruned.shape[1] == 0:
            raise DataError("dataset too sparse: pruning left an empty matrix")
        if not fixpoint or pruned.shape == current.shape:
            return pruned
        current = pruned


def split_train_test(matrix: PageViewMatrix, train_fraction: float = 0.8) -> tuple[PageViewMatrix, PageViewMatrix]:
    """First ``floor(train_fraction * U)`` rows train, the rest test."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    n_users = matrix.shape[0]
    # round() guards against 0.8 * 10 = 7.999...
    cut = math.floor(round(train_fraction * n_users, 9))
    if cut == 0 or cut == n_users:
        raise DataError(f"cannot split {n_users} user(s) with train_fraction={train_fraction}")
    return matrix.take_rows(range(cut)), matrix.take_rows(range(cut, n_users))


def level_sizes(n_pages: int) -> tuple[int, int]:
    return (n_pages + 1) // 2, n_pages // 2


def split_levels(matrix: PageViewMatrix) -> tuple[PageViewMatrix, PageViewMatrix]:
    """First ``ceil(P/2)`` columns form level I, the remainder level II."""
    n_pages = matrix.shape[1]
    if n_pages < 2:
        raise DataError("need at least 2 pages to split into levels")
    n1, _ = level_sizes(n_pages)
    return matrix.take_columns(range(n1)), matrix.take_columns(range(n1, n_pages))


def split_matrix(matrix: PageViewMatrix, train_fraction: float = 0.8) -> MatrixSplit:
    train, test = split_train_test(matrix, train_fraction)
    level1, level2 = split_levels(train)
    return MatrixSplit(train, test, level1, level2)
