"""Entropy-based recommender selection.

Two users are compared through the 0/1 vector of pages on which they
disagree. A user is *valuable* to a target when they agree on at least a
``beta`` share of the level-I pages, and *trustworthy* when their level-II
entropy is strictly below their level-I entropy (their interests stayed
aligned). Users that agree perfectly at both levels are trustworthy with a
zero entropy gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dataset import PageViewMatrix
from .kernels import cross_disagreements, pairwise_disagreements


def as_fraction(beta) -> Fraction:
    """Exact rational for a threshold given as a decimal float, string or Fraction."""
    if isinstance(beta, Fraction):
        return beta
    if isinstance(beta, float):
        return Fraction(repr(beta))
    return Fraction(beta)


def check_beta(beta) -> Fraction:
    frac = as_fraction(beta)
    if not 0 < frac <= 1:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    return frac


@dataclass(frozen=True)
class SimilarityConfig:
    beta: float = 0.8

    def __post_init__(self):
        check_beta(self.beta)


@dataclass(frozen=True, eq=False)
class DifferenceVector:
    entries: np.ndarray
    target_user: str | None = None
    other_user: str | None = None

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        if not isinstance(other, DifferenceVector):
            return NotImplemented
        return (
            self.target_user == other.target_user
            and self.other_user == other.other_user
            and np.array_equal(self.entries, other.entries)
        )


@dataclass(frozen=True)
class TrustRecord:
    """One selected recommender for a target.

    For single-level (SLE) records ``entropy_l2`` is NaN and
    ``actual_entropy`` equals ``entropy_l1``.
    """

    target: str
    recommender: str
    entropy_l1: float
    entropy_l2: float
    actual_entropy: float


def difference_score(row_t, row_x, target_user=None, other_user=None) -> DifferenceVector:
    row_t = np.asarray(row_t, dtype=np.int8)
    row_x = np.asarray(row_x, dtype=np.int8)
    if row_t.shape != row_x.shape or row_t.ndim != 1:
        raise ValueError(f"row shapes differ: {row_t.shape} vs {row_x.shape}")
    if row_t.size == 0:
        raise ValueError("rows must be non-empty")
    return DifferenceVector(np.abs(row_t - row_x).astype(np.uint8), target_user, other_user)


def zero_count(d: DifferenceVector) -> int:
    return int(len(d) - np.count_nonzero(d.entries))


def passes_gate(agreements: int, length: int, beta) -> bool:
    frac = as_fraction(beta)
    return agreements * frac.denominator >= frac.numerator * length


def is_valuable(d: DifferenceVector, beta) -> bool:
    """True when the agreement count reaches ``beta * len(d)`` (inclusive, exact)."""
    check_beta(beta)
    return passes_gate(zero_count(d), len(d), beta)


def entropy_from_count(k: int, n: int) -> float:
    """Entropy of a length-``n`` difference vector holding ``k`` ones.

    Each disagreeing page counts as a distinct outcome with probability
    ``1/n``; agreeing pages contribute nothing, giving ``k * log2(n) / n``.
    """
    if n < 1:
        raise ValueError("difference vector must be non-empty")
    if k == 0 or n == 1:
        return 0.0
    return k * math.log2(n) / n


def level_entropy(d: DifferenceVector) -> float:
    return entropy_from_count(int(np.count_nonzero(d.entries)), len(d))


def entropy_gap(e1: float, e2: float) -> float:
    """Actual entropy of a recommender: half the drop from level I to level II."""
    return (e1 - e2) / 2


def _valuable_from_counts(counts, n_pages, target_idx, beta) -> list[tuple[int, int]]:
    """``(row index, disagreements)`` of users passing the gate, ascending by disagreement then index."""
    frac = as_fraction(beta)
    agree = n_pages - counts
    ok = agree * frac.denominator >= frac.numerator * n_pages
    ok[target_idx] = False
    idx = np.flatnonzero(ok)
    # entropy is strictly increasing in k for fixed n, so sorting by k is sorting by entropy
    order = np.lexsort((idx, counts[idx]))
    return [(int(idx[i]), int(counts[idx[i]])) for i in order]


def _trust_from_counts(valuable, counts_l2, n1, n2, users, target) -> list[TrustRecord]:
    records = []
    for idx, k1 in valuable:
        k2 = int(counts_l2[idx])
        e1 = entropy_from_count(k1, n1)
        e2 = entropy_from_count(k2, n2)
        if e2 < e1 or (k1 == 0 and k2 == 0):
            # equal widths: derive the gap from k1 - k2 so equal gaps are equal floats
            gap = entropy_from_count(k1 - k2, n1) / 2 if n1 == n2 else entropy_gap(e1, e2)
            records.append((idx, TrustRecord(target, users[idx], e1, e2, gap)))
    records.sort(key=lambda r: (r[1].actual_entropy, r[0]))
    return [r for _, r in records]


def select_valuable(level1: PageViewMatrix, target: str, beta) -> list[tuple[str, float]]:
    """Valuable recommenders of ``target`` with their level-I entropy, most similar first."""
    check_beta(beta)
    t = level1.user_index(target)
    counts = cross_disagreements(level1.cells[t : t + 1], level1.cells)[0]
    n = level1.shape[1]
    return [(level1.users[i], entropy_from_count(k, n)) for i, k in _valuable_from_counts(counts, n, t, beta)]


def select_trustworthy(valuable: Sequence[tuple[str, float]], level2: PageViewMatrix, target: str) -> list[TrustRecord]:
    """Keep valuable users whose level-II entropy dropped below their level-I entropy.

    Sorted by ascending entropy gap, ties by row order in ``level2``.
    """
    t = level2.user_index(target)
    row_t = level2.cells[t]
    n2 = level2.shape[1]
    kept = []
    for user, e1 in valuable:
        idx = level2.user_index(user)
        k2 = int(np.count_nonzero(level2.cells[idx] != row_t))
        e2 = entropy_from_count(k2, n2)
        if e2 < e1 or (e1 == 0.0 and k2 == 0):
            kept.append((idx, TrustRecord(target, user, e1, e2, entropy_gap(e1, e2))))
    kept.sort(key=lambda r: (r[1].actual_entropy, r[0]))
    return [r for _, r in kept]


def trust_table(level1: PageViewMatrix, level2: PageViewMatrix, beta, users: Sequence[str] | None = None):
    """Valuable and trustworthy lists for many targets at once.

    Returns ``{target: (valuable, trust)}`` where ``valuable`` holds
    ``(user, E_I)`` pairs. Disagreement counts are computed once per level.
    """
    check_beta(beta)
    if level1.users != level2.users:
        raise ValueError("level matrices must share rows")
    users = level1.users if users is None else tuple(users)
    n1, n2 = level1.shape[1], level2.shape[1]
    rows = [level1.user_index(u) for u in users]
    c1 = cross_disagreements(level1.cells[rows], level1.cells)
    c2 = cross_disagreements(level2.cells[rows], level2.cells)
    out = {}
    for j, (target, t) in enumerate(zip(users, rows)):
        valuable = _valuable_from_counts(c1[j], n1, t, beta)
        trust = _trust_from_counts(valuable, c2[j], n1, n2, level1.users, target)
        out[target] = ([(level1.users[i], entropy_from_count(k, n1)) for i, k in valuable], trust)
    return out


# -- single-level baseline ---------------------------------------------------


def _sle_pairs(full: PageViewMatrix, beta):
    counts = pairwise_disagreements(full.cells)
    n = full.shape[1]
    pairs = {}
    for t in range(full.shape[0]):
        pairs[t] = [(i, entropy_from_count(k, n)) for i, k in _valuable_from_counts(counts[t], n, t, beta)]
    return pairs


def sle_threshold(full: PageViewMatrix, beta) -> float | None:
    """Half the spread between the largest and smallest valuable-pair entropy; None without pairs."""
    check_beta(beta)
    values = [e for lst in _sle_pairs(full, beta).values() for _, e in lst]
    if not values:
        return None
    return (max(values) - min(values)) / 2


def sle_table(full: PageViewMatrix, beta) -> dict[str, list[tuple[str, float]]]:
    check_beta(beta)
    pairs = _sle_pairs(full, beta)
    values = [e for lst in pairs.values() for _, e in lst]
    out = {u: [] for u in full.users}
    if not values:
        return out
    tau = (max(values) - min(values)) / 2
    for t, lst in pairs.items():
        out[full.users[t]] = [(full.users[i], e) for i, e in lst if e < tau]
    return out


def sle_trustworthy(full: PageViewMatrix, target: str, beta) -> list[tuple[str, float]]:
    """Baseline selection over the unsplit matrix, ascending by entropy."""
    full.user_index(target)
    return sle_table(full, beta)[target]


def sle_records(table: dict[str, list[tuple[str, float]]]) -> dict[str, list[TrustRecord]]:
    return {
        t: [TrustRecord(t, u, e, math.nan, e) for u, e in lst]
        for t, lst in table.items()
    }


def format_trust_tsv(records_by_target: dict[str, Sequence[TrustRecord]], users: Sequence[str]) -> str:
    """Rows of ``target, recommender, E_I, E_II, E_A`` with 4 decimals.

    ``users`` fixes the ascending order of targets and recommenders.
    """
    order = {u: i for i, u in enumerate(users)}
    rows = [r for recs in records_by_target.values() for r in recs]
    rows.sort(key=lambda r: (order[r.target], r.actual_entropy, order[r.recommender]))
    lines = ["target\trecommender\tE_I\tE_II\tE_A"]
    for r in rows:
        lines.append(
            f"{r.target}\t{r.recommender}\t{r.entropy_l1:.4f}\t{r.entropy_l2:.4f}\t{r.actual_entropy:.4f}"
        )
    return "\n".join(lines) + "\n"
