"""Brute-force reference implementation used to cross-check the package.

Written from the rules alone with plain lists and 50-digit decimals; it
shares no code with ``entrorec``. Values that are mathematically equal are
treated as ties (tolerance far below float resolution), so ordering follows
the rules rather than float rounding.
"""

from __future__ import annotations

from decimal import ROUND_HALF_EVEN, Decimal, getcontext
from fractions import Fraction

getcontext().prec = 50
TIE = Decimal("1e-40")


def log2(n: int) -> Decimal:
    return Decimal(n).ln() / Decimal(2).ln()


def entropy(diff: list[int]) -> Decimal:
    # every disagreeing position is an outcome of probability 1/n
    n = len(diff)
    total = Decimal(0)
    for d in diff:
        if d:
            p = Decimal(1) / n
            total -= p * (p.ln() / Decimal(2).ln())
    return total


def _cmp(a: Decimal, b: Decimal) -> int:
    if abs(a - b) < TIE:
        return 0
    return -1 if a < b else 1


def _sort(items, key_value):
    """Sort ``(index, ...)`` tuples ascending by a Decimal value, exact ties by index."""
    out = []
    for item in items:
        pos = len(out)
        for i, other in enumerate(out):
            c = _cmp(key_value(item), key_value(other))
            if c < 0 or (c == 0 and item[0] < other[0]):
                pos = i
                break
        out.insert(pos, item)
    return out


def valuable(rows: list[list[int]], target: int, beta) -> list[tuple[int, Decimal]]:
    n1 = (len(rows[0]) + 1) // 2
    b = Fraction(repr(beta)) if isinstance(beta, float) else Fraction(beta)
    found = []
    for x, row in enumerate(rows):
        if x == target:
            continue
        diff = [abs(row[j] - rows[target][j]) for j in range(n1)]
        zeros = diff.count(0)
        if Fraction(zeros) >= b * n1:
            found.append((x, entropy(diff)))
    return _sort(found, lambda t: t[1])


def trustworthy(rows, target, beta) -> list[tuple[int, Decimal, Decimal, Decimal]]:
    n_pages = len(rows[0])
    n1 = (n_pages + 1) // 2
    kept = []
    for x, e1 in valuable(rows, target, beta):
        diff2 = [abs(rows[x][j] - rows[target][j]) for j in range(n1, n_pages)]
        e2 = entropy(diff2)
        k1 = sum(abs(rows[x][j] - rows[target][j]) for j in range(n1))
        if _cmp(e2, e1) < 0 or (k1 == 0 and not any(diff2)):
            kept.append((x, e1, e2, (e1 - e2) / 2))
    return _sort(kept, lambda t: t[3])


def doi_list(rows, target, beta, decimals=6) -> list[tuple[int, Decimal]]:
    """Pages unseen by the target, scored and ranked by DOI (rounded like the KB stores it)."""
    trust = trustworthy(rows, target, beta)
    quantum = Decimal(1).scaleb(-decimals)
    scored = []
    for c in range(len(rows[0])):
        if rows[target][c]:
            continue
        gaps = [t[3] for t in trust if rows[t[0]][c]]
        if not gaps:
            continue
        viewers = sum(r[c] for r in rows)
        doi = (1 - sum(gaps) / len(gaps)) * viewers
        scored.append((c, doi.quantize(quantum, rounding=ROUND_HALF_EVEN)))
    return _sort(scored, lambda t: -t[1])


def knowledge_base(rows, beta) -> list[tuple[list[int], list[tuple[int, Decimal]]]]:
    return [([c for c, v in enumerate(r) if v], doi_list(rows, t, beta)) for t, r in enumerate(rows)]


def top_n(kb, user_ids: list[str], visited: set[int], n: int, beta) -> list[tuple[int, Decimal]]:
    """Online lookup: match patterns by overlap, keep each page's best DOI."""
    b = Fraction(repr(beta)) if isinstance(beta, float) else Fraction(beta)
    best: dict[int, Decimal] = {}
    for pattern, recs in kb:
        if Fraction(len(visited & set(pattern))) < b * len(visited):
            continue
        for c, doi in recs:
            if c not in visited and (c not in best or doi > best[c]):
                best[c] = doi
    ranked = _sort(list(best.items()), lambda t: -t[1])
    return ranked[:n]
