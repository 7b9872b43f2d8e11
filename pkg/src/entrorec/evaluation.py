"""Offline evaluation: MAE, precision and recall over top-N lists, the
single-level baseline comparison, and a seeded synthetic corpus."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import PageViewMatrix, level_sizes
from .errors import DataError
from .kernels import cross_disagreements
from .recommender import KnowledgeBase, aggregate, build_knowledge_base, build_sle_knowledge_base
from .similarity import SimilarityConfig, as_fraction, check_beta

# Published figures for the original (unavailable) log, kept for side-by-side reading only.
REFERENCE_VALUES = {
    ("mae", "proposed"): {2: 0.2114, 3: 0.2591, 5: 0.3245, 10: 0.4027},
    ("precision", "sle"): {2: 0.199, 3: 0.181, 5: 0.181, 10: 0.180},
    ("precision", "proposed"): {2: 0.303, 3: 0.271, 5: 0.245, 10: 0.221},
    ("recall", "sle"): {2: 0.215, 3: 0.237, 5: 0.241, 10: 0.241},
    ("recall", "proposed"): {2: 0.301, 3: 0.387, 5: 0.531, 10: 0.619},
}


def mae(predicted: Sequence[float], actual: Sequence[float]) -> float:
    """Mean absolute error over paired values."""
    if len(predicted) != len(actual):
        raise ValueError(f"length mismatch: {len(predicted)} vs {len(actual)}")
    if not predicted:
        raise ValueError("mae of an empty sequence")
    return math.fsum(abs(p - q) for p, q in zip(predicted, actual)) / len(predicted)


def precision(relevant, retrieved) -> float:
    retrieved = set(retrieved)
    if not retrieved:
        return 0.0
    return len(set(relevant) & retrieved) / len(retrieved)


def recall(relevant, retrieved) -> float:
    relevant = set(relevant)
    if not relevant:
        raise ValueError("recall is undefined for an empty relevant set")
    return len(relevant & set(retrieved)) / len(relevant)


@dataclass(frozen=True)
class EvalConfig:
    top_n_sizes: tuple[int, ...] = (2, 3, 5, 10)
    visited_prefix: int = 6
    eval_beta: float = 0.5
    train_beta: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "top_n_sizes", tuple(sorted(set(self.top_n_sizes))))
        if not self.top_n_sizes or min(self.top_n_sizes) < 1:
            raise ValueError("top-N sizes must be >= 1")
        if self.visited_prefix < 1:
            raise ValueError("visited_prefix must be >= 1")
        check_beta(self.eval_beta)
        check_beta(self.train_beta)


@dataclass(frozen=True)
class TopNResult:
    n: int
    mae: float | None
    precision: float
    recall: float
    users_evaluated: int
    pairs_scored: int
    empty_retrievals: int


@dataclass(frozen=True)
class UserOutcome:
    similar: tuple[str, ...]
    relevant: frozenset[int]
    ranked: tuple[tuple[int, float], ...]

    def retrieved(self, n: int) -> list[int]:
        return [p for p, _ in self.ranked[:n]]


@dataclass
class EvalReport:
    system: str
    results: list[TopNResult]
    per_user: dict[str, UserOutcome] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def result(self, n: int) -> TopNResult:
        for r in self.results:
            if r.n == n:
                return r
        raise KeyError(n)


def run_offline_eval(
    pv_train: PageViewMatrix, pv_test: PageViewMatrix, kb: KnowledgeBase, cfg: EvalConfig = EvalConfig(), system: str = "proposed"
) -> EvalReport:
    """Score a knowledge base on held-out users.

    The first ``visited_prefix`` columns play the already-visited part of each
    test session. Training users agreeing with a test user on at least
    ``eval_beta`` of that block are pooled; their stored lists (best DOI per
    page, visited block excluded) are cut at each N and scored against the
    pages the test user viewed outside the block.
    """
    if pv_train.pages != pv_test.pages or kb.pages != pv_train.pages:
        raise DataError("training matrix, test matrix and knowledge base must share page columns")
    n_pages = pv_train.shape[1]
    prefix = cfg.visited_prefix
    if prefix >= n_pages:
        raise DataError(f"visited_prefix={prefix} leaves no unvisited pages out of {n_pages}")
    missing = [u for u in pv_train.users if u not in kb.entries]
    if missing:
        raise DataError(f"knowledge base lacks {len(missing)} training user(s), e.g. {missing[0]!r}")

    frac = as_fraction(cfg.eval_beta)
    counts = cross_disagreements(pv_test.cells[:, :prefix], pv_train.cells[:, :prefix])
    similar_mask = (prefix - counts) * frac.denominator >= frac.numerator * prefix
    col_sums = pv_train.column_sums()
    block = set(range(prefix))
    n_max = max(cfg.top_n_sizes)

    per_user = {}
    for j, user in enumerate(pv_test.users):
        similar = tuple(pv_train.users[i] for i in np.flatnonzero(similar_mask[j]))
        ranked = tuple(aggregate(kb, similar, block, n_max))
        relevant = frozenset(int(p) + prefix for p in np.flatnonzero(pv_test.cells[j, prefix:]))
        per_user[user] = UserOutcome(similar, relevant, ranked)

    evaluable = [u for u, o in per_user.items() if o.relevant]
    if not evaluable:
        raise DataError("no evaluable test users (every test user has an empty relevant set)")

    flags = []
    results = []
    for n in cfg.top_n_sizes:
        precs, recs, pred, actual = [], [], [], []
        empty = 0
        for user, o in per_user.items():
            top = o.ranked[:n]
            for p, doi in top:
                pred.append(min(1.0, max(0.0, doi / col_sums[p])))
                actual.append(1.0 if p in o.relevant else 0.0)
            if o.relevant:
                retrieved = [p for p, _ in top]
                if not retrieved:
                    empty += 1
                precs.append(precision(o.relevant, retrieved))
                recs.append(recall(o.relevant, retrieved))
        score = mae(pred, actual) if pred else None
        if score is None:
            flags.append(f"top-{n}: no predictions")
        results.append(
            TopNResult(n, score, math.fsum(precs) / len(precs), math.fsum(recs) / len(recs), len(evaluable), len(pred), empty)
        )
    return EvalReport(system, results, per_user, flags)


def compare_sle(
    pv_train: PageViewMatrix, pv_test: PageViewMatrix, cfg: EvalConfig = EvalConfig(), jobs: int = 1
) -> tuple[EvalReport, EvalReport]:
    """Evaluate the two-level system and the single-level baseline under one protocol."""
    sim = SimilarityConfig(cfg.train_beta)
    kb = build_knowledge_base(pv_train, sim, jobs=jobs)
    kb_sle = build_sle_knowledge_base(pv_train, sim)
    return (
        run_offline_eval(pv_train, pv_test, kb, cfg, "proposed"),
        run_offline_eval(pv_train, pv_test, kb_sle, cfg, "sle"),
    )


def _fmt(value) -> str:
    return "NA" if value is None else f"{value:.6f}"


def _reference_comments() -> list[str]:
    lines = ["# reference values from the original study (different data; not reproducible here)"]
    for (metric, system), vals in REFERENCE_VALUES.items():
        lines.append(f"# {metric} {system} " + " ".join(f"top{n}={v:.4f}" for n, v in vals.items()))
    return lines


def format_report_tsv(reports: Sequence[EvalReport]) -> str:
    lines = _reference_comments()
    lines.append("system\tn\tmae\tprecision\trecall\tusers\tpairs\tempty")
    for n in [r.n for r in reports[0].results]:
        for rep in reports:
            r = rep.result(n)
            lines.append(
                f"{rep.system}\t{n}\t{_fmt(r.mae)}\t{_fmt(r.precision)}\t{_fmt(r.recall)}"
                f"\t{r.users_evaluated}\t{r.pairs_scored}\t{r.empty_retrievals}"
            )
    for rep in reports:
        lines += [f"# {rep.system}: {flag}" for flag in rep.flags]
    return "\n".join(lines) + "\n"


def format_plot_csv(reports: Sequence[EvalReport]) -> str:
    lines = _reference_comments()
    lines.append("n,metric,system,value")
    for rep in reports:
        for r in rep.results:
            for metric in ("mae", "precision", "recall"):
                lines.append(f"{r.n},{metric},{rep.system},{_fmt(getattr(r, metric))}")
    return "\n".join(lines) + "\n"


# -- synthetic corpus ------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    """Group-structured corpus; pages and users are assigned to groups round-robin.

    Defaults give a 120 x 42 matrix, close to the scale of the original log.
    """

    groups: int = 2
    users_per_group: int = 60
    pages_per_group: int = 21
    p_in: float = 0.97
    p_out: float = 0.0
    drift_fraction: float = 0.2
    seed: int = 12345
    popularity_skew: float = 0.8

    def __post_init__(self):
        if self.groups < 1 or self.users_per_group < 1 or self.pages_per_group < 1:
            raise ValueError("groups, users_per_group and pages_per_group must be >= 1")
        if not 0 <= self.p_out < self.p_in <= 1:
            raise ValueError("need 0 <= p_out < p_in <= 1")
        if not 0 <= self.drift_fraction <= 1:
            raise ValueError("drift_fraction must be in [0, 1]")
        if self.drift_fraction > 0 and self.groups < 2:
            raise ValueError("drift needs at least 2 groups")
        if not 0 <= self.popularity_skew < 1:
            raise ValueError("popularity_skew must be in [0, 1)")
        if self.p_out >= self.p_in * (1 - self.popularity_skew):
            raise ValueError("least popular group page must stay above p_out")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def shape(self) -> tuple[int, int]:
        return self.groups * self.users_per_group, self.groups * self.pages_per_group


@dataclass(frozen=True)
class SynthUser:
    label: str
    group: int
    group_l2: int

    @property
    def drifted(self) -> bool:
        return self.group != self.group_l2


def _stream(seed: int, lane: int, index: int) -> np.random.Generator:
    # counter-based: the (seed, lane, index) triple alone fixes the stream
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, lane, index]))


def synth_users(cfg: SynthConfig) -> list[SynthUser]:
    """Ground-truth group membership per user.

    Drifted users are spread evenly over groups; within a group they take
    distinct level-II groups while alternatives last.
    """
    n_users, _ = cfg.shape
    g = cfg.groups
    n_drift = round(cfg.drift_fraction * n_users)
    group_l2 = [i % g for i in range(n_users)]
    for grp in range(g):
        quota = n_drift // g + (1 if grp < n_drift % g else 0)
        if not quota:
            continue
        rng = _stream(cfg.seed, 1, grp)
        members = [i for i in range(n_users) if i % g == grp]
        chosen = sorted(rng.choice(members, size=quota, replace=False).tolist())
        alternatives = [h for h in range(g) if h != grp]
        rng.shuffle(alternatives)
        for k, i in enumerate(chosen):
            group_l2[i] = alternatives[k % len(alternatives)]
    width = len(str(n_users - 1))
    users = []
    for i in range(n_users):
        label = f"u{i:0{width}d}-g{i % g}"
        if group_l2[i] != i % g:
            label += f"-d{group_l2[i]}"
        users.append(SynthUser(label, i % g, group_l2[i]))
    return users


def page_in_probability(cfg: SynthConfig) -> np.ndarray:
    """View probability of each page for members of its group.

    With ``popularity_skew > 0`` the probability falls linearly along the
    group's columns from ``p_in`` to ``p_in * (1 - skew)``, so earlier
    columns are more popular, as first-appearance ordering of real logs tends
    to produce.
    """
    _, n_pages = cfg.shape
    prob = np.full(n_pages, cfg.p_in)
    if cfg.popularity_skew == 0 or cfg.pages_per_group == 1:
        return prob
    for grp in range(cfg.groups):
        cols = np.arange(grp, n_pages, cfg.groups)
        ranks = np.arange(len(cols))
        prob[cols] = cfg.p_in * (1 - cfg.popularity_skew * ranks / (len(cols) - 1))
    return prob


def generate_synthetic(cfg: SynthConfig = SynthConfig()) -> PageViewMatrix:
    """Seeded binary corpus with optional interest drift in the level-II columns."""
    users = synth_users(cfg)
    n_users, n_pages = cfg.shape
    n1, _ = level_sizes(n_pages)
    page_group = np.arange(n_pages) % cfg.groups
    p_in = page_in_probability(cfg)
    cells = np.zeros((n_users, n_pages), dtype=np.uint8)
    for i, u in enumerate(users):
        draws = _stream(cfg.seed, 0, i).random(n_pages)
        member = np.where(np.arange(n_pages) < n1, u.group, u.group_l2)
        prob = np.where(page_group == member, p_in, cfg.p_out)
        cells[i] = draws < prob
    pages = tuple(f"/g{page_group[j]}/p{j:02d}.html" for j in range(n_pages))
    return PageViewMatrix(tuple(u.label for u in users), pages, cells)


def format_labels_tsv(users: Sequence[SynthUser]) -> str:
    lines = ["user\tgroup_l1\tgroup_l2\tdrifted"]
    lines += [f"{u.label}\t{u.group}\t{u.group_l2}\t{int(u.drifted)}" for u in users]
    return "\n".join(lines) + "\n"
