"""Command line entry point: ``entrorec ingest|synth|train|evaluate|serve``.

Exit codes: 0 success, 1 usage error, 2 data error. Errors print one line
starting with ``error:`` to stderr. Paths and the port fall back to
``ENTROREC_*`` environment variables when omitted.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .dataset import PageViewMatrix, build_pv_matrix, prune, split_train_test
from .errors import DataError
from .evaluation import (
    EvalConfig,
    SynthConfig,
    compare_sle,
    format_labels_tsv,
    format_plot_csv,
    format_report_tsv,
    generate_synthetic,
    run_offline_eval,
    synth_users,
)
from .logs import DEFAULT_EXCLUDED_EXTENSIONS, filter_page_requests, read_log, sessionize, write_sessions_tsv
from .recommender import build_knowledge_base, compute_trust
from .similarity import SimilarityConfig, format_trust_tsv

ENV_PREFIX = "ENTROREC_"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _env(name, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def _env_int(name, default: int) -> int:
    raw = _env(name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{ENV_PREFIX}{name} must be an integer, got {raw!r}") from None


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _need(value, what, env):
    if value is None:
        raise UsageError(f"missing {what} (argument or {ENV_PREFIX}{env})")
    return value


def _read_matrix(path) -> PageViewMatrix:
    try:
        return PageViewMatrix.read(path)
    except OSError as exc:
        raise DataError(f"cannot read matrix {path}: {exc.strerror}") from None


def cmd_ingest(args) -> int:
    log_path = _need(args.log, "log path", "LOG")
    out = _need(args.out, "output matrix path", "MATRIX")
    try:
        records, skipped = read_log(log_path, fmt=args.format, strict=args.strict)
    except OSError as exc:
        raise DataError(f"cannot read log {log_path}: {exc.strerror}") from None
    excluded = set(DEFAULT_EXCLUDED_EXTENSIONS)
    if args.keep_pdf:
        excluded.discard(".pdf")
    pages = filter_page_requests(records, excluded)
    sessions = sessionize(pages, timeout=args.timeout * 60, max_duration=args.max_duration * 60)
    if not sessions:
        raise DataError("dataset too sparse: no sessions after filtering")
    if args.sessions_out:
        write_sessions_tsv(sessions, args.sessions_out)
    raw = build_pv_matrix(sessions)
    matrix = prune(raw, args.min_pages, args.min_url_sessions, fixpoint=args.fixpoint)
    matrix.write(out)
    print(f"records\t{len(records)}\tskipped_lines\t{skipped}\tpage_requests\t{len(pages)}")
    print(f"sessions\t{raw.shape[0]}\tpages\t{raw.shape[1]}\tavg_page_views\t{raw.row_sums().mean():.2f}")
    print(f"kept_sessions\t{matrix.shape[0]}\tkept_pages\t{matrix.shape[1]}\tavg_page_views\t{matrix.row_sums().mean():.2f}")
    return 0


def cmd_synth(args) -> int:
    out = _need(args.out, "output matrix path", "MATRIX")
    cfg = SynthConfig(
        groups=args.groups,
        users_per_group=args.users_per_group,
        pages_per_group=args.pages_per_group,
        p_in=args.p_in,
        p_out=args.p_out,
        drift_fraction=args.drift,
        seed=args.seed,
        popularity_skew=args.popularity_skew,
    )
    matrix = generate_synthetic(cfg)
    matrix.write(out)
    labels = Path(str(out) + ".labels.tsv")
    users = synth_users(cfg)
    labels.write_text(format_labels_tsv(users), encoding="utf-8")
    print(f"users\t{matrix.shape[0]}\tpages\t{matrix.shape[1]}\tdrifted\t{sum(u.drifted for u in users)}")
    return 0


def cmd_train(args) -> int:
    matrix = _read_matrix(_need(args.matrix, "matrix path", "MATRIX"))
    kb_path = _need(args.kb, "knowledge base path", "KB")
    train, _ = split_train_test(matrix, args.train_fraction)
    config = SimilarityConfig(args.beta)
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    table = compute_trust(train, config, jobs=args.jobs)
    kb = build_knowledge_base(train, config, table=table)
    kb.write(kb_path)
    if args.trust_out:
        text = format_trust_tsv({u: t for u, (_, t) in table.items()}, train.users)
        Path(args.trust_out).write_text(text, encoding="utf-8")
    print("user\tvaluable\ttrustworthy\trecommendations")
    for user, (valuable, trust) in table.items():
        print(f"{user}\t{len(valuable)}\t{len(trust)}\t{len(kb.entries[user].recs)}")
    return 0


def cmd_evaluate(args) -> int:
    matrix = _read_matrix(_need(args.matrix, "matrix path", "MATRIX"))
    train, test = split_train_test(matrix, args.train_fraction)
    cfg = EvalConfig(tuple(args.top_n), args.visited_prefix, args.eval_beta, args.beta)
    if args.compare_sle:
        reports = list(compare_sle(train, test, cfg, jobs=args.jobs))
    else:
        kb = build_knowledge_base(train, SimilarityConfig(cfg.train_beta), jobs=args.jobs)
        reports = [run_offline_eval(train, test, kb, cfg)]
    prefix = args.out_prefix
    Path(prefix + ".report.tsv").write_text(format_report_tsv(reports), encoding="utf-8")
    Path(prefix + ".plot.csv").write_text(format_plot_csv(reports), encoding="utf-8")
    sys.stdout.write(format_report_tsv(reports))
    return 0


def cmd_serve(args) -> int:
    from .service import serve
    from .similarity import check_beta

    check_beta(args.match_beta)
    serve(_need(args.kb, "knowledge base path", "KB"), args.host, args.port, args.match_beta)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="entrorec", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="access log -> pruned page-view matrix")
    p.add_argument("log", nargs="?", default=_env("LOG"))
    p.add_argument("out", nargs="?", default=_env("MATRIX"))
    p.add_argument("--format", choices=("common", "combined"), default=None)
    p.add_argument("--timeout", type=float, default=30.0, help="session gap in minutes")
    p.add_argument("--max-duration", type=float, default=120.0, help="longest kept session in minutes")
    p.add_argument("--min-pages", type=int, default=5)
    p.add_argument("--min-url-sessions", type=int, default=3)
    p.add_argument("--fixpoint", action="store_true", help="repeat pruning until stable")
    p.add_argument("--keep-pdf", action="store_true", help="treat .pdf requests as pages")
    p.add_argument("--strict", action="store_true", help="abort on the first malformed line")
    p.add_argument("--sessions-out", help="also dump sessions as TSV")
    p.set_defaults(func=cmd_ingest)

    d = SynthConfig()
    p = sub.add_parser("synth", help="write a seeded synthetic matrix")
    p.add_argument("out", nargs="?", default=_env("MATRIX"))
    p.add_argument("--groups", type=int, default=d.groups)
    p.add_argument("--users-per-group", type=int, default=d.users_per_group)
    p.add_argument("--pages-per-group", type=int, default=d.pages_per_group)
    p.add_argument("--p-in", type=float, default=d.p_in)
    p.add_argument("--p-out", type=float, default=d.p_out)
    p.add_argument("--drift", type=float, default=d.drift_fraction)
    p.add_argument("--popularity-skew", type=float, default=d.popularity_skew)
    p.add_argument("--seed", type=int, default=d.seed)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="matrix -> knowledge base")
    p.add_argument("matrix", nargs="?", default=_env("MATRIX"))
    p.add_argument("kb", nargs="?", default=_env("KB"))
    p.add_argument("--beta", type=float, default=0.8)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--trust-out", help="write trust records as TSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="offline MAE / precision / recall")
    p.add_argument("matrix", nargs="?", default=_env("MATRIX"))
    p.add_argument("--top-n", type=_int_list, default=[2, 3, 5, 10])
    p.add_argument("--visited-prefix", type=int, default=6)
    p.add_argument("--eval-beta", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.8, help="training beta")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--compare-sle", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-prefix", default=_env("REPORT", "report"))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="HTTP recommendation service")
    p.add_argument("kb", nargs="?", default=_env("KB"))
    p.add_argument("--host", default=_env("HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=_env_int("PORT", 8080))
    p.add_argument("--match-beta", type=float, default=0.5)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
        )
        return args.func(args)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 1
    except (DataError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
