"""Command-line surface: ingest | build-index | compact | search | insight | eval | serve.

Shares one engine implementation with the HTTP service, so a query typed at
the shell and the same query POSTed to /v1/search run identical code and
return identical rankings. Every error class maps to a distinct exit code so
scripts can branch on failures without parsing stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date

from .config import ServiceConfig, load_config
from .engine import CaseEngine
from .errors import (
    BackendUnavailable,
    CaseGptError,
    ConfigError,
    DuplicateId,
    EmptyIndex,
    InvalidCode,
    InvalidParams,
    MalformedRecord,
    MissingField,
    NoCases,
    NotFound,
    StorageFailure,
)
from .evalkit import render_table
from .server import report_to_dict, result_to_dict

EXIT_OK = 0
EXIT_UNEXPECTED = 1

_EXIT_CODES: list[tuple[type, int]] = [
    (ConfigError, 2),
    (MalformedRecord, 3),
    (MissingField, 3),
    (InvalidCode, 3),
    (DuplicateId, 4),
    (NotFound, 5),
    (EmptyIndex, 6),
    (NoCases, 6),
    (BackendUnavailable, 7),
    (InvalidParams, 8),
    (StorageFailure, 9),
    (CaseGptError, 10),
]


def exit_code_for(exc: BaseException) -> int:
    for cls, code in _EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return EXIT_UNEXPECTED


def _parse_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a YYYY-MM-DD date: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="casegpt",
        description="Case retrieval and grounded insight generation.",
    )
    parser.add_argument("--config", help="path to the YAML config file")
    parser.add_argument("--store", help="case store path (overrides config)")
    parser.add_argument("--corpus", help="corpus JSONL path (overrides config)")
    parser.add_argument("--index", help="index snapshot path (overrides config)")
    parser.add_argument(
        "--kernels",
        choices=("auto", "numba", "numpy"),
        help="force a compute-kernel implementation (overrides config)",
    )

    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="load a JSONL corpus into the store")
    p_ingest.add_argument(
        "--mode", choices=("insert", "upsert"), default="insert",
        help="reject duplicate ids (insert) or replace them (upsert)",
    )

    sub.add_parser("build-index", help="embed stored cases and build/update the index")
    sub.add_parser("compact", help="rebuild the index without tombstones")

    def add_query_knobs(p: argparse.ArgumentParser) -> None:
        p.add_argument("query", help="query text")
        p.add_argument("--k", type=int, help="candidate pool size before re-ranking")
        p.add_argument("--n", type=int, help="number of results to return")
        p.add_argument(
            "--lambda", dest="mmr_lambda", type=float,
            help="relevance/diversity trade-off in [0, 1]",
        )
        p.add_argument("--jurisdiction", help="jurisdiction of the query")
        p.add_argument(
            "--now", type=_parse_date,
            help="reference date for recency scoring (YYYY-MM-DD)",
        )
        p.add_argument("--json", action="store_true", help="print JSON instead of a table")

    p_search = sub.add_parser("search", help="run one query and print ranked cases")
    add_query_knobs(p_search)

    p_insight = sub.add_parser("insight", help="retrieve cases and generate a grounded report")
    add_query_knobs(p_insight)
    p_insight.add_argument("--max-rounds", type=int, help="refinement round limit")
    p_insight.add_argument("--threshold", type=float, help="verification overlap threshold")
    p_insight.add_argument("--token-budget", type=int, help="context token budget")

    p_eval = sub.add_parser("eval", help="benchmark retrieval quality on generated queries")
    p_eval.add_argument("--queries", type=int, default=50, help="number of evaluation queries")
    p_eval.add_argument("--k", type=int, default=10, help="cutoff for P@k/R@k/NDCG@k")
    p_eval.add_argument("--seed", type=int, default=0, help="query-sampling seed")
    p_eval.add_argument("--queryset", help="load judgments from this JSONL file instead")
    p_eval.add_argument("--json", action="store_true", help="print JSON instead of a table")

    p_serve = sub.add_parser("serve", help="start the HTTP API")
    p_serve.add_argument("--host", help="listen address (overrides config)")
    p_serve.add_argument("--port", type=int, help="listen port (overrides config)")

    return parser


def _load_service_config(args: argparse.Namespace) -> ServiceConfig:
    config = load_config(args.config)
    if args.store:
        config.store_path = args.store
    if args.corpus:
        config.corpus_path = args.corpus
    if args.index:
        config.index_path = args.index
    if args.kernels:
        config.kernels = args.kernels
    return config


def _print_results(outcome) -> None:
    header = f"{'rank':>4}  {'id':<24} {'final':>8} {'cosine':>8}  factors"
    print(header)
    print("-" * len(header))
    for r in outcome.results:
        factors = " ".join(f"{k}={v:.3f}" for k, v in sorted(r.factors.items()))
        print(f"{r.rank:>4}  {r.id:<24} {r.final_score:>8.4f} {r.cosine:>8.4f}  {factors}")
    total_ms = outcome.timings.get("total_s", 0.0) * 1000.0
    print(f"({len(outcome.results)} results in {total_ms:.1f} ms)")


def _print_report(report) -> None:
    print(f"status: {report.status}")
    if report.failure_reason:
        print(f"reason: {report.failure_reason}")
    print(f"rounds used: {report.refinement_rounds_used}")
    if report.citations:
        print(f"citations: {', '.join(report.citations)}")
    if report.stripped_sentences:
        print(f"stripped sentences: {len(report.stripped_sentences)}")
    print()
    print(report.text if report.text else "(no text)")


def _run(args: argparse.Namespace) -> int:
    config = _load_service_config(args)

    if args.command == "serve":
        import uvicorn

        from .server import create_app

        if args.host:
            config.server.host = args.host
        if args.port:
            config.server.port = args.port
        engine = CaseEngine(config)
        app = create_app(engine)
        uvicorn.run(app, host=config.server.host, port=config.server.port, log_level="warning")
        return EXIT_OK

    engine = CaseEngine(config)
    try:
        if args.command == "ingest":
            if not config.corpus_path:
                raise ConfigError("no corpus path given (use --corpus or the config file)")
            count = engine.ingest(config.corpus_path, mode=args.mode)
            print(f"ingested {count} cases from {config.corpus_path}")
        elif args.command == "build-index":
            added = engine.build_index()
            stats = engine.index.stats()
            print(f"indexed {added} cases ({stats.live_count} live nodes)")
        elif args.command == "compact":
            before = engine.index.stats()
            engine.compact()
            after = engine.index.stats()
            print(
                f"compacted: {before.node_count} nodes "
                f"({before.tombstone_count} tombstones) -> {after.node_count} nodes"
            )
        elif args.command == "search":
            outcome = engine.search(
                args.query,
                k=args.k,
                n=args.n,
                mmr_lambda=args.mmr_lambda,
                jurisdiction=args.jurisdiction,
                now=args.now,
            )
            if args.json:
                docs = engine.store.get_many([r.id for r in outcome.results])
                payload = {
                    "results": [
                        result_to_dict(r, docs.get(r.id)) for r in outcome.results
                    ],
                    "timings": outcome.timings,
                }
                print(json.dumps(payload, indent=2, sort_keys=True))
            else:
                _print_results(outcome)
        elif args.command == "insight":
            report = engine.insight(
                args.query,
                k=args.k,
                n=args.n,
                mmr_lambda=args.mmr_lambda,
                jurisdiction=args.jurisdiction,
                now=args.now,
                max_rounds=args.max_rounds,
                threshold=args.threshold,
                token_budget=args.token_budget,
            )
            if args.json:
                docs = engine.store.get_many(
                    [r.id for r in (report.retrieval or [])]
                )
                print(
                    json.dumps(report_to_dict(report, docs), indent=2, sort_keys=True)
                )
            else:
                _print_report(report)
        elif args.command == "eval":
            queryset = None
            if args.queryset:
                from .evalkit import JudgmentSet

                queryset = JudgmentSet.load(args.queryset)
            report = engine.evaluate(
                n_queries=args.queries, k=args.k, seed=args.seed, queryset=queryset
            )
            if args.json:
                print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
            else:
                print(render_table({engine.kernels.name: report}))
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command!r}")
    finally:
        engine.close()
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except CaseGptError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error[unexpected]: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    raise SystemExit(main())
