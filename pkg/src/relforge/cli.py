"""Command-line entry point: one subcommand per pipeline stage."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .corpus import write_corpus_jsonl
from .pipeline import Pipeline, format_bench_table, format_evaluation_table
from .synthetic import make_synthetic_corpus


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", required=True, type=Path, help="pipeline config (JSON)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relforge",
        description="Build and evaluate graded-relevance test collections for semantic search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic shift-log corpus")
    p_synth.add_argument("--docs", type=int, default=100)
    p_synth.add_argument("--seed", type=int, default=7)
    p_synth.add_argument("--sources", default="A,B", help="comma-separated source tags")
    p_synth.add_argument("--out", type=Path, required=True)

    p_index = sub.add_parser("index", help="encode the corpus with every ensemble encoder")
    _add_config_arg(p_index)

    p_build = sub.add_parser(
        "build-collection", help="generate queries, retrieve, re-rank, and write qrels"
    )
    _add_config_arg(p_build)

    p_export = sub.add_parser("export-annotation", help="write the blinded annotation task file")
    _add_config_arg(p_export)
    p_export.add_argument(
        "--queries",
        help="comma-separated query ids to annotate (default: all accepted queries)",
    )
    p_export.add_argument("--out", type=Path, help="task file path (default: output dir)")

    p_import = sub.add_parser(
        "import-annotation", help="convert the judgment log into qrels-style judgments"
    )
    _add_config_arg(p_import)
    p_import.add_argument("--judgments", type=Path, required=True, help="service judgment log (JSONL)")
    p_import.add_argument("--tasks", type=Path, help="task file (default: output dir)")

    p_eval = sub.add_parser("evaluate", help="score automated methods against human judgments")
    _add_config_arg(p_eval)
    p_eval.add_argument("--judgments", type=Path, required=True, help="judgments TSV")

    p_bench = sub.add_parser("bench-encoders", help="rank candidate encoders on a small qrels")
    _add_config_arg(p_bench)
    p_bench.add_argument("--queries", type=Path, required=True, help="bench queries (JSONL)")
    p_bench.add_argument("--qrels", type=Path, required=True, help="bench qrels (whitespace 4-column)")

    p_serve = sub.add_parser("serve", help="run the annotation service")
    _add_config_arg(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8080)
    p_serve.add_argument("--tasks", type=Path, help="task file (default: output dir)")
    p_serve.add_argument("--static", type=Path, help="directory with the annotation UI bundle")
    p_serve.add_argument("--token", help="shared auth token required on every API call")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)

    if args.command == "synth":
        sources = tuple(s.strip() for s in args.sources.split(",") if s.strip())
        docs = make_synthetic_corpus(n_docs=args.docs, seed=args.seed, sources=sources)
        write_corpus_jsonl(docs, args.out)
        print(f"wrote {len(docs)} documents to {args.out}")
        return 0

    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    pipeline = Pipeline(config)

    if args.command == "index":
        ensemble = pipeline.index()
        print(f"indexed {len(ensemble.doc_ids)} documents with {len(ensemble.indexes)} encoders")
        return 0

    if args.command == "build-collection":
        stats = pipeline.build_collection()
        print(
            f"accepted {stats.queries_accepted} queries "
            f"({stats.queries_rejected} rejected), "
            f"{stats.pairs_scored + stats.pairs_unscored} pairs "
            f"({stats.pairs_unscored} unscored), "
            f"{stats.qrels_lines} qrels lines, {stats.negatives_lines} negatives"
        )
        return 0

    if args.command == "export-annotation":
        query_ids = [q.strip() for q in args.queries.split(",")] if args.queries else None
        path = pipeline.export_annotation(query_ids=query_ids, out_path=args.out)
        print(f"wrote annotation tasks to {path}")
        return 0

    if args.command == "import-annotation":
        path = pipeline.import_annotation(args.judgments, tasks_path=args.tasks)
        print(f"wrote judgments to {path}")
        return 0

    if args.command == "evaluate":
        report = pipeline.evaluate(args.judgments)
        print(format_evaluation_table(report))
        print(f"report written to {pipeline.out / 'evaluation_report.json'}")
        return 0

    if args.command == "bench-encoders":
        rows = pipeline.bench_encoders(args.queries, args.qrels)
        print(format_bench_table(rows))
        return 0

    if args.command == "serve":
        import uvicorn

        from .annotation import create_app

        tasks_path = args.tasks or pipeline.tasks_path
        app = create_app(
            tasks_path,
            pipeline.out / "judgments.log.jsonl",
            static_dir=args.static,
            token=args.token,
        )
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
