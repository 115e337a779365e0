"""Run orchestration: index, build the collection, export/import annotation
tasks, evaluate against judgments, and benchmark candidate encoders.

The orchestrator owns every file format: embedding caches, queries.jsonl,
candidates.jsonl, TREC-style qrels, annotation task files, the judgment log
import, evaluation reports, and the run manifest. Stages are resumable from
their state files and idempotent when already complete.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig
from .corpus import Corpus, load_corpus, save_corpus_state
from .encoders import EncoderSpec, build_encoder
from .metrics import (
    AutomatedScores,
    JudgmentSet,
    RankedList,
    average_precision_at_n,
    evaluation_report,
    load_judgments_tsv,
    ndcg,
    precision_recall_f1_at_n,
    reciprocal_rank,
)
from .query_gen import (
    HttpLlmClient,
    LlmError,
    build_generation_prompt,
    load_template,
    mock_llm_client,
    parse_generation_reply,
    queries_per_document,
    select_source_documents,
)
from .rerank import RerankOutcome, score_pair
from .vector_index import (
    EncoderIndex,
    EnsembleIndex,
    Rejected,
    bin_similarity,
    pin_source_document,
    retrieve,
    score_all_documents,
)

logger = logging.getLogger(__name__)

BENCH_METRIC_NAMES = ("p_at_10", "r_at_10", "f1_at_10", "map_at_10", "mrr", "ndcg_at_10")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _corpus_fingerprint(corpus: Corpus) -> str:
    digest = hashlib.sha256()
    for doc in corpus.documents:
        digest.update(doc.id.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(doc.text.encode("utf-8"))
        digest.update(b"\x01")
    return digest.hexdigest()


@dataclass
class BuildStats:
    queries_generated: int = 0
    queries_accepted: int = 0
    queries_rejected: int = 0
    pairs_scored: int = 0
    pairs_unscored: int = 0
    qrels_lines: int = 0
    negatives_lines: int = 0
    accepted_per_source: dict = field(default_factory=dict)


class Pipeline:
    def __init__(self, config: PipelineConfig, llm_client=None):
        self.config = config
        self.out = Path(config.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "emb_cache").mkdir(exist_ok=True)
        if llm_client is not None:
            self._llm = llm_client
        elif config.llm.kind == "mock":
            self._llm = mock_llm_client()
        else:
            self._llm = HttpLlmClient(
                endpoint=config.llm.endpoint,
                model=config.llm.model,
                temperature=config.llm.temperature,
                seed=config.llm.seed,
                api_key_env=config.llm.api_key_env,
            )
        self._generation_template = load_template("query_generation.txt", config.templates_dir)
        self._scoring_template = load_template("relevance_scoring.txt", config.templates_dir)

    # --- paths ---------------------------------------------------------------

    @property
    def queries_path(self) -> Path:
        return self.out / "queries.jsonl"

    @property
    def candidates_path(self) -> Path:
        return self.out / "candidates.jsonl"

    @property
    def qrels_path(self) -> Path:
        return self.out / "qrels.txt"

    @property
    def negatives_path(self) -> Path:
        return self.out / "qrels_negatives.txt"

    @property
    def manifest_path(self) -> Path:
        return self.out / "run_manifest.json"

    @property
    def build_state_path(self) -> Path:
        return self.out / "build_state.json"

    @property
    def tasks_path(self) -> Path:
        return self.out / "annotation_tasks.jsonl"

    def _cache_path(self, encoder_name: str) -> Path:
        safe = re.sub(r"[^\w.-]", "_", encoder_name)
        return self.out / "emb_cache" / f"{safe}.npz"

    # --- manifest -------------------------------------------------------------

    def _load_manifest(self) -> dict:
        if self.manifest_path.exists():
            return json.loads(self.manifest_path.read_text(encoding="utf-8"))
        return {"tool_version": __version__, "config": self.config.snapshot(), "stages": {}}

    def _update_manifest(self, stage: str, payload: dict) -> None:
        manifest = self._load_manifest()
        manifest["tool_version"] = __version__
        manifest["config"] = self.config.snapshot()
        manifest["stages"][stage] = payload
        manifest["updated_at"] = _now()
        self.manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")

    # --- stage: index ----------------------------------------------------------

    def _load_cached_index(self, spec: EncoderSpec, fingerprint: str) -> EncoderIndex | None:
        path = self._cache_path(spec.name)
        if not path.exists():
            return None
        try:
            with np.load(path, allow_pickle=False) as data:
                if str(data["fingerprint"]) != fingerprint:
                    logger.info("cache for %s is stale; re-encoding", spec.name)
                    return None
                doc_ids = [str(x) for x in data["doc_ids"]]
                matrix = np.asarray(data["matrix"], dtype=np.float64)
            return EncoderIndex(encoder_name=spec.name, doc_ids=doc_ids, matrix=matrix)
        except Exception as exc:  # corrupted cache: recover by re-encoding
            logger.warning("cache for %s unreadable (%s); re-encoding", spec.name, exc)
            return None

    def _save_cache(self, index: EncoderIndex, fingerprint: str) -> None:
        np.savez(
            self._cache_path(index.encoder_name),
            doc_ids=np.asarray(index.doc_ids, dtype=np.str_),
            matrix=index.matrix.astype(np.float32),
            fingerprint=np.asarray(fingerprint),
        )

    def index(self) -> EnsembleIndex:
        """Encode the corpus with every ensemble member, reusing per-encoder
        caches when the corpus is unchanged. Similarities downstream always
        read the cached single-precision matrices, so cached and fresh runs
        agree bit-for-bit."""
        self.config.validate_paths()
        started = _now()
        corpus = load_corpus(self.config.corpus_path)
        fingerprint = _corpus_fingerprint(corpus)
        indexes: list[EncoderIndex] = []
        cache_hits = 0
        for spec in self.config.encoders:
            cached = self._load_cached_index(spec, fingerprint)
            if cached is not None:
                indexes.append(cached)
                cache_hits += 1
                continue
            encoder = build_encoder(spec)
            texts = [d.text for d in corpus.documents]
            rows = []
            for start in range(0, len(texts), spec.batch_size):
                rows.append(encoder.encode(texts[start : start + spec.batch_size]))
            fresh = EncoderIndex(
                encoder_name=spec.name, doc_ids=corpus.doc_ids, matrix=np.vstack(rows)
            )
            self._save_cache(fresh, fingerprint)
            reloaded = self._load_cached_index(spec, fingerprint)
            indexes.append(reloaded if reloaded is not None else fresh)
        ensemble = EnsembleIndex(indexes=indexes)
        self._update_manifest(
            "index",
            {
                "documents": len(corpus),
                "encoders": [s.name for s in self.config.encoders],
                "cache_hits": cache_hits,
                "started_at": started,
                "finished_at": _now(),
            },
        )
        return ensemble

    # --- stage: build collection -----------------------------------------------

    def _encode_query_set(self, encoders, qp_texts: list[str]) -> dict[str, np.ndarray]:
        return {enc.spec.name: enc.encode(qp_texts) for enc in encoders}

    def _generate_query_sets(self, doc):
        """One LLM call per document; a reply with no parseable query is
        retried once before the stage halts."""
        query_num = queries_per_document(
            doc, self.config.long_doc_threshold, self.config.multi_query_count
        )
        prompt = build_generation_prompt(doc, query_num, template=self._generation_template)
        try:
            return parse_generation_reply(self._llm.complete(prompt), doc.id)
        except LlmError:
            logger.warning("query generation failed for %s; retrying once", doc.id)
            return parse_generation_reply(self._llm.complete(prompt), doc.id)

    def _rerank_pairs(self, query: str, docs: list, ensemble_scores: list[int]) -> list[RerankOutcome]:
        workers = max(1, self.config.llm.max_in_flight)
        if workers == 1 or len(docs) <= 1:
            return [
                score_pair(self._llm, query, doc, ens, template=self._scoring_template)
                for doc, ens in zip(docs, ensemble_scores)
            ]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(
                pool.map(
                    lambda pair: score_pair(
                        self._llm, query, pair[0], pair[1], template=self._scoring_template
                    ),
                    zip(docs, ensemble_scores),
                )
            )

    def _load_build_state(self) -> dict | None:
        if self.build_state_path.exists():
            return json.loads(self.build_state_path.read_text(encoding="utf-8"))
        return None

    def _save_build_state(self, stats: BuildStats, complete: bool) -> None:
        payload = {
            "complete": complete,
            "queries_generated": stats.queries_generated,
            "queries_accepted": stats.queries_accepted,
            "queries_rejected": stats.queries_rejected,
            "pairs_scored": stats.pairs_scored,
            "pairs_unscored": stats.pairs_unscored,
            "qrels_lines": stats.qrels_lines,
            "negatives_lines": stats.negatives_lines,
            "accepted_per_source": stats.accepted_per_source,
        }
        self.build_state_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    def build_collection(self) -> BuildStats:
        """Generate queries per source until the accepted-query budget is met
        or eligible documents run out; retrieve, grade, re-rank, and write
        queries.jsonl, candidates.jsonl and the qrels files.

        Accepted means retrieval found at least min_docs documents at or
        above min_sim; rejected queries count toward nothing but the
        manifest. The stage is resumable: progress persists after every
        source document, and a completed build is a no-op.
        """
        state = self._load_build_state()
        if state and state.get("complete"):
            logger.info("build_collection already complete; nothing to do")
            return self._stats_from_state(state)

        started = _now()
        ensemble_index = self.index()
        corpus = load_corpus(self.config.corpus_path)
        encoders = [build_encoder(spec) for spec in self.config.encoders]

        stats = self._stats_from_state(state) if state else BuildStats()
        fresh_start = state is None
        if fresh_start:
            for path in (self.queries_path, self.candidates_path, self.qrels_path, self.negatives_path):
                path.write_text("", encoding="utf-8")
            self._save_build_state(stats, complete=False)

        queries_fh = self.queries_path.open("a", encoding="utf-8")
        candidates_fh = self.candidates_path.open("a", encoding="utf-8")
        qrels_fh = self.qrels_path.open("a", encoding="utf-8")
        negatives_fh = self.negatives_path.open("a", encoding="utf-8")
        try:
            for source in corpus.sources:
                accepted = stats.accepted_per_source.get(source, 0)
                source_seed = self.config.rng_seed ^ zlib.crc32(source.encode("utf-8"))
                iteration = 0
                while accepted < self.config.query_budget_per_source:
                    eligible = corpus.eligible_for_query_gen(
                        self.config.min_query_doc_chars, source=source
                    )
                    if not eligible:
                        logger.info("source %s exhausted at %d accepted queries", source, accepted)
                        break
                    doc = select_source_documents(
                        corpus,
                        rng_seed=source_seed + iteration,
                        count=1,
                        min_chars=self.config.min_query_doc_chars,
                        source=source,
                    )[0]
                    iteration += 1
                    try:
                        query_sets = self._generate_query_sets(doc)
                    except LlmError:
                        save_corpus_state(corpus, self.config.corpus_path)
                        self._save_build_state(stats, complete=False)
                        raise
                    stats.queries_generated += len(query_sets)
                    for query_set in query_sets:
                        qp_embeddings = self._encode_query_set(encoders, query_set.qp)
                        records = score_all_documents(
                            ensemble_index, qp_embeddings, query_id=query_set.query_id
                        )
                        records = pin_source_document(records, doc.id)
                        result = retrieve(
                            records,
                            min_sim=self.config.thresholds.min_sim,
                            min_docs=self.config.thresholds.min_docs,
                        )
                        if isinstance(result, Rejected):
                            stats.queries_rejected += 1
                            continue
                        stats.queries_accepted += 1
                        accepted += 1
                        queries_fh.write(
                            json.dumps(
                                {
                                    "query_id": query_set.query_id,
                                    "source_doc_id": query_set.source_doc_id,
                                    "query": query_set.query,
                                    "paraphrases": query_set.paraphrases,
                                },
                                ensure_ascii=False,
                            )
                            + "\n"
                        )
                        ensemble_scores = [
                            bin_similarity(r.mean_sim, self.config.thresholds.bin_edges)
                            for r in result
                        ]
                        pair_docs = [corpus.get(r.doc_id) for r in result]
                        outcomes = self._rerank_pairs(query_set.query, pair_docs, ensemble_scores)
                        for record, ens_score, outcome in zip(result, ensemble_scores, outcomes):
                            if outcome.unscored:
                                stats.pairs_unscored += 1
                            else:
                                stats.pairs_scored += 1
                            candidates_fh.write(
                                json.dumps(
                                    {
                                        "query_id": record.query_id,
                                        "doc_id": record.doc_id,
                                        "per_encoder_sim": record.per_encoder_sim,
                                        "mean_sim": record.mean_sim,
                                        "pinned": record.pinned,
                                        "ensemble_score": ens_score,
                                        "llm_score": outcome.llm_score,
                                        "combined_score": outcome.combined_score,
                                        "unscored": outcome.unscored,
                                    },
                                    ensure_ascii=False,
                                )
                                + "\n"
                            )
                            if outcome.combined_score >= 1:
                                qrels_fh.write(
                                    f"{record.query_id} 0 {record.doc_id} {outcome.combined_score}\n"
                                )
                                stats.qrels_lines += 1
                            else:
                                negatives_fh.write(
                                    f"{record.query_id} 0 {record.doc_id} {outcome.combined_score}\n"
                                )
                                stats.negatives_lines += 1
                    stats.accepted_per_source[source] = accepted
                    save_corpus_state(corpus, self.config.corpus_path)
                    self._save_build_state(stats, complete=False)
        finally:
            for fh in (queries_fh, candidates_fh, qrels_fh, negatives_fh):
                fh.close()

        self._save_build_state(stats, complete=True)
        self._update_manifest(
            "build_collection",
            {
                "documents": len(corpus),
                "queries_generated": stats.queries_generated,
                "queries_accepted": stats.queries_accepted,
                "queries_rejected": stats.queries_rejected,
                "pairs_scored": stats.pairs_scored,
                "pairs_unscored": stats.pairs_unscored,
                "qrels_lines": stats.qrels_lines,
                "negatives_lines": stats.negatives_lines,
                "started_at": started,
                "finished_at": _now(),
            },
        )
        return stats

    @staticmethod
    def _stats_from_state(state: dict) -> BuildStats:
        return BuildStats(
            queries_generated=state.get("queries_generated", 0),
            queries_accepted=state.get("queries_accepted", 0),
            queries_rejected=state.get("queries_rejected", 0),
            pairs_scored=state.get("pairs_scored", 0),
            pairs_unscored=state.get("pairs_unscored", 0),
            qrels_lines=state.get("qrels_lines", 0),
            negatives_lines=state.get("negatives_lines", 0),
            accepted_per_source=dict(state.get("accepted_per_source", {})),
        )

    # --- loading built artifacts -------------------------------------------------

    def load_queries(self) -> list[dict]:
        with self.queries_path.open(encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def load_candidates(self) -> list[dict]:
        with self.candidates_path.open(encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    # --- stage: export annotation --------------------------------------------------

    def export_annotation(self, query_ids: list[str] | None = None, out_path: Path | None = None) -> Path:
        """Write the annotator-facing task file: per selected query, the
        retrieved pairs ordered by combined score descending, capped, and
        stripped of every automated score."""
        out_path = out_path or self.tasks_path
        queries = {q["query_id"]: q for q in self.load_queries()}
        candidates = self.load_candidates()
        corpus = load_corpus(self.config.corpus_path)
        if query_ids is None:
            selected = list(queries)
        else:
            unknown = [q for q in query_ids if q not in queries]
            if unknown:
                raise ValueError(f"unknown query ids: {unknown}")
            selected = list(query_ids)

        by_query: dict[str, list[dict]] = {}
        for record in candidates:
            by_query.setdefault(record["query_id"], []).append(record)

        position = 0
        task_count = 0
        with Path(out_path).open("w", encoding="utf-8") as fh:
            for query_id in selected:
                pairs = sorted(
                    by_query.get(query_id, []),
                    key=lambda r: (-r["combined_score"], r["doc_id"]),
                )[: self.config.annotation_pair_cap]
                for record in pairs:
                    position += 1
                    task_count += 1
                    doc = corpus.get(record["doc_id"])
                    fh.write(
                        json.dumps(
                            {
                                "task_id": f"t{position:06d}",
                                "position": position,
                                "query_id": query_id,
                                "doc_id": record["doc_id"],
                                "query": queries[query_id]["query"],
                                "text": doc.text,
                                "funcloc": doc.funcloc,
                            },
                            ensure_ascii=False,
                        )
                        + "\n"
                    )
        self._update_manifest(
            "export_annotation",
            {"queries": len(selected), "tasks": task_count, "finished_at": _now()},
        )
        return Path(out_path)

    # --- stage: import annotation ---------------------------------------------------

    def import_annotation(
        self,
        judgment_log: Path,
        tasks_path: Path | None = None,
        out_tsv: Path | None = None,
        out_meta: Path | None = None,
    ) -> Path:
        """Join the service's append-only judgment log with the task file and
        write qrels-style judgments (latest judgment per task wins) plus
        annotator metadata."""
        tasks_path = tasks_path or self.tasks_path
        out_tsv = out_tsv or self.out / "judgments.tsv"
        out_meta = out_meta or self.out / "judgments_meta.jsonl"
        tasks: dict[str, dict] = {}
        with Path(tasks_path).open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    task = json.loads(line)
                    tasks[task["task_id"]] = task
        latest: dict[str, dict] = {}
        annotators: dict[str, int] = {}
        with Path(judgment_log).open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                judgment = json.loads(line)
                task_id = judgment["task_id"]
                if task_id not in tasks:
                    raise ValueError(f"judgment references unknown task {task_id!r}")
                latest[task_id] = judgment
        for judgment in latest.values():
            annotators[judgment["annotator_id"]] = annotators.get(judgment["annotator_id"], 0) + 1

        ordered = sorted(latest.values(), key=lambda j: tasks[j["task_id"]]["position"])
        with Path(out_tsv).open("w", encoding="utf-8") as fh:
            for judgment in ordered:
                task = tasks[judgment["task_id"]]
                fh.write(f"{task['query_id']}\t0\t{task['doc_id']}\t{judgment['score']}\n")
        with Path(out_meta).open("w", encoding="utf-8") as fh:
            for annotator_id in sorted(annotators):
                fh.write(
                    json.dumps(
                        {
                            "annotator_id": annotator_id,
                            "judgments": annotators[annotator_id],
                            "imported_at": _now(),
                        }
                    )
                    + "\n"
                )
        self._update_manifest(
            "import_annotation",
            {"judgments": len(latest), "annotators": sorted(annotators), "finished_at": _now()},
        )
        return Path(out_tsv)

    # --- stage: evaluate ---------------------------------------------------------------

    def evaluate(self, judgments_path: Path) -> dict:
        """Per-source evaluation of all three scoring methods against human
        judgments, plus the unweighted average across sources. Judged pairs
        not found among the candidates are listed and excluded."""
        judgments = load_judgments_tsv(judgments_path)
        candidates = self.load_candidates()
        queries = {q["query_id"]: q for q in self.load_queries()}
        corpus = load_corpus(self.config.corpus_path)

        automated = [
            AutomatedScores(
                query_id=c["query_id"],
                doc_id=c["doc_id"],
                ensemble=c["ensemble_score"],
                llm=c["llm_score"],
                combined=c["combined_score"],
            )
            for c in candidates
        ]
        known = {(a.query_id, a.doc_id) for a in automated}
        usable, skipped = [], []
        for entry in judgments.entries:
            if (entry[0], entry[1]) in known:
                usable.append(entry)
            else:
                skipped.append((entry[0], entry[1]))
        if skipped:
            logger.warning("excluding %d judged pairs unknown to the pipeline: %s",
                           len(skipped), skipped[:10])
        if not usable:
            raise ValueError("no judged pair matches the built collection")

        def source_of(query_id: str) -> str:
            return corpus.get(queries[query_id]["source_doc_id"]).source

        by_source: dict[str, list] = {}
        for entry in usable:
            by_source.setdefault(source_of(entry[0]), []).append(entry)

        report: dict = {
            "annotator_id": judgments.annotator_id,
            "judged_pairs": len(usable),
            "skipped_pairs": [list(p) for p in skipped],
            "sources": {},
        }
        for source in sorted(by_source):
            subset = JudgmentSet(entries=by_source[source], annotator_id=judgments.annotator_id)
            report["sources"][source] = evaluation_report(
                subset, automated, alpha_level=self.config.alpha_level
            )
        report["average"] = _average_reports([report["sources"][s] for s in report["sources"]])

        report_path = self.out / "evaluation_report.json"
        report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        (self.out / "evaluation_report.txt").write_text(
            format_evaluation_table(report), encoding="utf-8"
        )
        self._update_manifest(
            "evaluate",
            {
                "judged_pairs": len(usable),
                "skipped_pairs": len(skipped),
                "sources": sorted(by_source),
                "finished_at": _now(),
            },
        )
        return report

    # --- stage: encoder benchmark ----------------------------------------------------------

    def bench_encoders(self, queries_path: Path, qrels_path: Path) -> list[dict]:
        """Rank every configured encoder by the unweighted average of six
        retrieval metrics on a small manually judged collection."""
        self.config.validate_paths()
        corpus = load_corpus(self.config.corpus_path)
        fingerprint = _corpus_fingerprint(corpus)
        bench_queries: list[dict] = []
        with Path(queries_path).open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    bench_queries.append(json.loads(line))
        if not bench_queries:
            raise ValueError(f"{queries_path}: no queries")
        qrels = load_judgments_tsv(qrels_path)
        labels: dict[tuple[str, str], int] = {
            (q, d): score for q, d, score in qrels.entries
        }

        rows: list[dict] = []
        for spec in self.config.encoders:
            cached = self._load_cached_index(spec, fingerprint)
            encoder = build_encoder(spec)
            if cached is None:
                texts = [d.text for d in corpus.documents]
                chunks = [
                    encoder.encode(texts[i : i + spec.batch_size])
                    for i in range(0, len(texts), spec.batch_size)
                ]
                cached = EncoderIndex(
                    encoder_name=spec.name, doc_ids=corpus.doc_ids, matrix=np.vstack(chunks)
                )
                self._save_cache(cached, fingerprint)

            ranked_lists: list[RankedList] = []
            for bench_query in bench_queries:
                query_vec = encoder.encode([bench_query["query"]])[0]
                sims = cached.matrix @ query_vec
                order = sorted(range(len(sims)), key=lambda i: (-sims[i], cached.doc_ids[i]))
                query_id = bench_query["query_id"]
                doc_ids = [cached.doc_ids[i] for i in order]
                total_relevant = sum(
                    1 for (q, _), score in labels.items() if q == query_id and score >= 1
                )
                ranked_lists.append(
                    RankedList(
                        query_id=query_id,
                        doc_ids=doc_ids,
                        labels=[labels.get((query_id, d), 0) for d in doc_ids],
                        total_relevant=total_relevant,
                    )
                )

            p_values, r_values, f1_values = [], [], []
            for ranked in ranked_lists:
                p, r, f1 = precision_recall_f1_at_n(ranked, 10)
                p_values.append(p)
                r_values.append(r)
                f1_values.append(f1)
            row = {
                "encoder": spec.name,
                "p_at_10": float(np.mean(p_values)),
                "r_at_10": float(np.mean(r_values)),
                "f1_at_10": float(np.mean(f1_values)),
                "map_at_10": float(np.mean([average_precision_at_n(rl, 10) for rl in ranked_lists])),
                "mrr": float(np.mean([reciprocal_rank(rl) for rl in ranked_lists])),
                "ndcg_at_10": float(np.mean([ndcg(rl, cutoff=10) for rl in ranked_lists])),
            }
            row["avg"] = float(np.mean([row[name] for name in BENCH_METRIC_NAMES]))
            rows.append(row)

        rows.sort(key=lambda r: (-r["avg"], r["encoder"]))
        for rank, row in enumerate(rows, start=1):
            row["rank"] = rank
        report_path = self.out / "bench_report.json"
        report_path.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
        (self.out / "bench_report.txt").write_text(format_bench_table(rows), encoding="utf-8")
        self._update_manifest(
            "bench_encoders",
            {"encoders": [r["encoder"] for r in rows], "queries": len(bench_queries), "finished_at": _now()},
        )
        return rows


def _average_reports(reports: list[dict]) -> dict:
    """Unweighted mean of every numeric metric across per-source reports."""
    averaged: dict = {"methods": {}}
    if not reports:
        return averaged
    method_names = reports[0]["methods"].keys()
    numeric_keys = (
        "alpha",
        "macro_precision",
        "macro_recall",
        "macro_f1",
        "balanced_accuracy",
        "ndcg",
    )
    for method in method_names:
        entry: dict = {}
        for key in numeric_keys:
            values = [
                r["methods"][method].get(key)
                for r in reports
                if r["methods"][method].get(key) is not None
            ]
            entry[key] = float(np.mean(values)) if values else None
        entry["compared_pairs"] = int(
            sum(r["methods"][method].get("compared_pairs", 0) for r in reports)
        )
        averaged["methods"][method] = entry
    return averaged


def format_evaluation_table(report: dict) -> str:
    """Human-readable per-source table; agreement and the other metrics are
    shown multiplied by 100, matching common reporting practice."""
    lines = []
    header = f"{'Source':<10} {'Method':<10} {'Alpha':>8} {'Prec':>8} {'Recall':>8} {'F1':>8} {'BalAcc':>8} {'nDCG':>8}"
    lines.append(header)
    lines.append("-" * len(header))

    def fmt(value) -> str:
        return f"{value * 100:8.2f}" if value is not None else f"{'--':>8}"

    sections = list(report.get("sources", {}).items()) + [("Average", report.get("average", {}))]
    for source, section in sections:
        for method, entry in section.get("methods", {}).items():
            if entry.get("compared_pairs", 0) == 0:
                continue
            lines.append(
                f"{source:<10} {method:<10} "
                f"{fmt(entry.get('alpha'))} {fmt(entry.get('macro_precision'))} "
                f"{fmt(entry.get('macro_recall'))} {fmt(entry.get('macro_f1'))} "
                f"{fmt(entry.get('balanced_accuracy'))} {fmt(entry.get('ndcg'))}"
            )
    return "\n".join(lines) + "\n"


def format_bench_table(rows: list[dict]) -> str:
    lines = []
    header = (
        f"{'Rank':<5} {'Encoder':<28} {'P@10':>7} {'R@10':>7} {'F1@10':>7} "
        f"{'MAP@10':>7} {'MRR':>7} {'nDCG@10':>8} {'AVG':>7}"
    )
    lines.append(header)
    lines.append("-" * len(header))
    for row in rows:
        lines.append(
            f"{row['rank']:<5} {row['encoder']:<28} "
            f"{row['p_at_10'] * 100:7.2f} {row['r_at_10'] * 100:7.2f} {row['f1_at_10'] * 100:7.2f} "
            f"{row['map_at_10'] * 100:7.2f} {row['mrr'] * 100:7.2f} {row['ndcg_at_10'] * 100:8.2f} "
            f"{row['avg'] * 100:7.2f}"
        )
    return "\n".join(lines) + "\n"
