"""Document collection: loading, validation, and used-document tracking.

A corpus is a JSONL file of shift-log style documents. Query generation
consumes documents; consumed ids are tracked in a sidecar state file so
pipeline runs are resumable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class CorpusError(Exception):
    """Raised for malformed corpus files or invariant violations."""


@dataclass(frozen=True)
class Document:
    """One text log with an opaque id, optional machinery location, and a
    collection tag."""

    id: str
    text: str
    funcloc: str | None = None
    source: str = "default"


def char_length(doc: Document) -> int:
    """Length of the document text in Unicode scalar values.

    Counts every code point including whitespace; byte length is never used.
    """
    return len(doc.text)


@dataclass
class Corpus:
    documents: list[Document] = field(default_factory=list)
    used_for_query_gen: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for doc in self.documents:
            if not doc.id:
                raise CorpusError("document with empty id")
            if doc.id in seen:
                raise CorpusError(f"duplicate document id {doc.id!r}")
            if not doc.text.strip():
                raise CorpusError(f"document {doc.id!r} has empty text")
            seen.add(doc.id)
        unknown = self.used_for_query_gen - seen
        if unknown:
            raise CorpusError(f"used_for_query_gen references unknown ids: {sorted(unknown)}")

    def __len__(self) -> int:
        return len(self.documents)

    def get(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)

    @property
    def doc_ids(self) -> list[str]:
        return [d.id for d in self.documents]

    @property
    def sources(self) -> list[str]:
        """Distinct source tags in first-appearance order."""
        out: list[str] = []
        for doc in self.documents:
            if doc.source not in out:
                out.append(doc.source)
        return out

    def mark_used(self, doc_ids) -> None:
        ids = set(doc_ids)
        unknown = ids - set(self.doc_ids)
        if unknown:
            raise CorpusError(f"cannot mark unknown ids as used: {sorted(unknown)}")
        self.used_for_query_gen |= ids

    def eligible_for_query_gen(self, min_chars: int, source: str | None = None) -> list[Document]:
        """Unused documents with at least ``min_chars`` characters, in corpus
        order, optionally restricted to one source."""
        if min_chars < 0:
            raise ValueError("min_chars must be >= 0")
        return [
            d
            for d in self.documents
            if char_length(d) >= min_chars
            and d.id not in self.used_for_query_gen
            and (source is None or d.source == source)
        ]


def state_path_for(corpus_path: Path) -> Path:
    """Sidecar state file: corpus.jsonl -> corpus.state.json."""
    if corpus_path.suffix == ".jsonl":
        return corpus_path.with_suffix(".state.json")
    return corpus_path.with_name(corpus_path.name + ".state.json")


def load_corpus(path: str | Path) -> Corpus:
    """Load a corpus from JSONL, plus the used-set sidecar if present.

    Each line must be an object with ``id``, ``text``, optional ``funcloc``
    and ``source``. Malformed lines and duplicate ids are reported with their
    line number.
    """
    path = Path(path)
    documents: list[Document] = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise CorpusError(f"{path}:{lineno}: record is not an object")
            doc_id = record.get("id")
            text = record.get("text")
            if not isinstance(doc_id, str) or not doc_id:
                raise CorpusError(f"{path}:{lineno}: missing or empty 'id'")
            if not isinstance(text, str) or not text.strip():
                raise CorpusError(f"{path}:{lineno}: missing or empty 'text'")
            if doc_id in seen:
                raise CorpusError(
                    f"{path}:{lineno}: duplicate id {doc_id!r} (first seen on line {seen[doc_id]})"
                )
            seen[doc_id] = lineno
            funcloc = record.get("funcloc")
            if funcloc is not None and not isinstance(funcloc, str):
                raise CorpusError(f"{path}:{lineno}: 'funcloc' must be a string or null")
            documents.append(
                Document(
                    id=doc_id,
                    text=text,
                    funcloc=funcloc,
                    source=str(record.get("source", "default")),
                )
            )

    used: set[str] = set()
    state_file = state_path_for(path)
    if state_file.exists():
        state = json.loads(state_file.read_text(encoding="utf-8"))
        used = set(state.get("used_for_query_gen", []))
    return Corpus(documents=documents, used_for_query_gen=used)


def save_corpus_state(corpus: Corpus, corpus_path: str | Path) -> Path:
    """Persist the used-document set next to the corpus file."""
    state_file = state_path_for(Path(corpus_path))
    payload = {"used_for_query_gen": sorted(corpus.used_for_query_gen)}
    state_file.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return state_file


def write_corpus_jsonl(documents: list[Document], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for doc in documents:
            fh.write(
                json.dumps(
                    {"id": doc.id, "text": doc.text, "funcloc": doc.funcloc, "source": doc.source},
                    ensure_ascii=False,
                )
                + "\n"
            )
