"""Per-encoder embedding matrices and exhaustive similarity scoring.

Query-document similarity is computed in two stages: the mean cosine over a
query's paraphrase set per encoder, then the mean of those values across the
ensemble. Retrieval is a full linear scan; no pruning, so every document
gets a score. Mean similarity is binned to an ensemble relevance grade in
{1, 2, 3}.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import Corpus
from .encoders import EncoderError

NORM_TOLERANCE = 1e-6
DEFAULT_MIN_SIM = 0.5
DEFAULT_MIN_DOCS = 2
DEFAULT_BIN_EDGES = (0.5, 0.6, 0.7)


class IndexBuildError(Exception):
    """Raised for misaligned or malformed indexes."""


@dataclass
class EncoderIndex:
    """Embedding matrix for one encoder; row i belongs to doc_ids[i]."""

    encoder_name: str
    doc_ids: list[str]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.doc_ids):
            raise IndexBuildError(
                f"matrix shape {self.matrix.shape} does not match {len(self.doc_ids)} doc ids"
            )
        norms = np.linalg.norm(self.matrix, axis=1)
        if self.matrix.shape[0] and np.max(np.abs(norms - 1.0)) > NORM_TOLERANCE:
            raise IndexBuildError(f"encoder {self.encoder_name!r}: rows are not unit-normalized")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    def row_of(self, doc_id: str) -> int:
        try:
            return self.doc_ids.index(doc_id)
        except ValueError:
            raise KeyError(doc_id) from None


@dataclass
class EnsembleIndex:
    """One EncoderIndex per ensemble member, all sharing the same doc order."""

    indexes: list[EncoderIndex]

    def __post_init__(self) -> None:
        if not self.indexes:
            raise IndexBuildError("ensemble index needs at least one encoder index")
        first = self.indexes[0].doc_ids
        for idx in self.indexes[1:]:
            if idx.doc_ids != first:
                raise IndexBuildError("encoder indexes disagree on document ids or order")

    @property
    def doc_ids(self) -> list[str]:
        return self.indexes[0].doc_ids

    @property
    def encoder_names(self) -> list[str]:
        return [idx.encoder_name for idx in self.indexes]

    def index_for(self, encoder_name: str) -> EncoderIndex:
        for idx in self.indexes:
            if idx.encoder_name == encoder_name:
                return idx
        raise KeyError(encoder_name)


@dataclass
class SimilarityRecord:
    """Scored query-document pair: per-encoder means and their ensemble mean."""

    query_id: str
    doc_id: str
    per_encoder_sim: dict[str, float]
    mean_sim: float
    pinned: bool = field(default=False)


@dataclass(frozen=True)
class Rejected:
    """Retrieval verdict when fewer than the required number of documents
    clear the similarity threshold; the query must be discarded."""

    qualifying: int


def build_index(corpus: Corpus, encoders: list, batch_size: int | None = None) -> EnsembleIndex:
    """Encode every document once per encoder; rows stay aligned across the
    ensemble. Aborts with the failing document batch on encoder failure."""
    if len(corpus) == 0:
        raise ValueError("cannot index an empty corpus")
    if not encoders:
        raise ValueError("ensemble must contain at least one encoder")
    texts = [d.text for d in corpus.documents]
    doc_ids = corpus.doc_ids
    indexes = []
    for encoder in encoders:
        step = batch_size or encoder.spec.batch_size
        rows = []
        for start in range(0, len(texts), step):
            batch = texts[start : start + step]
            try:
                rows.append(encoder.encode(batch))
            except EncoderError as exc:
                raise EncoderError(
                    f"indexing failed on documents {doc_ids[start]}..{doc_ids[min(start + step, len(doc_ids)) - 1]}: {exc}"
                ) from exc
        indexes.append(
            EncoderIndex(encoder_name=encoder.spec.name, doc_ids=doc_ids, matrix=np.vstack(rows))
        )
    return EnsembleIndex(indexes=indexes)


def paraphrase_mean_sim(index: EncoderIndex, qp: np.ndarray, doc_row: int) -> float:
    """Mean cosine similarity between a document row and every vector in the
    paraphrase set (query plus paraphrases). Vectors are unit-norm, so the
    cosine is a dot product."""
    qp = np.asarray(qp, dtype=np.float64)
    if qp.ndim != 2 or qp.shape[0] == 0:
        raise ValueError("paraphrase set must be a non-empty 2-d array")
    if qp.shape[1] != index.dimension:
        raise EncoderError(
            f"dimension mismatch: paraphrase set has {qp.shape[1]}, index has {index.dimension}"
        )
    doc_vec = index.matrix[doc_row]
    return float(np.mean(qp @ doc_vec))


def ensemble_sim(
    index: EnsembleIndex,
    qp_per_encoder: dict[str, np.ndarray],
    doc_id: str,
    query_id: str = "",
) -> SimilarityRecord:
    """Average the per-encoder paraphrase means into one similarity."""
    per_encoder: dict[str, float] = {}
    for enc_index in index.indexes:
        if enc_index.encoder_name not in qp_per_encoder:
            raise KeyError(f"no paraphrase embeddings for encoder {enc_index.encoder_name!r}")
        row = enc_index.row_of(doc_id)
        per_encoder[enc_index.encoder_name] = paraphrase_mean_sim(
            enc_index, qp_per_encoder[enc_index.encoder_name], row
        )
    mean_sim = float(np.mean(list(per_encoder.values())))
    return SimilarityRecord(
        query_id=query_id, doc_id=doc_id, per_encoder_sim=per_encoder, mean_sim=mean_sim
    )


def score_all_documents(
    index: EnsembleIndex, qp_per_encoder: dict[str, np.ndarray], query_id: str = ""
) -> list[SimilarityRecord]:
    """Vectorized ensemble_sim over the whole corpus (one linear scan)."""
    per_encoder_means = []
    for enc_index in index.indexes:
        if enc_index.encoder_name not in qp_per_encoder:
            raise KeyError(f"no paraphrase embeddings for encoder {enc_index.encoder_name!r}")
        qp = np.asarray(qp_per_encoder[enc_index.encoder_name], dtype=np.float64)
        if qp.shape[1] != enc_index.dimension:
            raise EncoderError(
                f"dimension mismatch for encoder {enc_index.encoder_name!r}"
            )
        sims = qp @ enc_index.matrix.T
        per_encoder_means.append(np.mean(sims, axis=0))
    stacked = np.vstack(per_encoder_means)
    mean_sims = np.mean(stacked, axis=0)
    names = index.encoder_names
    return [
        SimilarityRecord(
            query_id=query_id,
            doc_id=doc_id,
            per_encoder_sim={name: float(stacked[k, i]) for k, name in enumerate(names)},
            mean_sim=float(mean_sims[i]),
        )
        for i, doc_id in enumerate(index.doc_ids)
    ]


def pin_source_document(
    records: list[SimilarityRecord], source_doc_id: str
) -> list[SimilarityRecord]:
    """Force the query's source document to similarity 1.0 so it is always
    retrieved and ranked first. Other records are untouched."""
    out: list[SimilarityRecord] = []
    found = False
    for record in records:
        if record.doc_id == source_doc_id:
            out.append(replace(record, mean_sim=1.0, pinned=True))
            found = True
        else:
            out.append(record)
    if not found:
        raise KeyError(f"source document {source_doc_id!r} not among scored records")
    return out


def retrieve(
    records: list[SimilarityRecord],
    min_sim: float = DEFAULT_MIN_SIM,
    min_docs: int = DEFAULT_MIN_DOCS,
) -> list[SimilarityRecord] | Rejected:
    """Keep records with mean similarity >= ``min_sim``, sorted by descending
    similarity (ties by ascending doc id). Returns Rejected when fewer than
    ``min_docs`` qualify."""
    qualifying = [r for r in records if r.mean_sim >= min_sim]
    if len(qualifying) < min_docs:
        return Rejected(qualifying=len(qualifying))
    return sorted(qualifying, key=lambda r: (-r.mean_sim, r.doc_id))


def bin_similarity(mean_sim: float, edges: tuple[float, float, float] = DEFAULT_BIN_EDGES) -> int:
    """Convert mean similarity to the ensemble relevance grade.

    Grade 1 for [edges[0], edges[1]), 2 for [edges[1], edges[2]), 3 at or
    above edges[2]. Values below the retrieval threshold are never binned.
    """
    low, mid, high = edges
    if mean_sim < low:
        raise ValueError(f"similarity {mean_sim} is below the retrieval threshold {low}")
    if mean_sim < mid:
        return 1
    if mean_sim < high:
        return 2
    return 3
