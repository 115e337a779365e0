import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relforge.corpus import Corpus
from relforge.encoders import EncoderError, MockEncoder, l2_normalize
from relforge.vector_index import (
    EncoderIndex,
    EnsembleIndex,
    IndexBuildError,
    Rejected,
    SimilarityRecord,
    bin_similarity,
    build_index,
    ensemble_sim,
    paraphrase_mean_sim,
    pin_source_document,
    retrieve,
    score_all_documents,
)


def unit_rows(rng, n, dim):
    return np.vstack([l2_normalize(rng.standard_normal(dim)) for _ in range(n)])


def toy_index(rng, n_docs=4, dim=8, name="enc"):
    return EncoderIndex(
        encoder_name=name,
        doc_ids=[f"d{i}" for i in range(n_docs)],
        matrix=unit_rows(rng, n_docs, dim),
    )


# --- oracles -----------------------------------------------------------------


def oracle_pair_mean(qp_rows, doc_vec):
    total = 0.0
    for row in qp_rows:
        total += float(np.dot(row, doc_vec))
    return total / len(qp_rows)


def oracle_ensemble_mean(per_encoder_qp, matrices, doc_row):
    values = []
    for name, qp in per_encoder_qp.items():
        values.append(oracle_pair_mean(qp, matrices[name][doc_row]))
    return sum(values) / len(values)


def oracle_retrieve(records, min_sim, min_docs):
    kept = [r for r in records if r.mean_sim >= min_sim]
    if len(kept) < min_docs:
        return None
    return sorted(kept, key=lambda r: (-r.mean_sim, r.doc_id))


# --- index construction --------------------------------------------------------


def test_build_index_shapes(synth_corpus, mock_encoders):
    small = Corpus(documents=synth_corpus.documents[:3])
    index = build_index(small, mock_encoders)
    assert len(index.indexes) == 3
    for enc_index, encoder in zip(index.indexes, mock_encoders):
        assert enc_index.matrix.shape == (3, encoder.spec.dimension)
        assert enc_index.doc_ids == small.doc_ids


def test_build_index_deterministic(synth_corpus, mock_encoders):
    small = Corpus(documents=synth_corpus.documents[:5])
    first = build_index(small, mock_encoders)
    second = build_index(small, [MockEncoder(e.spec) for e in mock_encoders])
    for a, b in zip(first.indexes, second.indexes):
        assert np.array_equal(a.matrix, b.matrix)


def test_build_index_rejects_empty_corpus(mock_encoders):
    with pytest.raises(ValueError):
        build_index(Corpus(documents=[]), mock_encoders)


def test_ensemble_index_requires_aligned_doc_ids():
    rng = np.random.default_rng(0)
    a = toy_index(rng, name="a")
    b = EncoderIndex(encoder_name="b", doc_ids=["x0", "x1", "x2", "x3"], matrix=unit_rows(rng, 4, 8))
    with pytest.raises(IndexBuildError):
        EnsembleIndex(indexes=[a, b])


def test_encoder_index_rejects_unnormalized_rows():
    with pytest.raises(IndexBuildError):
        EncoderIndex(encoder_name="a", doc_ids=["d0"], matrix=np.array([[1.0, 1.0]]))


# --- paraphrase mean (query-side averaging) ------------------------------------


def test_paraphrase_mean_self_similarity():
    rng = np.random.default_rng(1)
    index = toy_index(rng)
    qp = index.matrix[2:3]
    assert paraphrase_mean_sim(index, qp, 2) == pytest.approx(1.0, abs=1e-12)


def test_paraphrase_mean_symmetric_cancellation():
    rng = np.random.default_rng(2)
    index = toy_index(rng)
    v = l2_normalize(rng.standard_normal(8))
    qp = np.vstack([v, -v])
    assert paraphrase_mean_sim(index, qp, 0) == pytest.approx(0.0, abs=1e-12)


def test_paraphrase_mean_matches_per_pair_oracle():
    rng = np.random.default_rng(3)
    index = toy_index(rng, n_docs=6, dim=16)
    qp = unit_rows(rng, 3, 16)
    for row in range(6):
        expected = oracle_pair_mean(qp, index.matrix[row])
        assert paraphrase_mean_sim(index, qp, row) == pytest.approx(expected, abs=1e-12)


def test_paraphrase_mean_dimension_mismatch():
    rng = np.random.default_rng(4)
    index = toy_index(rng, dim=8)
    with pytest.raises(EncoderError):
        paraphrase_mean_sim(index, unit_rows(rng, 2, 16), 0)


@settings(max_examples=50)
@given(st.integers(min_value=0, max_value=2**31), st.integers(min_value=1, max_value=8))
def test_paraphrase_mean_stays_in_cosine_range(seed, qp_size):
    rng = np.random.default_rng(seed)
    index = toy_index(rng, n_docs=3, dim=8)
    qp = unit_rows(rng, qp_size, 8)
    for row in range(3):
        value = paraphrase_mean_sim(index, qp, row)
        assert -1.0 - 1e-12 <= value <= 1.0 + 1e-12


# --- ensemble mean (encoder-side averaging) -------------------------------------


def test_ensemble_sim_singleton_equals_paraphrase_mean():
    rng = np.random.default_rng(5)
    index = toy_index(rng)
    ensemble = EnsembleIndex(indexes=[index])
    qp = unit_rows(rng, 3, 8)
    record = ensemble_sim(ensemble, {"enc": qp}, "d1", query_id="q")
    assert record.mean_sim == pytest.approx(paraphrase_mean_sim(index, qp, 1), abs=1e-15)


def test_ensemble_sim_is_arithmetic_mean_of_encoders():
    record = SimilarityRecord(
        query_id="q", doc_id="d", per_encoder_sim={"a": 0.4, "b": 0.6, "c": 0.8}, mean_sim=0.6
    )
    assert record.mean_sim == pytest.approx(
        sum(record.per_encoder_sim.values()) / 3, abs=1e-12
    )


def test_ensemble_sim_matches_double_loop_oracle():
    rng = np.random.default_rng(6)
    dims = {"a": 8, "b": 16, "c": 12}
    indexes = [toy_index(rng, n_docs=5, dim=dim, name=name) for name, dim in dims.items()]
    ensemble = EnsembleIndex(indexes=indexes)
    qp = {name: unit_rows(rng, 4, dim) for name, dim in dims.items()}
    matrices = {idx.encoder_name: idx.matrix for idx in indexes}
    for doc_row, doc_id in enumerate(ensemble.doc_ids):
        record = ensemble_sim(ensemble, qp, doc_id, query_id="q")
        expected = oracle_ensemble_mean(qp, matrices, doc_row)
        assert record.mean_sim == pytest.approx(expected, abs=1e-12)
        for name in dims:
            assert record.per_encoder_sim[name] == pytest.approx(
                oracle_pair_mean(qp[name], matrices[name][doc_row]), abs=1e-12
            )


def test_ensemble_sim_invariant_to_encoder_order():
    rng = np.random.default_rng(7)
    indexes = [toy_index(rng, dim=8, name=n) for n in ("a", "b", "c")]
    qp = {idx.encoder_name: unit_rows(rng, 3, 8) for idx in indexes}
    forward = ensemble_sim(EnsembleIndex(indexes=indexes), qp, "d0")
    backward = ensemble_sim(EnsembleIndex(indexes=indexes[::-1]), qp, "d0")
    assert forward.mean_sim == pytest.approx(backward.mean_sim, abs=1e-12)


def test_ensemble_sim_missing_encoder_entry():
    rng = np.random.default_rng(8)
    ensemble = EnsembleIndex(indexes=[toy_index(rng, name="a"), toy_index(rng, name="b")])
    with pytest.raises(KeyError):
        ensemble_sim(ensemble, {"a": unit_rows(rng, 2, 8)}, "d0")


def test_score_all_documents_matches_ensemble_sim():
    rng = np.random.default_rng(9)
    indexes = [toy_index(rng, n_docs=7, dim=d, name=n) for n, d in (("a", 8), ("b", 12))]
    ensemble = EnsembleIndex(indexes=indexes)
    qp = {"a": unit_rows(rng, 3, 8), "b": unit_rows(rng, 3, 12)}
    records = score_all_documents(ensemble, qp, query_id="q")
    assert [r.doc_id for r in records] == ensemble.doc_ids
    for record in records:
        single = ensemble_sim(ensemble, qp, record.doc_id, query_id="q")
        assert record.mean_sim == pytest.approx(single.mean_sim, abs=1e-12)


# --- source pinning ---------------------------------------------------------------


def make_records(sims, query_id="q"):
    return [
        SimilarityRecord(query_id=query_id, doc_id=f"d{i}", per_encoder_sim={}, mean_sim=s)
        for i, s in enumerate(sims)
    ]


def test_pin_source_document_sets_similarity_to_one():
    records = make_records([0.42, 0.9])
    pinned = pin_source_document(records, "d0")
    assert pinned[0].mean_sim == 1.0
    assert pinned[0].pinned is True


def test_pin_source_document_idempotent_and_local():
    records = make_records([1.0, 0.3, 0.7])
    pinned = pin_source_document(records, "d0")
    assert pinned[0].mean_sim == 1.0
    assert [r.mean_sim for r in pinned[1:]] == [0.3, 0.7]
    again = pin_source_document(pinned, "d0")
    assert [r.mean_sim for r in again] == [r.mean_sim for r in pinned]


def test_pin_source_document_missing_source():
    with pytest.raises(KeyError):
        pin_source_document(make_records([0.1]), "nope")


# --- retrieval ----------------------------------------------------------------------


def test_retrieve_drops_below_threshold():
    result = retrieve(make_records([1.0, 0.72, 0.49]))
    assert not isinstance(result, Rejected)
    assert [r.mean_sim for r in result] == [1.0, 0.72]


def test_retrieve_rejects_when_fewer_than_min_docs():
    result = retrieve(make_records([1.0, 0.3, 0.2]))
    assert result == Rejected(qualifying=1)


def test_retrieve_threshold_is_inclusive():
    result = retrieve(make_records([0.5, 0.5]))
    assert not isinstance(result, Rejected)
    assert len(result) == 2


def test_retrieve_ties_break_by_doc_id():
    records = [
        SimilarityRecord(query_id="q", doc_id=d, per_encoder_sim={}, mean_sim=s)
        for d, s in (("d9", 0.8), ("d1", 0.8), ("d5", 0.9))
    ]
    result = retrieve(records)
    assert [r.doc_id for r in result] == ["d5", "d1", "d9"]


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(min_value=-1.0, max_value=1.0, allow_nan=False), min_size=1, max_size=60),
    st.floats(min_value=0.0, max_value=1.0),
    st.integers(min_value=1, max_value=5),
)
def test_retrieve_matches_brute_force(sims, min_sim, min_docs):
    records = make_records(sims)
    expected = oracle_retrieve(records, min_sim, min_docs)
    actual = retrieve(records, min_sim=min_sim, min_docs=min_docs)
    if expected is None:
        assert isinstance(actual, Rejected)
    else:
        assert [r.doc_id for r in actual] == [r.doc_id for r in expected]


def test_retrieve_brute_force_on_thousand_docs():
    rng = np.random.default_rng(11)
    sims = rng.uniform(-1.0, 1.0, size=1000).tolist()
    records = make_records(sims)
    expected = oracle_retrieve(records, 0.5, 2)
    actual = retrieve(records)
    assert [r.doc_id for r in actual] == [r.doc_id for r in expected]


def test_pinned_source_ranks_first_and_bins_to_three(synth_corpus, mock_encoders):
    index = build_index(synth_corpus, mock_encoders)
    doc = synth_corpus.documents[4]
    words = list(dict.fromkeys(doc.text.lower().split()))[:3]
    qp_texts = [" ".join(words), " ".join(reversed(words))]
    qp = {e.spec.name: e.encode(qp_texts) for e in mock_encoders}
    records = pin_source_document(score_all_documents(index, qp, "q"), doc.id)
    result = retrieve(records)
    assert not isinstance(result, Rejected)
    assert result[0].doc_id == doc.id
    assert result[0].mean_sim == 1.0
    assert bin_similarity(result[0].mean_sim) == 3


# --- similarity binning ----------------------------------------------------------------


@pytest.mark.parametrize(
    "sim,expected",
    [(0.55, 1), (0.65, 2), (1.0, 3), (0.5, 1), (0.6, 2), (0.7, 3), (0.75, 3), (0.59999, 1)],
)
def test_bin_similarity_grades(sim, expected):
    assert bin_similarity(sim) == expected


def test_bin_similarity_below_threshold_is_an_error():
    with pytest.raises(ValueError):
        bin_similarity(0.49)


@given(
    st.floats(min_value=0.5, max_value=1.0, allow_nan=False),
    st.floats(min_value=0.5, max_value=1.0, allow_nan=False),
)
def test_bin_similarity_monotone(a, b):
    lo, hi = sorted((a, b))
    assert bin_similarity(lo) <= bin_similarity(hi)
