"""Full annotation loop against the running service: export tasks from a
built collection, drive a blinded scoring session over HTTP exactly the way
the browser client does, then import the judgments and evaluate. Runs
without the frontend bundle."""

import json

import pytest
from fastapi.testclient import TestClient

from conftest import make_config

from relforge.annotation import create_app
from relforge.corpus import write_corpus_jsonl
from relforge.pipeline import Pipeline
from relforge.synthetic import make_synthetic_corpus

FORBIDDEN_MARKERS = ("ensemble", "llm", "combined", "mean_sim", "per_encoder")


@pytest.fixture
def collection(tmp_path):
    corpus_path = tmp_path / "corpus.jsonl"
    write_corpus_jsonl(make_synthetic_corpus(n_docs=80, seed=21), corpus_path)
    config = make_config(corpus_path, tmp_path / "out", budget=2, seed=3)
    pipeline = Pipeline(config)
    pipeline.build_collection()
    pipeline.export_annotation()
    return pipeline


def assert_no_automated_scores(payload):
    text = json.dumps(payload).lower()
    for marker in FORBIDDEN_MARKERS:
        assert marker not in text, marker


def test_scripted_session_roundtrips_into_evaluate(collection, tmp_path):
    pipeline = collection
    log_path = tmp_path / "judgments.log.jsonl"
    client = TestClient(create_app(pipeline.tasks_path, log_path))

    # scripted session: fetch -> judge 0..3 cyclically -> done
    session_scores = {}
    step = 0
    while True:
        payload = client.get("/api/tasks/next", params={"annotator": "ann-ui"}).json()
        assert_no_automated_scores(payload)
        if payload.get("done"):
            break
        score = step % 4
        ack = client.post(
            "/api/judgments",
            json={"task_id": payload["task_id"], "annotator_id": "ann-ui", "score": score},
        )
        assert ack.status_code == 200
        session_scores[(payload["query_id"], payload["doc_id"])] = score
        step += 1

    progress = client.get("/api/progress", params={"annotator": "ann-ui"}).json()
    assert_no_automated_scores(progress)
    assert progress["remaining"] == 0
    assert progress["judged"] == len(session_scores) == step
    assert sum(progress["histogram"].values()) == step

    # imported judgments round-trip unchanged
    tsv = pipeline.import_annotation(log_path)
    imported = {}
    for line in tsv.read_text().splitlines():
        query_id, _, doc_id, score = line.split("\t")
        imported[(query_id, doc_id)] = int(score)
    assert imported == session_scores

    report = pipeline.evaluate(tsv)
    assert report["judged_pairs"] == len(session_scores)
    for section in report["sources"].values():
        for method in ("ensemble", "llm", "combined"):
            assert section["methods"][method]["compared_pairs"] > 0


def test_session_histogram_matches_submitted_scores(collection, tmp_path):
    pipeline = collection
    client = TestClient(create_app(pipeline.tasks_path, tmp_path / "log.jsonl"))
    submitted = []
    for score in (3, 3, 0, 2, 1):
        payload = client.get("/api/tasks/next", params={"annotator": "a"}).json()
        if payload.get("done"):
            break
        client.post(
            "/api/judgments",
            json={"task_id": payload["task_id"], "annotator_id": "a", "score": score},
        )
        submitted.append(score)
    histogram = client.get("/api/progress", params={"annotator": "a"}).json()["histogram"]
    for value in range(4):
        assert histogram[str(value)] == submitted.count(value)
