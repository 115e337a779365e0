"""HTTP service that hands annotation tasks to human annotators and collects
blinded 0-3 judgments.

Tasks come from the pipeline's annotation export, already ordered by the
automated ranking; the payloads served here never contain any automated
score. Judgments are persisted to an append-only JSONL log, so a crash or
restart loses nothing and resubmissions stay auditable.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .query_gen import load_template

SCORE_RANGE = (0, 1, 2, 3)


@dataclass(frozen=True)
class AnnotationTask:
    """One query-document pair shown to an annotator; deliberately free of
    every automated score."""

    task_id: str
    position: int
    query_id: str
    doc_id: str
    query: str
    text: str
    funcloc: str | None


def load_tasks(path: str | Path) -> list[AnnotationTask]:
    tasks: list[AnnotationTask] = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            raw = json.loads(line)
            tasks.append(
                AnnotationTask(
                    task_id=raw["task_id"],
                    position=int(raw["position"]),
                    query_id=raw["query_id"],
                    doc_id=raw["doc_id"],
                    query=raw["query"],
                    text=raw["text"],
                    funcloc=raw.get("funcloc"),
                )
            )
    tasks.sort(key=lambda t: t.position)
    return tasks


class JudgmentStore:
    """Append-only judgment log; the latest entry per (task, annotator) wins
    while the full history stays on disk for audit."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._latest: dict[tuple[str, str], dict] = {}
        if self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        judgment = json.loads(line)
                        self._latest[(judgment["task_id"], judgment["annotator_id"])] = judgment

    def append(self, task_id: str, annotator_id: str, score: int) -> dict:
        judgment = {
            "task_id": task_id,
            "annotator_id": annotator_id,
            "score": score,
            "submitted_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(judgment) + "\n")
            self._latest[(task_id, annotator_id)] = judgment
        return judgment

    def judged_task_ids(self, annotator_id: str) -> set[str]:
        return {task for task, annotator in self._latest if annotator == annotator_id}

    def latest_for(self, annotator_id: str) -> list[dict]:
        return [j for (_, annotator), j in self._latest.items() if annotator == annotator_id]


class JudgmentIn(BaseModel):
    task_id: str
    annotator_id: str = Field(min_length=1)
    score: int


def create_app(
    tasks_path: str | Path,
    judgments_path: str | Path,
    static_dir: str | Path | None = None,
    token: str | None = None,
) -> FastAPI:
    tasks = load_tasks(tasks_path)
    store = JudgmentStore(judgments_path)
    app = FastAPI(title="relforge annotation service")
    # one fetch of a task per annotator until a judgment lands, so double
    # fetches (second tab, impatient reload) cannot double-assign
    leases: dict[str, set[str]] = {}
    lease_lock = threading.Lock()

    def check_token(request: Request) -> None:
        if token is not None and request.headers.get("x-auth-token") != token:
            raise HTTPException(status_code=401, detail="missing or wrong auth token")

    def task_payload(task: AnnotationTask) -> dict:
        return {
            "task_id": task.task_id,
            "position": task.position,
            "query_id": task.query_id,
            "doc_id": task.doc_id,
            "query": task.query,
            "text": task.text,
            "funcloc": task.funcloc,
            "total": len(tasks),
        }

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "tasks": len(tasks)}

    @app.get("/api/rubric")
    def rubric(_: None = Depends(check_token)) -> dict:
        return {"rubric": load_template("relevance_scoring.txt")}

    @app.get("/api/tasks/next")
    def next_task(
        annotator: str = Query(min_length=1), _: None = Depends(check_token)
    ) -> JSONResponse:
        judged = store.judged_task_ids(annotator)
        with lease_lock:
            held = leases.setdefault(annotator, set())
            for task in tasks:
                if task.task_id in judged or task.task_id in held:
                    continue
                held.add(task.task_id)
                return JSONResponse(task_payload(task))
        return JSONResponse({"done": True})

    @app.post("/api/judgments")
    def submit_judgment(
        judgment: JudgmentIn, _: None = Depends(check_token)
    ) -> dict:
        if judgment.score not in SCORE_RANGE:
            raise HTTPException(status_code=422, detail=f"score {judgment.score} outside 0..3")
        if all(t.task_id != judgment.task_id for t in tasks):
            raise HTTPException(status_code=404, detail=f"unknown task {judgment.task_id!r}")
        stored = store.append(judgment.task_id, judgment.annotator_id, judgment.score)
        with lease_lock:
            leases.setdefault(judgment.annotator_id, set()).discard(judgment.task_id)
        return {"ok": True, "task_id": stored["task_id"], "score": stored["score"]}

    @app.get("/api/progress")
    def progress(
        annotator: str = Query(min_length=1), _: None = Depends(check_token)
    ) -> dict:
        latest = store.latest_for(annotator)
        histogram = {str(v): 0 for v in SCORE_RANGE}
        for judgment in latest:
            histogram[str(judgment["score"])] += 1
        return {
            "judged": len(latest),
            "remaining": len(tasks) - len(latest),
            "total": len(tasks),
            "histogram": histogram,
        }

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app
