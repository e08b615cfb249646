"""HTTP JSON API over an annotation store.

Endpoints (all timestamps UTC ISO-8601; see docs/api.md for schemas):

    GET  /batches/next?rater=R   next class batch for this rater
    POST /judgments              record one judgment, idempotent per (task, rater)
    GET  /raters/{id}/summary    golden accuracy and speed for one rater
    GET  /tasks/{id}             one task, golden fields withheld

Errors are structured: {"error": {"code": ..., "message": ...}} with a
4xx status. Golden feedback comes back synchronously on the submit
response so the client can surface it immediately.
"""

from __future__ import annotations

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from ..errors import ValidationError, WebcurateError
from .core import Judgment
from .store import AnnotationStore


class JudgmentIn(BaseModel):
    task_id: str
    rater_id: str
    answer: bool
    elapsed_seconds: float = 0.0


def create_app(store: AnnotationStore, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="webcurate annotation API")

    @app.exception_handler(WebcurateError)
    async def _store_error(request: Request, exc: WebcurateError):
        status = getattr(exc, "http_status", 400 if isinstance(exc, ValidationError) else 500)
        return JSONResponse(
            status_code=status,
            content={"error": {"code": type(exc).__name__, "message": str(exc)}},
        )

    @app.get("/batches/next")
    def next_batch(rater: str = Query(...)):
        payload = store.next_batch(rater)
        if payload is None:
            return {"batch": None, "done": True}
        return {"batch": payload, "done": False}

    @app.post("/judgments")
    def submit(judgment: JudgmentIn):
        result = store.submit(Judgment(
            task_id=judgment.task_id,
            rater_id=judgment.rater_id,
            answer=judgment.answer,
            elapsed_seconds=judgment.elapsed_seconds,
        ))
        return result.to_dict()

    @app.get("/raters/{rater_id}/summary")
    def summary(rater_id: str):
        return store.rater_summary(rater_id).to_dict()

    @app.get("/tasks/{task_id}")
    def task(task_id: str):
        return store.task_payload(task_id)

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
