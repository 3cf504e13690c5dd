"""HTTP API over the annotation store, consumed by the annotator UI."""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from .annotation import (
    AnnotationError,
    AnnotationRecord,
    AnnotationStore,
    build_agreement_report,
)
from .prelabel import load_guideline


class AnnotationIn(BaseModel):
    sample_id: str
    annotator_id: str
    water: Literal[0, 1]
    forest: Literal[0, 1]
    biodiversity: Literal[0, 1]


class ResolutionIn(BaseModel):
    dimension: Literal["water", "forest", "biodiversity"]
    value: Literal[0, 1]
    resolver_id: str


def default_guidelines() -> dict[str, str]:
    return {dim: load_guideline(dim) for dim in ("water", "forest", "biodiversity")}


def create_app(
    store: AnnotationStore,
    guidelines: Optional[dict[str, str]] = None,
    static_dir: Optional[str | Path] = None,
) -> FastAPI:
    app = FastAPI(title="naturetext annotation API")
    served_guidelines = guidelines or default_guidelines()
    write_lock = threading.Lock()

    def _prior(sample_id: str, annotator_id: str) -> Optional[dict]:
        record = store.record_for(sample_id, annotator_id)
        if record is None:
            return None
        return {
            "water": record.water,
            "forest": record.forest,
            "biodiversity": record.biodiversity,
        }

    @app.get("/guidelines")
    def get_guidelines() -> dict:
        return served_guidelines

    @app.get("/tasks/next")
    def next_task(annotator: str = Query(...)) -> dict:
        try:
            nxt = store.next_task(annotator)
        except AnnotationError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        if nxt is None:
            return {"done": True, "sample_id": None}
        sample_id, text = nxt
        return {
            "done": False,
            "sample_id": sample_id,
            "text": text,
            "guidelines": served_guidelines,
            "prior": None,
        }

    @app.get("/tasks/{sample_id}")
    def get_task(sample_id: str, annotator: str = Query(...)) -> dict:
        if sample_id not in store.texts:
            raise HTTPException(status_code=404, detail=f"unknown sample {sample_id!r}")
        if annotator not in store.annotators:
            raise HTTPException(status_code=404, detail=f"unknown annotator {annotator!r}")
        return {
            "sample_id": sample_id,
            "text": store.texts[sample_id],
            "guidelines": served_guidelines,
            "prior": _prior(sample_id, annotator),
        }

    @app.post("/annotations")
    def post_annotation(body: AnnotationIn) -> dict:
        record = AnnotationRecord(
            sample_id=body.sample_id,
            annotator_id=body.annotator_id,
            water=body.water,
            forest=body.forest,
            biodiversity=body.biodiversity,
        )
        with write_lock:
            try:
                store.submit_annotation(record)
            except AnnotationError as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {"status": "ok"}

    @app.get("/adjudications")
    def get_adjudications() -> list[dict]:
        return store.pending_adjudications()

    @app.post("/adjudications/{sample_id}")
    def post_adjudication(sample_id: str, body: ResolutionIn) -> dict:
        with write_lock:
            try:
                store.resolve_adjudication(
                    sample_id, body.dimension, body.value, body.resolver_id
                )
            except AnnotationError as exc:
                # Conflict contract: server state wins, the client refreshes.
                raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"status": "ok"}

    @app.get("/agreement")
    def get_agreement() -> dict:
        complete = [
            record
            for record in store.all_records()
            if store.is_complete(record.sample_id)
        ]
        try:
            report = build_agreement_report(complete, n_raters=len(store.annotators))
        except AnnotationError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        out = {}
        for dim, agreement in report.dimensions.items():
            out[dim] = {
                "kappa": agreement.kappa,
                "status": "defined" if agreement.kappa is not None else "undefined",
                "agree_2of4": agreement.agree_2of4,
                "agree_3of4": agreement.agree_3of4,
                "agree_4of4": agreement.agree_4of4,
                "n_samples": agreement.n_samples,
            }
        return out

    @app.get("/progress")
    def get_progress() -> dict:
        complete = sum(1 for sid in store.task_order if store.is_complete(sid))
        return {
            "annotators": store.progress(),
            "total_samples": len(store.task_order),
            "complete_samples": complete,
        }

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
