"""HTTP service exposing prediction and mask-fill over a checkpoint.

Implements the wire protocol the attack engine's remote client expects:
POST /predict, POST /mask_fill, GET /health; all errors come back as
``{"error": ...}`` with a non-2xx status.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .encoder import VictimModel

DEFAULT_MAX_BATCH = 32


class Instance(BaseModel):
    textA: str
    textB: str | None = None


class PredictBody(BaseModel):
    instances: list[Instance]


class MaskFillBody(BaseModel):
    tokens: list[str]
    mask_index: int
    target: str


def create_app(model: VictimModel, max_batch: int = DEFAULT_MAX_BATCH) -> FastAPI:
    app = FastAPI(title="gramattack-server")
    lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors())})

    @app.get("/health")
    def health():
        return {"ok": True, "labels": model.labels}

    @app.post("/predict")
    def predict(body: PredictBody):
        if not body.instances:
            return JSONResponse(status_code=400, content={"error": "empty batch"})
        if len(body.instances) > max_batch:
            return JSONResponse(
                status_code=400,
                content={"error": f"batch exceeds max {max_batch}"},
            )
        pairs = [
            (
                inst.textA.split(),
                inst.textB.split() if inst.textB is not None else None,
            )
            for inst in body.instances
        ]
        with lock:
            rows = model.predict_probs(pairs)
        return {"probs": rows}

    @app.post("/mask_fill")
    def mask_fill(body: MaskFillBody):
        if not body.tokens or not 0 <= body.mask_index < len(body.tokens):
            return JSONResponse(
                status_code=400, content={"error": "mask index out of range"}
            )
        with lock:
            prob = model.mask_fill_prob(body.tokens, body.mask_index, body.target)
        return {"prob": prob}

    return app
