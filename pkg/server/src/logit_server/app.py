"""The wire protocol as a FastAPI application.

    GET  /info                              static model metadata
    POST /tokenize    {"text": str}      -> {"ids": [int]}
    POST /detokenize  {"ids": [int]}     -> {"text": str}
    POST /logprobs    {"contexts": [[int]]} -> {"vectors": [[float]]}

Every served vector is a normalized log-probability distribution; protocol
misuse (bad ids, empty or overlong contexts, oversized batches) is a 400
with an ``{"error": ...}`` body, resource exhaustion a 503.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .backends import ContextTooLong, ModelBackend

DEFAULT_MAX_BATCH = 64


class TokenizeRequest(BaseModel):
    text: str


class DetokenizeRequest(BaseModel):
    ids: list[int]


class LogprobsRequest(BaseModel):
    contexts: list[list[int]]


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=400)


def create_app(backend: ModelBackend, max_batch: int = DEFAULT_MAX_BATCH) -> FastAPI:
    app = FastAPI(title="logit-server", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError) -> JSONResponse:
        return _bad_request(f"malformed request body: {exc.errors()[:1]}")

    def check_ids(ids: list[int]) -> JSONResponse | None:
        for token_id in ids:
            if not 0 <= token_id < backend.vocab_size:
                return _bad_request(
                    f"token id {token_id} out of range [0, {backend.vocab_size})"
                )
        return None

    @app.get("/info")
    def info() -> dict:
        return {
            "model": backend.model_name,
            "vocab_size": backend.vocab_size,
            "bos_id": backend.bos_id,
            "eos_id": backend.eos_id,
            "newline_id": backend.newline_id,
            "normalization": "logprob",
            "max_batch": max_batch,
            "max_context": backend.max_context,
        }

    @app.post("/tokenize")
    def tokenize(req: TokenizeRequest):
        try:
            ids = backend.tokenize(req.text)
        except ValueError as exc:
            return _bad_request(str(exc))
        return {"ids": ids}

    @app.post("/detokenize")
    def detokenize(req: DetokenizeRequest):
        bad = check_ids(req.ids)
        if bad is not None:
            return bad
        return {"text": backend.detokenize(req.ids)}

    @app.post("/logprobs")
    def logprobs(req: LogprobsRequest):
        if not req.contexts:
            return _bad_request("contexts must hold at least one context")
        if len(req.contexts) > max_batch:
            return _bad_request(
                f"batch of {len(req.contexts)} exceeds max_batch {max_batch}"
            )
        for ctx in req.contexts:
            if not ctx:
                return _bad_request("each context must be non-empty")
            bad = check_ids(ctx)
            if bad is not None:
                return bad
        try:
            vectors = backend.next_logprobs(req.contexts)
        except ContextTooLong as exc:
            return _bad_request(str(exc))
        except MemoryError:
            return JSONResponse({"error": "model out of memory"}, status_code=503)
        except RuntimeError as exc:
            if "out of memory" in str(exc).lower():
                return JSONResponse({"error": "model out of memory"}, status_code=503)
            raise
        return {"vectors": vectors}

    return app
