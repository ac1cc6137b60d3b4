"""HTTP embedding service: POST /embed with {"texts": [...]}.

Responds {"dim": int, "embeddings": [[...], ...]}. Empty or malformed
bodies are a 400. Encoder access is serialized behind a lock, so
concurrent requests queue rather than interleave inside the model.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel


class EmbedRequest(BaseModel):
    texts: list[str]


class EmbedResponse(BaseModel):
    dim: int
    embeddings: list[list[float]]


def create_app(encoder) -> FastAPI:
    app = FastAPI(title="embed-exporter")
    lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.post("/embed", response_model=EmbedResponse)
    def embed(request: EmbedRequest):
        if not request.texts:
            return JSONResponse(status_code=400, content={"detail": "texts must be non-empty"})
        with lock:
            matrix = encoder.encode_texts(request.texts)
        return EmbedResponse(
            dim=int(matrix.shape[1]),
            embeddings=[[float(x) for x in row] for row in matrix],
        )

    return app


def serve(encoder, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(encoder), host=host, port=port, log_level="warning")
