"""Embedding endpoint: POST /embed {"texts": [...]} -> {"embeddings": [[...]]}.

Speaks the same wire contract the retrieval service's HTTP embedding
provider expects, so pointing that provider at this app's URL turns text
turns into live embeddings."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .backends import truncate_texts


def create_app(backend) -> FastAPI:
    app = FastAPI(title="embed-exporter")

    @app.get("/")
    def info():
        return {"backend": backend.name, "dim": backend.dim}

    @app.post("/embed")
    def embed(body: dict):
        texts = body.get("texts")
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            raise HTTPException(status_code=400, detail="body must carry texts: [str, ...]")
        limit = getattr(backend, "max_text_length", None)
        rows = backend.embed_texts(truncate_texts(texts, limit))
        return {"embeddings": rows.tolist()}

    return app
