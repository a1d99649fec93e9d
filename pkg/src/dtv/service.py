"""Interactive retrieval service: a thin stateful HTTP wrapper around the
model's scoring path.

An index stores each video's temporal frame matrix (the frame encoder
applied offline) at full float64 precision, keyed to the checkpoint it was
built from by content hash, so online scores are bit-identical to batch
evaluation with the same checkpoint. Sessions accumulate dialogue turns;
every ranking request re-derives the query vector from all turns posted so
far.

Turns may carry raw text, in which case a pluggable embedding provider
turns text into vectors: either an HTTP endpoint (POST /embed) or a
deterministic hashing stub that needs no external process.
"""

from __future__ import annotations

import hashlib
import json
import struct
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evaluation import rank_candidates
from .model import DialogueQuery, ModelParams, VideoRecord, encode_frames, encode_query, pool_video

INDEX_MAGIC = b"DTVI"
INDEX_VERSION = 1


class ProviderError(RuntimeError):
    """The embedding provider could not produce embeddings."""


# ---------------------------------------------------------------------------
# Embedding providers
# ---------------------------------------------------------------------------

class HashingStubProvider:
    """Deterministic text embeddings with no model behind them: each text
    seeds a random generator from its hash. Useful for tests and demos;
    embeddings carry no semantics, but identical text always maps to the
    identical vector, in any process."""

    def __init__(self, dim: int, scale: float = 1.0):
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.scale = scale

    def embed(self, texts: list[str]) -> np.ndarray:
        rows = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "little")
            rng = np.random.default_rng(seed)
            rows[i] = self.scale * rng.standard_normal(self.dim)
        return rows


class HttpEmbeddingProvider:
    """Forwards texts to an embedding endpoint: POST {url}/embed with
    {"texts": [...]} returning {"embeddings": [[...]]}."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url.rstrip("/")
        self.timeout = timeout

    def embed(self, texts: list[str]) -> np.ndarray:
        import httpx

        try:
            response = httpx.post(
                f"{self.url}/embed", json={"texts": texts}, timeout=self.timeout
            )
            response.raise_for_status()
            payload = response.json()
        except Exception as exc:
            raise ProviderError(f"embedding provider at {self.url} failed: {exc}") from exc
        embeddings = payload.get("embeddings")
        if not isinstance(embeddings, list) or len(embeddings) != len(texts):
            raise ProviderError(
                f"embedding provider returned {type(embeddings).__name__} "
                f"of wrong length for {len(texts)} texts"
            )
        return np.asarray(embeddings, dtype=np.float64)


# ---------------------------------------------------------------------------
# Index: precomputed temporal frame matrices, bound to a checkpoint hash
# ---------------------------------------------------------------------------

@dataclass
class Index:
    video_ids: list[str]
    matrices: dict[str, np.ndarray]
    checkpoint_sha256: str
    embedding_dim: int
    max_turns: int
    dialogue_mode: str


def _write_matrix_cache(path, records: list[tuple[str, np.ndarray]]) -> None:
    # Same record layout as the embedding container, but float64 payload:
    # cached encoder outputs must reproduce offline scores bit-exactly.
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        dim = records[0][1].shape[1] if records else 0
        fh.write(struct.pack("<HII", INDEX_VERSION, len(records), dim))
        for rec_id, matrix in records:
            id_bytes = rec_id.encode("utf-8")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(struct.pack("<I", matrix.shape[0]))
            fh.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())


def _read_matrix_cache(path) -> list[tuple[str, np.ndarray]]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != INDEX_MAGIC:
        raise ValueError(f"not an index matrix cache: bad magic {blob[:4]!r}")
    version, count, dim = struct.unpack_from("<HII", blob, 4)
    if version != INDEX_VERSION:
        raise ValueError(f"unsupported index cache version {version}")
    offset = 14
    records = []
    for _ in range(count):
        (id_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        rec_id = blob[offset:offset + id_len].decode("utf-8")
        offset += id_len
        (rows,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        end = offset + 8 * rows * dim
        if end > len(blob):
            raise ValueError(f"truncated index cache: record {rec_id!r} incomplete")
        matrix = np.frombuffer(blob, dtype="<f8", count=rows * dim, offset=offset)
        records.append((rec_id, matrix.reshape(rows, dim).copy()))
        offset = end
    return records


def build_index(
    params: ModelParams,
    checkpoint_path,
    videos: list[VideoRecord],
    out_dir,
    max_turns: int = 10,
) -> Index:
    """Precompute temporal frame matrices for every video and store them
    alongside the checkpoint's content hash. Deterministic: rebuilding
    yields byte-identical files."""
    if not videos:
        raise ValueError("cannot index an empty video list")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = hashlib.sha256(Path(checkpoint_path).read_bytes()).hexdigest()
    records = []
    for video in sorted(videos, key=lambda v: v.video_id):
        records.append((video.video_id, encode_frames(video, params).data))
    _write_matrix_cache(out_dir / "temporal.bin", records)
    meta = {
        "checkpoint_sha256": digest,
        "embedding_dim": params.config.dim,
        "max_turns": max_turns,
        "dialogue_mode": params.config.dialogue_mode,
        "num_videos": len(records),
    }
    with open(out_dir / "index.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return Index(
        video_ids=[rec_id for rec_id, _ in records],
        matrices=dict(records),
        checkpoint_sha256=digest,
        embedding_dim=params.config.dim,
        max_turns=max_turns,
        dialogue_mode=params.config.dialogue_mode,
    )


def load_index(index_dir, checkpoint_path=None) -> Index:
    """Load an index directory; when checkpoint_path is given, refuse an
    index built from a different checkpoint."""
    index_dir = Path(index_dir)
    with open(index_dir / "index.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    if checkpoint_path is not None:
        digest = hashlib.sha256(Path(checkpoint_path).read_bytes()).hexdigest()
        if digest != meta["checkpoint_sha256"]:
            raise ValueError(
                "index was built from a different checkpoint "
                f"({meta['checkpoint_sha256'][:12]}… vs {digest[:12]}…); rebuild it"
            )
    records = _read_matrix_cache(index_dir / "temporal.bin")
    if len(records) != meta["num_videos"]:
        raise ValueError(
            f"index cache holds {len(records)} videos, metadata says {meta['num_videos']}"
        )
    return Index(
        video_ids=[rec_id for rec_id, _ in records],
        matrices=dict(records),
        checkpoint_sha256=meta["checkpoint_sha256"],
        embedding_dim=meta["embedding_dim"],
        max_turns=meta["max_turns"],
        dialogue_mode=meta["dialogue_mode"],
    )


# ---------------------------------------------------------------------------
# Sessions
# ---------------------------------------------------------------------------

@dataclass
class Session:
    session_id: str
    mode: str
    created_at: float = field(default_factory=time.time)
    texts: list[str] = field(default_factory=list)
    rows: list[np.ndarray] = field(default_factory=list)
    rows_from_text: bool = True
    lock: threading.Lock = field(default_factory=threading.Lock)

    def turn_matrix(self) -> np.ndarray:
        return np.stack(self.rows)

    def snapshot(self) -> dict:
        return {
            "session_id": self.session_id,
            "mode": self.mode,
            "created_at": self.created_at,
            "num_turns": len(self.rows),
        }


def create_app(params: ModelParams, index: Index, provider=None):
    """Build the HTTP app. `provider` handles text turns; omit it to accept
    embedding-only turns."""
    from fastapi import Body, FastAPI, HTTPException

    if index.embedding_dim != params.config.dim:
        raise ValueError(
            f"index dim {index.embedding_dim} does not match model dim {params.config.dim}"
        )

    app = FastAPI(title="dialogue-to-video retrieval", version="0.1.0")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()

    def get_session(session_id: str) -> Session:
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    def query_vector(session: Session) -> np.ndarray:
        query = DialogueQuery(session.session_id, session.turn_matrix(), mode=session.mode)
        return encode_query(query, params).data

    @app.get("/")
    def info():
        return {
            "service": "dialogue-to-video retrieval",
            "num_videos": len(index.video_ids),
            "embedding_dim": index.embedding_dim,
            "dialogue_mode": index.dialogue_mode,
            "max_turns": index.max_turns,
            "checkpoint_sha256": index.checkpoint_sha256,
            "text_turns_supported": provider is not None,
        }

    @app.post("/sessions", status_code=201)
    def create_session(body: dict | None = Body(default=None)):
        mode = (body or {}).get("mode", index.dialogue_mode)
        if mode != index.dialogue_mode:
            raise HTTPException(
                status_code=400,
                detail=f"session mode {mode!r} conflicts with checkpoint mode "
                f"{index.dialogue_mode!r}",
            )
        session = Session(session_id=uuid.uuid4().hex, mode=mode)
        with registry_lock:
            sessions[session.session_id] = session
        return {"session_id": session.session_id, "mode": mode}

    @app.get("/sessions/{session_id}")
    def get_session_state(session_id: str):
        # lets a client rebuild its view after a refresh; texts are only
        # known when every turn arrived as text
        session = get_session(session_id)
        with session.lock:
            state = session.snapshot()
            state["texts"] = list(session.texts) if session.rows_from_text else None
        return state

    @app.post("/sessions/{session_id}/turns")
    def post_turn(session_id: str, body: dict = Body(...)):
        session = get_session(session_id)
        text = body.get("text")
        embedding = body.get("embedding")
        if (text is None) == (embedding is None):
            raise HTTPException(
                status_code=400, detail="provide exactly one of 'text' or 'embedding'"
            )
        with session.lock:
            if len(session.rows) >= index.max_turns:
                raise HTTPException(
                    status_code=409,
                    detail=f"turn limit {index.max_turns} reached for this session",
                )
            if text is not None:
                if provider is None:
                    raise HTTPException(
                        status_code=503, detail="no embedding provider configured"
                    )
                if not isinstance(text, str) or not text.strip():
                    raise HTTPException(status_code=400, detail="text must be non-empty")
                if not session.rows_from_text:
                    raise HTTPException(
                        status_code=400,
                        detail="cannot mix text turns into a session that posted "
                        "raw embeddings",
                    )
                session.texts.append(text)
                if session.mode == "cumulative_prefix":
                    to_embed = " ".join(session.texts)
                else:
                    to_embed = text
                try:
                    row = provider.embed([to_embed])[0]
                except ProviderError as exc:
                    session.texts.pop()
                    raise HTTPException(status_code=503, detail=str(exc)) from exc
            else:
                row = np.asarray(embedding, dtype=np.float64)
                if row.ndim != 1 or row.shape[0] != index.embedding_dim:
                    raise HTTPException(
                        status_code=400,
                        detail=f"embedding must be a flat list of {index.embedding_dim} "
                        f"numbers, got shape {row.shape}",
                    )
                session.rows_from_text = False
            session.rows.append(row)
            return {"session_id": session_id, "turn_index": len(session.rows)}

    @app.get("/sessions/{session_id}/ranking")
    def ranking(session_id: str, k: int = 10):
        session = get_session(session_id)
        if k < 1:
            raise HTTPException(status_code=400, detail=f"k must be >= 1, got {k}")
        with session.lock:
            if not session.rows:
                raise HTTPException(status_code=400, detail="at least one turn required")
            d_h = query_vector(session)
            scores = [
                pool_video(d_h, index.matrices[vid], params).score
                for vid in index.video_ids
            ]
            ranked = rank_candidates(np.array(scores), index.video_ids)
            return {
                "session_id": session_id,
                "num_turns": len(session.rows),
                "k": k,
                "results": [
                    {"rank": i + 1, "video_id": vid, "score": score}
                    for i, (vid, score) in enumerate(ranked[:k])
                ],
            }

    @app.get("/sessions/{session_id}/attention/{video_id}")
    def attention(session_id: str, video_id: str):
        session = get_session(session_id)
        if video_id not in index.matrices:
            raise HTTPException(status_code=404, detail=f"unknown video {video_id!r}")
        with session.lock:
            if not session.rows:
                raise HTTPException(status_code=400, detail="at least one turn required")
            d_h = query_vector(session)
            pooled = pool_video(d_h, index.matrices[video_id], params)
            return {
                "session_id": session_id,
                "video_id": video_id,
                "num_turns": len(session.rows),
                "weights": pooled.weights.tolist(),
                "score": pooled.score,
            }

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        with registry_lock:
            if session_id not in sessions:
                raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
            del sessions[session_id]
        return {"deleted": session_id}

    return app
