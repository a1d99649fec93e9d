"""Dialogue-to-video retrieval model over precomputed embeddings.

Three stages, all built from autograd ops so the whole score path is
trainable end to end:

* temporal video encoder: absolute positional injection followed by a stack
  of multi-head self-attention layers (residual + layer norm each);
* dialogue-query encoder: either a learned recurrence over per-turn
  embeddings or a linear projection of cumulative-prefix embeddings, fused
  into a single query vector (mean of turn states by default);
* query-conditioned pooling: softmax-weighted sum of temporal frame
  representations, scored against the query by dot product.

The pretrained image/text towers that produce the input embeddings live
outside this package; the model trains only the parameters defined here.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor

CHECKPOINT_MAGIC = b"DTVC"
CHECKPOINT_VERSION = 1

DIALOGUE_MODES = ("per_turn", "cumulative_prefix")
FUSION_MODES = ("mean", "last")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters. Defaults match the training recipe."""

    dim: int = 32
    max_frames: int = 32
    num_layers: int = 2
    num_heads: int = 4
    dialogue_mode: str = "cumulative_prefix"
    fusion: str = "mean"
    fusion_projection: bool = False
    recurrence_activation: str = "tanh"
    # Cosine + learnable temperature is an experiment hook; dot product is
    # the faithful default and what the evaluation suite assumes.
    similarity: str = "dot"

    def __post_init__(self):
        if self.dim < 1 or self.max_frames < 1 or self.num_layers < 0 or self.num_heads < 1:
            raise ValueError("dim, max_frames and num_heads must be positive; num_layers >= 0")
        if self.dim % self.num_heads != 0:
            raise ValueError(
                f"embedding dim {self.dim} is not divisible by head count {self.num_heads}"
            )
        if self.dialogue_mode not in DIALOGUE_MODES:
            raise ValueError(f"unknown dialogue_mode {self.dialogue_mode!r}")
        if self.fusion not in FUSION_MODES:
            raise ValueError(f"unknown fusion {self.fusion!r}")
        if self.recurrence_activation not in ("tanh", "relu", "gelu"):
            raise ValueError(f"unknown recurrence_activation {self.recurrence_activation!r}")
        if self.similarity not in ("dot", "cosine"):
            raise ValueError(f"unknown similarity {self.similarity!r}")


@dataclass
class VideoRecord:
    """One video: an id and its n x d frame embedding matrix."""

    video_id: str
    frames: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise ValueError(
                f"video {self.video_id!r}: frames must be a non-empty matrix, "
                f"got shape {self.frames.shape}"
            )

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass
class DialogueQuery:
    """One dialogue query: an id and its m x d turn (or prefix) embeddings.

    In ``cumulative_prefix`` mode row i embeds the concatenated text of
    turns 1..i; in ``per_turn`` mode row i embeds turn i alone.
    """

    query_id: str
    turns: np.ndarray
    mode: str = "cumulative_prefix"

    def __post_init__(self):
        self.turns = np.asarray(self.turns, dtype=np.float64)
        if self.turns.ndim != 2 or self.turns.shape[0] < 1:
            raise ValueError(
                f"query {self.query_id!r}: turns must be a non-empty matrix, "
                f"got shape {self.turns.shape}"
            )
        if self.mode not in DIALOGUE_MODES:
            raise ValueError(f"query {self.query_id!r}: unknown mode {self.mode!r}")

    @property
    def num_turns(self) -> int:
        return self.turns.shape[0]

    @property
    def dim(self) -> int:
        return self.turns.shape[1]


@dataclass
class PooledScore:
    """Attentive pooling output for one (query, video) pair."""

    d_h: np.ndarray       # query representation, (d,)
    v_h: np.ndarray       # pooled video representation, (d,)
    weights: np.ndarray   # per-frame attention weights, (n,), sum to 1
    score: float


class ModelParams:
    """All trainable weights, as an ordered name -> Tensor mapping.

    The insertion order is the canonical serialization order for
    checkpoints. Immutable during inference; the trainer mutates tensor
    data in place through the optimizer only.
    """

    def __init__(self, config: ModelConfig, tensors: dict[str, Tensor]):
        self.config = config
        self.tensors = tensors

    @classmethod
    def initialize(cls, config: ModelConfig, seed: int = 0) -> "ModelParams":
        rng = np.random.default_rng(seed)
        d = config.dim
        bound = 1.0 / np.sqrt(d)

        def uniform(shape):
            return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)

        def zeros(shape):
            return Tensor(np.zeros(shape), requires_grad=True)

        def ones(shape):
            return Tensor(np.ones(shape), requires_grad=True)

        t: dict[str, Tensor] = {}
        t["positional_table"] = zeros((config.max_frames, d))
        for layer in range(config.num_layers):
            p = f"attn{layer}."
            t[p + "wq"] = uniform((d, d))
            t[p + "wk"] = uniform((d, d))
            t[p + "wv"] = uniform((d, d))
            t[p + "wo"] = uniform((d, d))
            t[p + "ln_gain"] = ones((d,))
            t[p + "ln_bias"] = zeros((d,))
        if config.dialogue_mode == "per_turn":
            t["rec.w_state"] = uniform((d, d))
            t["rec.w_input"] = uniform((d, d))
            t["rec.bias"] = zeros((d,))
            t["rec.h0"] = zeros((1, d))
        else:
            # Zero init: every query maps to the neutral vector, so attention
            # starts uniform and all scores tie. Training then grows the
            # query-video alignment coherently from nothing, which stays
            # reachable even at fine-tuning-scale learning rates; a random
            # init of comparable magnitude would first have to be unlearned.
            t["query_proj.weight"] = zeros((d, d))
            t["query_proj.bias"] = zeros((d,))
        if config.fusion_projection:
            t["fusion_proj.weight"] = Tensor(np.eye(d), requires_grad=True)
            t["fusion_proj.bias"] = zeros((d,))
        if config.similarity == "cosine":
            t["log_temperature"] = Tensor(np.log(1.0 / 0.07), requires_grad=True)
        return cls(config, t)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def count_parameters(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def zero_grads(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def clone(self) -> "ModelParams":
        copies = {}
        for name, t in self.tensors.items():
            copies[name] = Tensor(t.data.copy(), requires_grad=t.requires_grad)
        return ModelParams(self.config, copies)

    # -- checkpoint format: magic, version, length-prefixed JSON header, ----
    # -- then raw little-endian float32 blocks in header order. -------------

    def save(self, path) -> None:
        header = {
            "config": asdict(self.config),
            "params": [
                {"name": name, "shape": list(t.shape)} for name, t in self.tensors.items()
            ],
        }
        header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<H", CHECKPOINT_VERSION))
            fh.write(struct.pack("<I", len(header_bytes)))
            fh.write(header_bytes)
            for t in self.tensors.values():
                fh.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path) -> "ModelParams":
        with open(path, "rb") as fh:
            blob = fh.read()
        if blob[:4] != CHECKPOINT_MAGIC:
            raise ValueError(f"not a model checkpoint: bad magic {blob[:4]!r}")
        (version,) = struct.unpack_from("<H", blob, 4)
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (header_len,) = struct.unpack_from("<I", blob, 6)
        header_end = 10 + header_len
        if header_end > len(blob):
            raise ValueError("truncated checkpoint header")
        header = json.loads(blob[10:header_end].decode("utf-8"))
        config = ModelConfig(**header["config"])
        tensors: dict[str, Tensor] = {}
        offset = header_end
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            end = offset + 4 * count
            if end > len(blob):
                raise ValueError(f"truncated checkpoint: parameter {entry['name']!r} incomplete")
            arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
            tensors[entry["name"]] = Tensor(
                arr.astype(np.float64).reshape(shape), requires_grad=True
            )
            offset = end
        if offset != len(blob):
            raise ValueError("trailing bytes after checkpoint parameters")
        return cls(config, tensors)


def checkpoint_hash(path) -> str:
    """sha256 of a checkpoint file; indexes record it for consistency checks."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def inject_positions(frames, params: ModelParams) -> Tensor:
    """Add the absolute positional embedding row to each frame row."""
    frames_t = _as_tensor(frames)
    n = frames_t.shape[0]
    max_frames = params.config.max_frames
    if n > max_frames:
        raise ValueError(
            f"video has {n} frames but the positional table covers {max_frames}; "
            f"subsample or truncate the video, or retrain with a larger max_frames"
        )
    return ag.add(frames_t, ag.slice_rows(params["positional_table"], 0, n))


def _attention_layer(x: Tensor, params: ModelParams, layer: int) -> Tensor:
    """One block: multi-head self-attention, residual add, layer norm."""
    cfg = params.config
    p = f"attn{layer}."
    head_dim = cfg.dim // cfg.num_heads
    inv_sqrt = 1.0 / np.sqrt(head_dim)

    q = ag.matmul(x, params[p + "wq"])
    k = ag.matmul(x, params[p + "wk"])
    v = ag.matmul(x, params[p + "wv"])
    heads = []
    for h in range(cfg.num_heads):
        lo, hi = h * head_dim, (h + 1) * head_dim
        qh = ag.slice_cols(q, lo, hi)
        kh = ag.slice_cols(k, lo, hi)
        vh = ag.slice_cols(v, lo, hi)
        attn = ag.softmax_rows(ag.scale(ag.matmul(qh, ag.transpose(kh)), inv_sqrt))
        heads.append(ag.matmul(attn, vh))
    mixed = ag.matmul(ag.concat_cols(heads), params[p + "wo"])
    return ag.layer_norm(
        ag.add(x, mixed), params[p + "ln_gain"], params[p + "ln_bias"]
    )


def encode_frames(video, params: ModelParams) -> Tensor:
    """Temporal frame representations: positions injected, then the
    self-attention stack. Returns an n x d tensor."""
    frames = video.frames if isinstance(video, VideoRecord) else video
    x = inject_positions(frames, params)
    for layer in range(params.config.num_layers):
        x = _attention_layer(x, params, layer)
    return x


_ACTIVATIONS = {"tanh": ag.tanh, "relu": ag.relu, "gelu": ag.gelu}


def encode_dialogue(query: DialogueQuery, params: ModelParams) -> Tensor:
    """Per-turn dialogue states, one row per turn. Returns m x d."""
    if query.mode != params.config.dialogue_mode:
        raise ValueError(
            f"query {query.query_id!r} was embedded in {query.mode!r} mode but the "
            f"model expects {params.config.dialogue_mode!r}"
        )
    turns = Tensor(query.turns)
    return _encode_turn_matrix(turns, params)


def _encode_turn_matrix(turns: Tensor, params: ModelParams) -> Tensor:
    cfg = params.config
    if cfg.dialogue_mode == "cumulative_prefix":
        return ag.add(ag.matmul(turns, params["query_proj.weight"]), params["query_proj.bias"])
    act = _ACTIVATIONS[cfg.recurrence_activation]
    state = params["rec.h0"]
    states = []
    for i in range(turns.shape[0]):
        step = ag.add(
            ag.add(
                ag.matmul(state, params["rec.w_state"]),
                ag.matmul(ag.slice_rows(turns, i, i + 1), params["rec.w_input"]),
            ),
            params["rec.bias"],
        )
        state = act(step)
        states.append(state)
    return ag.concat_rows(states)


def fuse_dialogue(states, params: ModelParams) -> Tensor:
    """Collapse turn states into the dialogue-level query vector (1 x d)."""
    states_t = _as_tensor(states)
    if states_t.ndim != 2 or states_t.shape[0] < 1:
        raise ValueError(f"states must be a non-empty matrix, got shape {states_t.shape}")
    if params.config.fusion == "mean":
        fused = ag.reduce_mean(states_t, axis=0, keepdims=True)
    else:
        m = states_t.shape[0]
        fused = ag.slice_rows(states_t, m - 1, m)
    if params.config.fusion_projection:
        fused = ag.add(
            ag.matmul(fused, params["fusion_proj.weight"]), params["fusion_proj.bias"]
        )
    return fused


def encode_query(query: DialogueQuery, params: ModelParams, rounds: int | None = None) -> Tensor:
    """Full query path: encode turns (optionally truncated), then fuse."""
    if rounds is not None:
        if not (1 <= rounds <= query.num_turns):
            raise ValueError(
                f"query {query.query_id!r} has {query.num_turns} turns, cannot use {rounds}"
            )
        query = DialogueQuery(query.query_id, query.turns[:rounds], query.mode)
    return fuse_dialogue(encode_dialogue(query, params), params)


def _similarity_rows(d_h: Tensor, frames: Tensor, params: ModelParams) -> Tensor:
    """Similarities between each query row and each frame row (Q x n)."""
    if params.config.similarity == "cosine":
        sims = ag.matmul(ag.normalize_rows(d_h), ag.transpose(ag.normalize_rows(frames)))
        return ag.mul(sims, ag.exp(params["log_temperature"]))
    return ag.matmul(d_h, ag.transpose(frames))


def _pool(d_h: Tensor, frames: Tensor, params: ModelParams) -> tuple[Tensor, Tensor, Tensor]:
    """Attentive pooling for a block of queries against one video.

    d_h is Q x d, frames is n x d; returns (weights Q x n, pooled Q x d,
    scores Q x 1).
    """
    weights = ag.softmax_rows(_similarity_rows(d_h, frames, params))
    pooled = ag.matmul(weights, frames)
    if params.config.similarity == "cosine":
        sims = ag.reduce_sum(
            ag.mul(ag.normalize_rows(d_h), ag.normalize_rows(pooled)), axis=1, keepdims=True
        )
        scores = ag.mul(sims, ag.exp(params["log_temperature"]))
    else:
        scores = ag.reduce_sum(ag.mul(d_h, pooled), axis=1, keepdims=True)
    return weights, pooled, scores


def pool_video(d_h, temporal_frames, params: ModelParams) -> PooledScore:
    """Pool one video's temporal frames under one query vector."""
    d_vec = np.asarray(
        d_h.data if isinstance(d_h, Tensor) else d_h, dtype=np.float64
    ).reshape(1, -1)
    frames = np.asarray(
        temporal_frames.data if isinstance(temporal_frames, Tensor) else temporal_frames,
        dtype=np.float64,
    )
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValueError(f"temporal frames must be a non-empty matrix, got shape {frames.shape}")
    if frames.shape[1] != d_vec.shape[1]:
        raise ValueError(
            f"dimension mismatch: query has {d_vec.shape[1]}, frames have {frames.shape[1]}"
        )
    weights, pooled, scores = _pool(Tensor(d_vec), Tensor(frames), params)
    return PooledScore(
        d_h=d_vec[0].copy(),
        v_h=pooled.data[0].copy(),
        weights=weights.data[0].copy(),
        score=float(scores.data[0, 0]),
    )


def score_matrix(
    queries: list[DialogueQuery],
    videos: list[VideoRecord],
    params: ModelParams,
    rounds: int | None = None,
) -> Tensor:
    """Score every query against every video; entry (q, v) is the pooled
    dot-product score. Differentiable, so this is also the training path."""
    if not queries or not videos:
        raise ValueError("score_matrix needs at least one query and one video")
    d = params.config.dim
    for q in queries:
        if q.dim != d:
            raise ValueError(f"query {q.query_id!r} has dim {q.dim}, model expects {d}")
    for v in videos:
        if v.dim != d:
            raise ValueError(f"video {v.video_id!r} has dim {v.dim}, model expects {d}")

    d_block = ag.concat_rows([encode_query(q, params, rounds=rounds) for q in queries])
    columns = []
    for video in videos:
        frames = encode_frames(video, params)
        _, _, scores = _pool(d_block, frames, params)
        columns.append(scores)
    return ag.concat_cols(columns)
