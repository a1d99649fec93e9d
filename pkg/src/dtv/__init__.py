"""Dialogue-to-video retrieval engine.

Videos are ranked against a multi-turn dialogue query: frame embeddings
pass through a temporal self-attention encoder, dialogue turns through a
sequential query encoder, and a query-conditioned attentive pooling layer
produces one score per (dialogue, video) pair. Training is symmetric
in-batch contrastive; everything runs on a small reverse-mode autodiff
core over numpy arrays.
"""

from .autograd import Tensor, finite_checks_enabled, set_finite_checks
from .corpus import (
    CorpusManifest,
    SyntheticConfig,
    generate_synthetic,
    read_embeddings,
    split_corpus,
    write_embeddings,
)
from .evaluation import (
    RankingResult,
    compute_ranks,
    evaluate,
    mean_rank,
    median_rank,
    metrics_from_ranks,
    rank_candidates,
    recall_at_k,
    rounds_ablation,
)
from .model import (
    DialogueQuery,
    ModelConfig,
    ModelParams,
    PooledScore,
    VideoRecord,
    checkpoint_hash,
    encode_dialogue,
    encode_frames,
    encode_query,
    fuse_dialogue,
    inject_positions,
    pool_video,
    score_matrix,
)
from .training import AdamW, TrainConfig, TrainResult, clip_grad_norm, contrastive_loss, train

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "CorpusManifest",
    "DialogueQuery",
    "ModelConfig",
    "ModelParams",
    "PooledScore",
    "RankingResult",
    "SyntheticConfig",
    "Tensor",
    "TrainConfig",
    "TrainResult",
    "VideoRecord",
    "checkpoint_hash",
    "clip_grad_norm",
    "compute_ranks",
    "contrastive_loss",
    "encode_dialogue",
    "encode_frames",
    "encode_query",
    "evaluate",
    "finite_checks_enabled",
    "fuse_dialogue",
    "generate_synthetic",
    "inject_positions",
    "mean_rank",
    "median_rank",
    "metrics_from_ranks",
    "pool_video",
    "rank_candidates",
    "read_embeddings",
    "recall_at_k",
    "rounds_ablation",
    "score_matrix",
    "set_finite_checks",
    "split_corpus",
    "train",
    "write_embeddings",
]
