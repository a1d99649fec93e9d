"""Symmetric in-batch contrastive training.

Each batch scores its dialogues against its own videos; the diagonal holds
the matched pairs. The loss averages the dialogue-to-video and
video-to-dialogue directions of the in-batch objective. The default is the
standard log-softmax cross entropy; `loss_form="mean_probability"` swaps in
the no-log variant (negative mean softmax probability of the match) for
comparison, since both appear in the retrieval literature.

Recipe defaults: AdamW (betas 0.9/0.999), lr 1e-5, 10 epochs, batch 16,
global gradient-norm clip at 1.0, early stopping on validation R@1 with
patience 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .evaluation import evaluate
from .model import DialogueQuery, ModelParams, VideoRecord, score_matrix

LOSS_FORMS = ("log_softmax", "mean_probability")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5
    epochs: int = 10
    batch_size: int = 16
    max_grad_norm: float = 1.0
    adamw_beta1: float = 0.9
    adamw_beta2: float = 0.999
    adamw_epsilon: float = 1e-8
    weight_decay: float = 0.01
    seed: int = 0
    patience: int = 1
    loss_form: str = "log_softmax"

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.max_grad_norm <= 0:
            raise ValueError("learning_rate, epochs and max_grad_norm must be positive")
        if self.batch_size < 2:
            raise ValueError(
                f"batch_size must be >= 2 for in-batch negatives, got {self.batch_size}"
            )
        if self.adamw_epsilon <= 0 or self.weight_decay < 0 or self.patience < 1:
            raise ValueError("epsilon must be positive, weight_decay >= 0, patience >= 1")
        if self.loss_form not in LOSS_FORMS:
            raise ValueError(f"unknown loss_form {self.loss_form!r}; options: {LOSS_FORMS}")


def direction_loss(scores: Tensor, form: str = "log_softmax") -> Tensor:
    """One direction of the loss: rows are queries, the diagonal is the
    match. The other direction is this function on the transpose."""
    n, m = scores.shape if scores.ndim == 2 else (None, None)
    if n is None or n != m:
        raise ValueError(f"scores must be square, got shape {scores.shape}")
    if form not in LOSS_FORMS:
        raise ValueError(f"unknown loss_form {form!r}; options: {LOSS_FORMS}")
    eye = Tensor(np.eye(n))
    normalized = ag.log_softmax_rows(scores) if form == "log_softmax" else ag.softmax_rows(scores)
    diag_mean = ag.scale(ag.reduce_sum(ag.mul(normalized, eye)), 1.0 / n)
    return ag.scale(diag_mean, -1.0)


def contrastive_loss(scores: Tensor, form: str = "log_softmax") -> Tensor:
    """Symmetric in-batch contrastive loss over a square score matrix whose
    diagonal entries are the matched (dialogue, video) pairs."""
    d2v = direction_loss(scores, form)
    v2d = direction_loss(ag.transpose(scores), form)
    return ag.scale(ag.add(d2v, v2d), 0.5)


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    """Scale all gradients by max_norm/norm when the global L2 norm exceeds
    max_norm. Returns (possibly scaled grads, pre-clip norm)."""
    total = 0.0
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        total += float(np.sum(g * g))
    norm = float(np.sqrt(total))
    if norm > max_norm:
        factor = max_norm / norm
        grads = {name: g * factor for name, g in grads.items()}
    return grads, norm


class AdamW:
    """Adam with decoupled weight decay and bias correction."""

    def __init__(self, lr=1e-5, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.01):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.first_moment: dict[str, np.ndarray] = {}
        self.second_moment: dict[str, np.ndarray] = {}

    def step(self, params: ModelParams, grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        t = self.step_count
        for name, tensor in params.tensors.items():
            if name not in grads:
                continue
            g = grads[name]
            if g.shape != tensor.data.shape:
                raise ValueError(
                    f"gradient shape {g.shape} does not match parameter "
                    f"{name!r} shape {tensor.data.shape}"
                )
            m = self.first_moment.setdefault(name, np.zeros_like(tensor.data))
            v = self.second_moment.setdefault(name, np.zeros_like(tensor.data))
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            m_hat = m / (1 - self.beta1 ** t)
            v_hat = v / (1 - self.beta2 ** t)
            tensor.data -= self.lr * self.weight_decay * tensor.data
            tensor.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainResult:
    params: ModelParams
    log: list[dict] = field(default_factory=list)
    best_val_r1: float = 0.0
    epochs_run: int = 0
    aborted: bool = False

    def write_log(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for record in self.log:
                fh.write(json.dumps(record, sort_keys=True))
                fh.write("\n")


def train(
    config: TrainConfig,
    params: ModelParams,
    train_videos: list[VideoRecord],
    train_queries: list[DialogueQuery],
    val_videos: list[VideoRecord],
    val_queries: list[DialogueQuery],
) -> TrainResult:
    """Full training loop. Mutates params in place; the returned result
    carries the best-validation snapshot (which may be the input params
    untouched if epoch 0 was already best)."""
    if not train_videos or not val_videos:
        raise ValueError("train and validation splits must be non-empty")
    if len(train_videos) != len(train_queries):
        raise ValueError(
            f"{len(train_videos)} train videos vs {len(train_queries)} train queries"
        )
    by_id = {q.query_id: q for q in train_queries}
    pairs = []
    for video in train_videos:
        if video.video_id not in by_id:
            raise ValueError(f"train video {video.video_id!r} has no matching dialogue")
        pairs.append((video, by_id[video.video_id]))

    optimizer = AdamW(
        lr=config.learning_rate,
        beta1=config.adamw_beta1,
        beta2=config.adamw_beta2,
        eps=config.adamw_epsilon,
        weight_decay=config.weight_decay,
    )
    rng = np.random.default_rng(config.seed)
    result = TrainResult(params=params.clone())
    best_r1 = -1.0
    bad_epochs = 0

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(pairs))
        losses = []
        norms = []
        for start in range(0, len(order), config.batch_size):
            batch_idx = order[start:start + config.batch_size]
            if len(batch_idx) < 2:
                continue  # a single pair has no in-batch negatives
            batch = [pairs[i] for i in batch_idx]
            videos = [video for video, _ in batch]
            queries = [query for _, query in batch]
            scores = score_matrix(queries, videos, params)
            loss = contrastive_loss(scores, form=config.loss_form)
            loss_value = float(loss.data)
            if not np.isfinite(loss_value):
                result.aborted = True
                result.epochs_run = epoch
                result.log.append({"epoch": epoch, "event": "abort", "reason": "loss diverged"})
                return result
            params.zero_grads()
            loss.backward()
            grads = {
                name: t.grad for name, t in params.tensors.items() if t.grad is not None
            }
            try:
                grads, pre_norm = clip_grad_norm(grads, config.max_grad_norm)
            except FloatingPointError:
                result.aborted = True
                result.epochs_run = epoch
                result.log.append(
                    {"epoch": epoch, "event": "abort", "reason": "non-finite gradient"}
                )
                return result
            optimizer.step(params, grads)
            losses.append(loss_value)
            norms.append(pre_norm)

        val = evaluate(params, val_videos, val_queries)
        record = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)) if losses else None,
            "val_r1": val["r1"],
            "val_r5": val["r5"],
            "val_r10": val["r10"],
            "val_med": val["med_rank"],
            "val_mean": val["mean_rank"],
            "grad_norm_mean": float(np.mean(norms)) if norms else None,
        }
        result.log.append(record)
        result.epochs_run = epoch

        if val["r1"] >= best_r1:
            best_r1 = val["r1"]
            result.params = params.clone()
            result.best_val_r1 = best_r1
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break

    return result
