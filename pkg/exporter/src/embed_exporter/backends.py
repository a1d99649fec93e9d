"""Embedding backends.

A backend turns texts or image frames into embedding rows. The hashing stub
is fully deterministic and needs no model weights, so every test and demo
runs offline; the CLIP backend wraps a pretrained vision-language tower and
is only importable where its weights are available.
"""

from __future__ import annotations

import hashlib
import warnings

import numpy as np


class HashingStubBackend:
    """Deterministic embeddings with no model behind them: each text (or
    frame byte content) seeds a random generator from its hash. Identical
    input always yields the identical row, in any process."""

    name = "hashing-stub"

    def __init__(self, dim: int = 32, scale: float = 1.0, max_text_length: int | None = 512):
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.scale = scale
        self.max_text_length = max_text_length

    def _row(self, payload: bytes) -> np.ndarray:
        digest = hashlib.sha256(payload).digest()
        seed = int.from_bytes(digest[:8], "little")
        rng = np.random.default_rng(seed)
        return self.scale * rng.standard_normal(self.dim)

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        rows = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            rows[i] = self._row(text.encode("utf-8"))
        return rows

    def embed_frames(self, frames: np.ndarray) -> np.ndarray:
        """frames: (n, ...) array of frame data; one row per frame."""
        frames = np.asarray(frames)
        if frames.ndim < 2:
            raise ValueError(f"frames must be (n, ...), got shape {frames.shape}")
        rows = np.zeros((frames.shape[0], self.dim))
        for i in range(frames.shape[0]):
            rows[i] = self._row(np.ascontiguousarray(frames[i]).tobytes())
        return rows


class ClipBackend:
    """Pretrained image/text towers (ViT-B/16 class). Requires downloaded
    weights; constructing it where none are available raises with a hint
    to use the stub backend instead."""

    name = "clip-vit-b16"

    def __init__(self, model_name: str = "openai/clip-vit-base-patch16"):
        try:
            import torch  # noqa: F401
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise RuntimeError(
                "clip backend needs torch and transformers installed; "
                "use the hashing stub backend for offline work"
            ) from exc
        try:
            self._model = CLIPModel.from_pretrained(model_name)
            self._processor = CLIPProcessor.from_pretrained(model_name)
        except OSError as exc:
            raise RuntimeError(
                f"could not load weights for {model_name!r} (no local cache "
                "and no hub access?); use the hashing stub backend instead"
            ) from exc
        self._model.eval()
        self.dim = int(self._model.config.projection_dim)
        self.max_text_length = int(self._processor.tokenizer.model_max_length)

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        import torch

        inputs = self._processor(text=texts, return_tensors="pt",
                                 padding=True, truncation=True)
        with torch.no_grad():
            features = self._model.get_text_features(**inputs)
        return features.double().numpy()

    def embed_frames(self, frames: np.ndarray) -> np.ndarray:
        import torch

        images = [frame for frame in np.asarray(frames)]
        inputs = self._processor(images=images, return_tensors="pt")
        with torch.no_grad():
            features = self._model.get_image_features(**inputs)
        return features.double().numpy()


def truncate_texts(texts: list[str], max_length: int | None) -> list[str]:
    """Cap each text at the backend's limit, warning per truncation."""
    if max_length is None:
        return list(texts)
    out = []
    for text in texts:
        if len(text) > max_length:
            warnings.warn(f"text truncated from {len(text)} to {max_length} characters")
            text = text[:max_length]
        out.append(text)
    return out


def load_backend(name: str, dim: int = 32) -> object:
    """Backend factory for the CLI: 'stub' or 'clip'."""
    if name == "stub":
        return HashingStubBackend(dim=dim)
    if name == "clip":
        return ClipBackend()
    raise ValueError(f"unknown backend {name!r}; expected 'stub' or 'clip'")
