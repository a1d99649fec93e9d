"""Export jobs: frames and dialogue turns to embedding containers.

Videos arrive as a JSON list of {"video_id", "path", "fps"} entries where
path points at a frame stack (.npy, shape (n, ...)) or a directory of image
files; dialogues as a JSON list of {"dialogue_id", "turns": [...]}. One
container record per input id.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backends import truncate_texts
from .container import update_manifest, write_container

logger = logging.getLogger("embed_exporter")

DIALOGUE_MODES = ("per_turn", "cumulative_prefix")

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass(frozen=True)
class ExportJob:
    """One export: what to read, how to sample, where to write."""

    inputs: str | Path
    output: str | Path
    mode: str = "per_turn"
    sampling_rate: float = 1.0  # frames per second kept
    max_frames: int = 32
    manifest: str | Path | None = None

    def __post_init__(self):
        if self.mode not in DIALOGUE_MODES:
            raise ValueError(f"mode must be one of {DIALOGUE_MODES}, got {self.mode!r}")
        if self.sampling_rate <= 0:
            raise ValueError(f"sampling_rate must be positive, got {self.sampling_rate}")
        if self.max_frames < 1:
            raise ValueError(f"max_frames must be >= 1, got {self.max_frames}")


def _load_frames(path: Path) -> np.ndarray:
    """Read a frame stack from a .npy file or a directory of images."""
    if path.suffix == ".npy":
        frames = np.load(path)
        if frames.ndim < 2:
            raise ValueError(f"frame stack {path} has shape {frames.shape}, expected (n, ...)")
        return frames
    if path.is_dir():
        from PIL import Image

        files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise ValueError(f"no image files in {path}")
        return np.stack([np.asarray(Image.open(p)) for p in files])
    raise ValueError(f"cannot decode {path}: expected .npy stack or image directory")


def _sample_frames(frames: np.ndarray, fps: float, rate: float, max_frames: int) -> np.ndarray:
    """Uniform sampling at `rate` frames per second, capped at max_frames."""
    step = max(1, int(round(fps / rate)))
    sampled = frames[::step]
    return sampled[:max_frames]


def export_frames(job: ExportJob, backend) -> list[str]:
    """Embed each video's sampled frames into one container record.
    Returns the exported ids; undecodable videos are skipped and logged."""
    entries = json.loads(Path(job.inputs).read_text())
    records = []
    for entry in entries:
        video_id = entry["video_id"]
        try:
            frames = _load_frames(Path(entry["path"]))
            fps = float(entry.get("fps", 1.0))
            sampled = _sample_frames(frames, fps, job.sampling_rate, job.max_frames)
            records.append((video_id, backend.embed_frames(sampled)))
        except (OSError, ValueError) as exc:
            logger.warning("skipping undecodable video %s: %s", video_id, exc)
    write_container(job.output, records, dim=backend.dim)
    if job.manifest is not None:
        update_manifest(job.manifest, Path(job.output).name, {
            "kind": "frames", "count": len(records), "dim": backend.dim,
            "backend": backend.name,
        })
    return [rec_id for rec_id, _ in records]


def dialogue_rows(turns: list[str], mode: str, backend) -> np.ndarray:
    """Embed one dialogue: per_turn embeds each turn alone; cumulative_prefix
    embeds the concatenation of turns 1..i as row i. Row 1 is identical in
    both modes by construction."""
    if mode not in DIALOGUE_MODES:
        raise ValueError(f"mode must be one of {DIALOGUE_MODES}, got {mode!r}")
    if mode == "per_turn":
        texts = list(turns)
    else:
        texts = [" ".join(turns[:i + 1]) for i in range(len(turns))]
    limit = getattr(backend, "max_text_length", None)
    return backend.embed_texts(truncate_texts(texts, limit))


def export_dialogue(job: ExportJob, backend) -> list[str]:
    """Embed each dialogue into one container record of turn rows."""
    entries = json.loads(Path(job.inputs).read_text())
    records = []
    for entry in entries:
        turns = entry["turns"]
        if not turns:
            logger.warning("skipping dialogue %s: no turns", entry["dialogue_id"])
            continue
        records.append((entry["dialogue_id"], dialogue_rows(turns, job.mode, backend)))
    write_container(job.output, records, dim=backend.dim)
    if job.manifest is not None:
        update_manifest(job.manifest, Path(job.output).name, {
            "kind": "dialogues", "mode": job.mode, "count": len(records),
            "dim": backend.dim, "backend": backend.name,
        })
    return [rec_id for rec_id, _ in records]
