"""Corpus model: binary embedding container, split manifests, and a
planted-correspondence synthetic generator.

The generator plants a shared latent vector per video. Frame rows are a
fixed orthonormal projection of the full latent plus noise; dialogue turn i
reveals a fresh disjoint slice of the latent, so a longer dialogue carries
strictly more information about its video. That makes retrieval learnable
at desk scale and makes round-count sensitivity measurable.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import DialogueQuery, VideoRecord

EMBED_MAGIC = b"DTVE"
EMBED_VERSION = 1

SPLITS = ("train", "val", "test")


# ---------------------------------------------------------------------------
# Embedding container: magic, version u16, count u32, dim u32, then per
# record u16 id-length + UTF-8 id + u32 rows + rows*dim little-endian f32.
# ---------------------------------------------------------------------------

def write_embeddings(path, records: list[tuple[str, np.ndarray]], dim: int | None = None) -> None:
    """Write (id, rows x dim matrix) records. Empty record lists are valid
    but then require an explicit dim."""
    if dim is None:
        if not records:
            raise ValueError("cannot infer dim for an empty container; pass dim explicitly")
        dim = int(np.asarray(records[0][1]).shape[1])
    with open(path, "wb") as fh:
        fh.write(EMBED_MAGIC)
        fh.write(struct.pack("<HII", EMBED_VERSION, len(records), dim))
        for rec_id, matrix in records:
            m = np.asarray(matrix, dtype=np.float64)
            if m.ndim != 2 or m.shape[1] != dim:
                raise ValueError(
                    f"record {rec_id!r} has shape {m.shape}, expected (*, {dim})"
                )
            id_bytes = rec_id.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise ValueError(f"record id too long: {len(id_bytes)} bytes")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(struct.pack("<I", m.shape[0]))
            fh.write(np.ascontiguousarray(m, dtype="<f4").tobytes())


def read_embeddings(path) -> list[tuple[str, np.ndarray]]:
    """Read a container written by write_embeddings. The float32 payload is
    widened to float64 for downstream math; round-trips are bit-exact at
    32-bit precision."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != EMBED_MAGIC:
        raise ValueError(f"not an embedding container: bad magic {blob[:4]!r}")
    version, count, dim = struct.unpack_from("<HII", blob, 4)
    if version != EMBED_VERSION:
        raise ValueError(f"unsupported embedding container version {version}")
    records: list[tuple[str, np.ndarray]] = []
    offset = 14
    for _ in range(count):
        if offset + 2 > len(blob):
            raise ValueError("truncated embedding container: missing id length")
        (id_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        if offset + id_len + 4 > len(blob):
            raise ValueError("truncated embedding container: incomplete record header")
        rec_id = blob[offset:offset + id_len].decode("utf-8")
        offset += id_len
        (rows,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        end = offset + 4 * rows * dim
        if end > len(blob):
            raise ValueError(f"truncated embedding container: record {rec_id!r} incomplete")
        matrix = np.frombuffer(blob, dtype="<f4", count=rows * dim, offset=offset)
        records.append((rec_id, matrix.astype(np.float64).reshape(rows, dim)))
        offset = end
    if offset != len(blob):
        raise ValueError("trailing bytes after final embedding record")
    return records


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

@dataclass
class CorpusManifest:
    """Describes one corpus on disk: splits, file paths, embedding geometry."""

    name: str
    embedding_dim: int
    dialogue_mode: str
    counts: dict[str, int]
    video_files: dict[str, str]
    dialogue_files: dict[str, str]
    turns: int
    frames: int
    generator_seed: int | None = None
    root: str = "."

    def save(self, path) -> None:
        payload = {
            "name": self.name,
            "embedding_dim": self.embedding_dim,
            "dialogue_mode": self.dialogue_mode,
            "counts": self.counts,
            "video_files": self.video_files,
            "dialogue_files": self.dialogue_files,
            "turns": self.turns,
            "frames": self.frames,
            "generator_seed": self.generator_seed,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        path = Path(path)
        if path.is_dir():
            path = path / "manifest.json"
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(root=str(path.parent), **payload)

    def load_split(self, split: str) -> tuple[list[VideoRecord], list[DialogueQuery]]:
        """Load one split. Gold pairing is by id: a dialogue and its video
        share an id. Raises if the two files disagree on the id set."""
        if split not in self.counts:
            raise ValueError(f"manifest has no split {split!r}; has {sorted(self.counts)}")
        root = Path(self.root)
        videos = [
            VideoRecord(rec_id, matrix)
            for rec_id, matrix in read_embeddings(root / self.video_files[split])
        ]
        dialogues = [
            DialogueQuery(rec_id, matrix, mode=self.dialogue_mode)
            for rec_id, matrix in read_embeddings(root / self.dialogue_files[split])
        ]
        video_ids = {v.video_id for v in videos}
        dialogue_ids = {q.query_id for q in dialogues}
        if video_ids != dialogue_ids:
            missing = sorted(video_ids ^ dialogue_ids)[:5]
            raise ValueError(
                f"split {split!r}: video and dialogue id sets differ, e.g. {missing}"
            )
        if len(videos) != self.counts[split]:
            raise ValueError(
                f"split {split!r}: manifest says {self.counts[split]} videos, "
                f"file has {len(videos)}"
            )
        for rec in videos:
            if rec.dim != self.embedding_dim:
                raise ValueError(
                    f"video {rec.video_id!r} has dim {rec.dim}, "
                    f"manifest says {self.embedding_dim}"
                )
        for rec in dialogues:
            if rec.dim != self.embedding_dim:
                raise ValueError(
                    f"dialogue {rec.query_id!r} has dim {rec.dim}, "
                    f"manifest says {self.embedding_dim}"
                )
        return videos, dialogues


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticConfig:
    """Planted-correspondence corpus parameters.

    information_fractions[i] is the share of latent dimensions revealed at
    turn i+1; fractions must sum to <= 1. The default blends a uniform and
    a harmonic schedule (half each): opening turns carry the most fresh
    information, the way early exchanges narrow a topic fastest, while
    every later turn still adds signal, so round-count curves keep rising
    instead of plateauing. query_scale sets the norm of dialogue rows
    relative to frame rows, which controls how large a score a given
    alignment-matrix magnitude produces.
    """

    num_train: int = 512
    num_val: int = 128
    num_test: int = 128
    frames: int = 8
    turns: int = 10
    dim: int = 32
    latent_dim: int = 30
    noise_sigma: float = 0.02
    query_scale: float = 10.0
    information_fractions: tuple[float, ...] | None = None
    dialogue_mode: str = "cumulative_prefix"
    name: str = "planted"

    def __post_init__(self):
        if min(self.num_train, self.num_val, self.num_test) < 1:
            raise ValueError("every split needs at least one video")
        if self.frames < 1 or self.turns < 1 or self.dim < 1:
            raise ValueError("frames, turns and dim must be positive")
        if not (1 <= self.latent_dim <= self.dim):
            raise ValueError(f"latent_dim must be in [1, dim], got {self.latent_dim}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.dialogue_mode not in ("per_turn", "cumulative_prefix"):
            raise ValueError(f"unknown dialogue_mode {self.dialogue_mode!r}")
        fractions = self.fractions()
        if len(fractions) > self.turns:
            raise ValueError(
                f"{len(fractions)} information fractions for {self.turns} turns"
            )
        if any(f < 0 for f in fractions):
            raise ValueError("information fractions must be >= 0")
        if sum(fractions) > 1.0 + 1e-9:
            raise ValueError(f"information fractions sum to {sum(fractions)}, must be <= 1")

    def fractions(self) -> tuple[float, ...]:
        if self.information_fractions is not None:
            return tuple(self.information_fractions)
        m = self.turns
        harmonic_total = sum(1.0 / t for t in range(1, m + 1))
        weights = [0.5 / m + 0.5 / (t * harmonic_total) for t in range(1, m + 1)]
        total = sum(weights)
        return tuple(w / total for w in weights)

    def baseline_noise_threshold(self) -> float:
        """noise_sigma level below which a raw-embedding dot-product
        baseline is expected to retrieve well above chance: per-dimension
        noise stays under an eighth of the per-dimension signal."""
        return float(np.sqrt(self.latent_dim) / (8.0 * np.sqrt(self.dim)))

    def turn_slices(self) -> list[slice]:
        """Disjoint latent index ranges, one per turn, sized by cumulative
        rounding of the fractions so no dimension is lost to truncation."""
        fractions = list(self.fractions()) + [0.0] * (self.turns - len(self.fractions()))
        bounds = [0]
        total = 0.0
        for f in fractions:
            total += f
            bounds.append(int(round(total * self.latent_dim)))
        return [slice(bounds[i], bounds[i + 1]) for i in range(self.turns)]


def _generate_split(config: SyntheticConfig, rng, projection, split, count):
    slices = config.turn_slices()
    videos = []
    dialogues = []
    for i in range(count):
        rec_id = f"{split}-{i:04d}"
        z = rng.standard_normal(config.latent_dim)
        signal = projection @ z
        frames = np.tile(signal, (config.frames, 1))
        frames += config.noise_sigma * rng.standard_normal(frames.shape)
        revealed = np.zeros(config.latent_dim)
        rows = np.zeros((config.turns, config.dim))
        for t, sl in enumerate(slices):
            fresh = np.zeros(config.latent_dim)
            fresh[sl] = z[sl]
            revealed[sl] = z[sl]
            visible = fresh if config.dialogue_mode == "per_turn" else revealed
            rows[t] = config.query_scale * (projection @ visible)
        rows += config.noise_sigma * rng.standard_normal(rows.shape)
        videos.append((rec_id, frames))
        dialogues.append((rec_id, rows))
    return videos, dialogues


def generate_synthetic(config: SyntheticConfig, seed: int, out_dir) -> CorpusManifest:
    """Generate corpus files plus a manifest under out_dir. Deterministic:
    the same (config, seed) produces byte-identical files."""
    if sum(config.fractions()) == 0.0:
        warnings.warn(
            "all information fractions are zero: dialogues carry no signal "
            "and retrieval cannot beat chance",
            stacklevel=2,
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    # Orthonormal columns, so latent dot products survive projection exactly.
    gaussian = rng.standard_normal((config.dim, config.latent_dim))
    projection, _ = np.linalg.qr(gaussian)

    counts = {"train": config.num_train, "val": config.num_val, "test": config.num_test}
    video_files = {}
    dialogue_files = {}
    for split in SPLITS:
        videos, dialogues = _generate_split(config, rng, projection, split, counts[split])
        video_files[split] = f"{split}.videos.dtve"
        dialogue_files[split] = f"{split}.dialogues.dtve"
        write_embeddings(out_dir / video_files[split], videos, dim=config.dim)
        write_embeddings(out_dir / dialogue_files[split], dialogues, dim=config.dim)

    manifest = CorpusManifest(
        name=config.name,
        embedding_dim=config.dim,
        dialogue_mode=config.dialogue_mode,
        counts=counts,
        video_files=video_files,
        dialogue_files=dialogue_files,
        turns=config.turns,
        frames=config.frames,
        generator_seed=seed,
        root=str(out_dir),
    )
    manifest.save(out_dir / "manifest.json")
    return manifest


# ---------------------------------------------------------------------------
# Splitting arbitrary id lists
# ---------------------------------------------------------------------------

def split_corpus(
    ids: list[str],
    ratios: tuple[float, float, float] | None = None,
    explicit: dict[str, list[str]] | None = None,
    seed: int = 0,
) -> dict[str, list[str]]:
    """Partition ids into train/val/test. Explicit lists win over ratios;
    with ratios the shuffle is seeded so the split is reproducible."""
    if len(set(ids)) != len(ids):
        raise ValueError("ids must be unique")
    if explicit is not None:
        seen: set[str] = set()
        known = set(ids)
        for split, members in explicit.items():
            if split not in SPLITS:
                raise ValueError(f"unknown split name {split!r}")
            overlap = seen & set(members)
            if overlap:
                raise ValueError(f"ids appear in more than one split: {sorted(overlap)[:5]}")
            unknown = set(members) - known
            if unknown:
                raise ValueError(f"ids not in the corpus: {sorted(unknown)[:5]}")
            seen |= set(members)
        return {split: list(explicit.get(split, [])) for split in SPLITS}
    if ratios is None:
        raise ValueError("pass either ratios or explicit split lists")
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative values summing to 1, got {ratios}")
    shuffled = list(ids)
    np.random.default_rng(seed).shuffle(shuffled)
    n = len(shuffled)
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    n_val = min(n_val, n - n_train)
    return {
        "train": shuffled[:n_train],
        "val": shuffled[n_train:n_train + n_val],
        "test": shuffled[n_train + n_val:],
    }
