"""Embedding container I/O.

Layout (little-endian): magic b"DTVE", version u16, record count u32,
embedding dim u32, then per record a u16 id length, the UTF-8 id, a u32 row
count, and rows*dim float32 values. This implementation is independent of
the retrieval engine's; the two interoperate at the byte level.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"DTVE"
VERSION = 1


def write_container(path, records: list[tuple[str, np.ndarray]], dim: int | None = None) -> None:
    """Write (id, rows x dim matrix) records to a container file."""
    if dim is None:
        if not records:
            raise ValueError("cannot infer dim for an empty container; pass dim explicitly")
        dim = int(np.asarray(records[0][1]).shape[1])
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HII", VERSION, len(records), dim))
        for rec_id, matrix in records:
            m = np.asarray(matrix, dtype=np.float64)
            if m.ndim != 2 or m.shape[1] != dim:
                raise ValueError(f"record {rec_id!r} has shape {m.shape}, expected (*, {dim})")
            id_bytes = rec_id.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise ValueError(f"record id too long: {len(id_bytes)} bytes")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(struct.pack("<I", m.shape[0]))
            fh.write(np.ascontiguousarray(m, dtype="<f4").tobytes())


def read_container(path) -> list[tuple[str, np.ndarray]]:
    """Read a container file; float32 payload is widened to float64."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"not an embedding container: bad magic {blob[:4]!r}")
    version, count, dim = struct.unpack_from("<HII", blob, 4)
    if version != VERSION:
        raise ValueError(f"unsupported container version {version}")
    records: list[tuple[str, np.ndarray]] = []
    offset = 14
    for _ in range(count):
        if offset + 2 > len(blob):
            raise ValueError(f"truncated container: header promises {count} records")
        (id_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        rec_id = blob[offset:offset + id_len].decode("utf-8")
        offset += id_len
        (rows,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        payload = rows * dim * 4
        if offset + payload > len(blob):
            raise ValueError(f"truncated container: record {rec_id!r} payload cut short")
        matrix = np.frombuffer(blob, dtype="<f4", count=rows * dim, offset=offset)
        records.append((rec_id, matrix.reshape(rows, dim).astype(np.float64)))
        offset += payload
    if offset != len(blob):
        raise ValueError(f"trailing bytes after {count} records: {len(blob) - offset}")
    return records


def update_manifest(manifest_path, entry_key: str, entry: dict) -> None:
    """Merge one entry into a JSON manifest, writing atomically so a crash
    mid-export never leaves a half-written manifest."""
    manifest_path = Path(manifest_path)
    manifest = {}
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
    manifest[entry_key] = entry
    fd, tmp_name = tempfile.mkstemp(dir=manifest_path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp_name, manifest_path)
    except BaseException:
        os.unlink(tmp_name)
        raise
