"""Offline embedding exporter.

Turns video frames and dialogue turns into embedding container files, and
serves the same embeddings over HTTP for interactive use. Backends are
pluggable: a deterministic hashing stub for offline work and tests, or a
pretrained vision-language tower where weights are available.
"""

from .backends import ClipBackend, HashingStubBackend, load_backend, truncate_texts
from .container import read_container, update_manifest, write_container
from .jobs import ExportJob, dialogue_rows, export_dialogue, export_frames
from .service import create_app

__version__ = "0.1.0"

__all__ = [
    "ClipBackend",
    "ExportJob",
    "HashingStubBackend",
    "create_app",
    "dialogue_rows",
    "export_dialogue",
    "export_frames",
    "load_backend",
    "read_container",
    "truncate_texts",
    "update_manifest",
    "write_container",
]
