"""Command-line entry: export-frames, export-dialogue, serve."""

from __future__ import annotations

import argparse
import sys

from .backends import load_backend
from .jobs import ExportJob, export_dialogue, export_frames


def _add_backend_flags(parser):
    parser.add_argument("--backend", default="stub", help="stub or clip")
    parser.add_argument("--dim", type=int, default=32,
                        help="embedding width (stub backend only)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embed-exporter")
    sub = parser.add_subparsers(dest="command", required=True)

    frames = sub.add_parser("export-frames", help="embed sampled video frames")
    frames.add_argument("--videos", required=True, help="JSON list of {video_id, path, fps}")
    frames.add_argument("--out", required=True)
    frames.add_argument("--sampling-rate", type=float, default=1.0)
    frames.add_argument("--max-frames", type=int, default=32)
    frames.add_argument("--manifest")
    _add_backend_flags(frames)

    dialogue = sub.add_parser("export-dialogue", help="embed dialogue turns")
    dialogue.add_argument("--dialogues", required=True,
                          help="JSON list of {dialogue_id, turns}")
    dialogue.add_argument("--out", required=True)
    dialogue.add_argument("--mode", default="per_turn",
                          choices=("per_turn", "cumulative_prefix"))
    dialogue.add_argument("--manifest")
    _add_backend_flags(dialogue)

    serve = sub.add_parser("serve", help="run the embedding endpoint")
    serve.add_argument("--port", type=int, default=8100)
    _add_backend_flags(serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        backend = load_backend(args.backend, dim=args.dim)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if args.command == "export-frames":
        job = ExportJob(inputs=args.videos, output=args.out,
                        sampling_rate=args.sampling_rate,
                        max_frames=args.max_frames, manifest=args.manifest)
        ids = export_frames(job, backend)
        print(f"exported {len(ids)} videos to {args.out}")
        return 0
    if args.command == "export-dialogue":
        job = ExportJob(inputs=args.dialogues, output=args.out,
                        mode=args.mode, manifest=args.manifest)
        ids = export_dialogue(job, backend)
        print(f"exported {len(ids)} dialogues to {args.out}")
        return 0
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(backend), host="127.0.0.1", port=args.port)
        return 0
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
