"""Command-line entry points: synth | train | eval | index | serve |
export-report.

Each subcommand is a thin wrapper over one library operation; flags mirror
the config dataclass defaults so a bare invocation reproduces the standard
recipe.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .corpus import CorpusManifest, SyntheticConfig, generate_synthetic
from .evaluation import evaluate, rounds_ablation
from .model import ModelConfig, ModelParams
from .service import (
    HashingStubProvider,
    HttpEmbeddingProvider,
    build_index,
    create_app,
    load_index,
)
from .training import TrainConfig, train


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtv", description="dialogue-to-video retrieval engine"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a planted-correspondence synthetic corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-train", type=int, default=512)
    p.add_argument("--num-val", type=int, default=128)
    p.add_argument("--num-test", type=int, default=128)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--turns", type=int, default=10)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--latent-dim", type=int, default=30)
    p.add_argument("--noise-sigma", type=float, default=0.02)
    p.add_argument("--query-scale", type=float, default=10.0)
    p.add_argument("--mode", choices=["per_turn", "cumulative_prefix"],
                   default="cumulative_prefix")
    p.add_argument("--name", default="planted")

    p = sub.add_parser("train", help="train on a corpus and save the best checkpoint")
    p.add_argument("--corpus", required=True, help="path to manifest.json")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--log", help="JSON-lines epoch log output path")
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--max-grad-norm", type=float, default=1.0)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--patience", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--max-frames", type=int, default=32)
    p.add_argument("--fusion", choices=["mean", "last"], default="mean")
    p.add_argument("--loss-form", choices=["log_softmax", "mean_probability"],
                   default="log_softmax")

    p = sub.add_parser("eval", help="evaluate a checkpoint (or untrained weights)")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--checkpoint", help="omit to evaluate freshly initialized weights")
    p.add_argument("--rounds", type=int, help="truncate queries to this many turns")
    p.add_argument("--seed", type=int, default=0, help="init seed when no checkpoint")
    p.add_argument("--out", help="also write the report JSON here")

    p = sub.add_parser("index", help="precompute temporal frame matrices for serving")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="index output directory")

    p = sub.add_parser("serve", help="run the interactive retrieval HTTP service")
    p.add_argument("--checkpoint", default=os.environ.get("DTV_CHECKPOINT"))
    p.add_argument("--index", default=os.environ.get("DTV_INDEX"))
    p.add_argument("--port", type=int,
                   default=int(os.environ.get("DTV_PORT", "8000")))
    p.add_argument("--provider-url",
                   default=os.environ.get("DTV_EMBED_PROVIDER_URL"))
    p.add_argument("--stub-provider", action="store_true",
                   help="use the deterministic hashing stub for text turns")

    p = sub.add_parser("export-report", help="evaluation report with rounds curve")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-rounds-curve", action="store_true")

    return parser


def _load_model(path) -> ModelParams:
    return ModelParams.load(path)


def _cmd_synth(args) -> int:
    config = SyntheticConfig(
        num_train=args.num_train,
        num_val=args.num_val,
        num_test=args.num_test,
        frames=args.frames,
        turns=args.turns,
        dim=args.dim,
        latent_dim=args.latent_dim,
        noise_sigma=args.noise_sigma,
        query_scale=args.query_scale,
        dialogue_mode=args.mode,
        name=args.name,
    )
    manifest = generate_synthetic(config, seed=args.seed, out_dir=args.out)
    print(f"wrote corpus {manifest.name!r} to {args.out}: "
          f"{manifest.counts} videos, dim {manifest.embedding_dim}")
    return 0


def _cmd_train(args) -> int:
    manifest = CorpusManifest.load(args.corpus)
    train_v, train_q = manifest.load_split("train")
    val_v, val_q = manifest.load_split("val")
    model_config = ModelConfig(
        dim=manifest.embedding_dim,
        max_frames=max(args.max_frames, manifest.frames),
        num_layers=args.layers,
        num_heads=args.heads,
        dialogue_mode=manifest.dialogue_mode,
        fusion=args.fusion,
    )
    params = ModelParams.initialize(model_config, seed=args.seed)
    config = TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        max_grad_norm=args.max_grad_norm,
        weight_decay=args.weight_decay,
        seed=args.seed,
        patience=args.patience,
        loss_form=args.loss_form,
    )
    result = train(config, params, train_v, train_q, val_v, val_q)
    for record in result.log:
        print(json.dumps(record, sort_keys=True))
    if result.aborted:
        print("training aborted; saving last good checkpoint", file=sys.stderr)
    result.params.save(args.out)
    if args.log:
        result.write_log(args.log)
    print(f"saved checkpoint to {args.out} (best val R@1 {result.best_val_r1:.4f})")
    return 1 if result.aborted else 0


def _cmd_eval(args) -> int:
    manifest = CorpusManifest.load(args.corpus)
    videos, queries = manifest.load_split(args.split)
    if args.checkpoint:
        params = _load_model(args.checkpoint)
    else:
        params = ModelParams.initialize(
            ModelConfig(
                dim=manifest.embedding_dim,
                max_frames=max(32, manifest.frames),
                dialogue_mode=manifest.dialogue_mode,
            ),
            seed=args.seed,
        )
    report = evaluate(params, videos, queries, rounds=args.rounds)
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0


def _cmd_index(args) -> int:
    manifest = CorpusManifest.load(args.corpus)
    videos, _ = manifest.load_split(args.split)
    params = _load_model(args.checkpoint)
    index = build_index(params, args.checkpoint, videos, args.out,
                        max_turns=manifest.turns)
    print(f"indexed {len(index.video_ids)} videos into {args.out} "
          f"(checkpoint {index.checkpoint_sha256[:12]}…)")
    return 0


def _cmd_serve(args) -> int:
    if not args.checkpoint or not args.index:
        print("serve needs --checkpoint and --index (or DTV_CHECKPOINT / DTV_INDEX)",
              file=sys.stderr)
        return 2
    import uvicorn

    params = _load_model(args.checkpoint)
    index = load_index(args.index, checkpoint_path=args.checkpoint)
    if args.provider_url:
        provider = HttpEmbeddingProvider(args.provider_url)
    elif args.stub_provider:
        provider = HashingStubProvider(dim=params.config.dim)
    else:
        provider = None
    app = create_app(params, index, provider=provider)
    uvicorn.run(app, host="127.0.0.1", port=args.port)
    return 0


def _cmd_export_report(args) -> int:
    manifest = CorpusManifest.load(args.corpus)
    videos, queries = manifest.load_split(args.split)
    params = _load_model(args.checkpoint)
    report = evaluate(params, videos, queries)
    if not args.no_rounds_curve:
        report["rounds_curve"] = rounds_ablation(params, videos, queries)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote report to {args.out}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "index": _cmd_index,
    "serve": _cmd_serve,
    "export-report": _cmd_export_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
