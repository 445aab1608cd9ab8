"""Command-line interface.

Three subcommands: ``train`` consumes an exported train.ini and fills an
output directory with the model, loss log, and validation sidecars;
``infer`` writes sidecar JSON for a batch of images; ``serve`` speaks the
external-process line protocol so the detector toolkit can drive this model
directly. Exit status is 0 on success, 1 on an operational failure, and 2
for command-line usage errors.

Machine-readable results go to stdout as JSON; progress and warnings go to
stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import read_settings
from .data import IMAGE_EXTS
from .errors import TrainerError
from .infer import GroundTruthEcho, infer_to_sidecars, load_predictor, serve
from .train import resolve_device, train


def _expand_images(entries: list[str]) -> list[Path]:
    """Accept image files and/or directories; directories list sorted images."""
    out: list[Path] = []
    for entry in entries:
        p = Path(entry)
        if p.is_dir():
            out.extend(
                f for f in sorted(p.iterdir()) if f.suffix.lower() in IMAGE_EXTS and f.is_file()
            )
        else:
            out.append(p)
    return out


def _emit(doc: dict) -> None:
    print(json.dumps(doc))


def _build_predictor(args) -> object:
    if args.echo_labels is not None:
        return GroundTruthEcho(args.echo_labels)
    device = resolve_device(args.device)
    return load_predictor(args.model, device, args.conf)


def cmd_train(args) -> int:
    settings = read_settings(args.config)
    run = train(settings, args.out, device=args.device)
    _emit(
        {
            "command": "train",
            "epochs": run.epochs_run,
            "best_epoch": run.best_epoch,
            "best_val_loss": run.best_val_loss,
            "stopped_early": run.stopped_early,
            "device": run.device,
            "model": str(run.model_path),
            "loss_log": str(run.loss_log_path),
            "val_sidecars": str(run.sidecar_dir),
        }
    )
    return 0


def cmd_infer(args) -> int:
    images = _expand_images(args.images)
    predictor = _build_predictor(args)
    written, failures = infer_to_sidecars(predictor, images, args.out)
    _emit(
        {
            "command": "infer",
            "written": len(written),
            "failed": len(failures),
            "output": str(args.out),
        }
    )
    return 1 if failures else 0


def cmd_serve(args) -> int:
    return serve(_build_predictor(args))


def _add_predictor_options(sub: argparse.ArgumentParser) -> None:
    source = sub.add_mutually_exclusive_group(required=True)
    source.add_argument("--model", help="checkpoint written by 'train'")
    source.add_argument(
        "--echo-labels",
        metavar="DIR",
        help="serve the label files in DIR instead of a model",
    )
    sub.add_argument("--conf", type=float, default=0.25)
    sub.add_argument("--device", choices=("auto", "cpu", "cuda"), default="auto")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bayocr-train")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("train", help="fine-tune a detector from an exported train.ini")
    sub.add_argument("--config", required=True, help="train.ini from export-train")
    sub.add_argument("--out", required=True, help="output directory for run artifacts")
    sub.add_argument("--device", choices=("auto", "cpu", "cuda"), default="auto")
    sub.set_defaults(func=cmd_train)

    sub = subs.add_parser("infer", help="write sidecar JSON for images")
    sub.add_argument("images", nargs="+")
    sub.add_argument("--out", required=True)
    _add_predictor_options(sub)
    sub.set_defaults(func=cmd_infer)

    sub = subs.add_parser("serve", help="line protocol: image paths in, sidecars out")
    _add_predictor_options(sub)
    sub.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except TrainerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
