"""Command-line interface.

Subcommands cover the full workflow: preprocess rasters, augment and split
datasets, run a detector backend, score predictions, benchmark, render
overlays, and export a training hand-off. Exit status is 0 on success, 1 on
an operational failure (bad file, bad config, backend trouble), and 2 for
command-line usage errors.

Machine-readable results go to stdout as JSON; progress and warnings go to
stderr. Option precedence is flags > config file > defaults.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import shutil
import sys
import tempfile
from pathlib import Path

from . import config as cfgmod
from . import dataset as ds
from .detection import EVAL_CONFIDENCE, NMS_IOU, PREDICT_CONFIDENCE
from .errors import BayocrError, InputError
from .evaluate import evaluate_detections, plot_confusion
from .imgproc import (
    PipelineConfig,
    load_raster,
    run_pipeline,
    run_pipeline_stages,
    save_raster,
)
from .render import draw_annotations, draw_detections
from .runtime import (
    ProcessBackend,
    ReplayBackend,
    benchmark,
    detect,
    load_sidecar,
    write_sidecar,
)
from .script import ClassInventory, load_lexicon, disambiguate, transliterate_lines


def _parse_pair(text: str) -> tuple[float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise InputError(f"expected 'lo,hi', got {text!r}")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError:
        raise InputError(f"expected numbers in 'lo,hi', got {text!r}") from None


def _parse_fractions(text: str) -> tuple[float, float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise InputError(f"expected three comma-separated fractions, got {text!r}")
    vals = []
    for p in parts:
        try:
            if "/" in p:
                num, den = p.split("/", 1)
                vals.append(float(num) / float(den))
            else:
                vals.append(float(p))
        except (ValueError, ZeroDivisionError):
            raise InputError(f"bad fraction {p!r}") from None
    return (vals[0], vals[1], vals[2])


def _expand_images(entries: list[str]) -> list[Path]:
    """Accept image files and/or directories; directories list sorted images."""
    out: list[Path] = []
    for entry in entries:
        p = Path(entry)
        if p.is_dir():
            found = sorted(
                f for f in p.iterdir() if f.suffix.lower() in ds.IMAGE_EXTS and f.is_file()
            )
            if not found:
                raise InputError(f"no images in directory {p}")
            out.extend(found)
        elif p.is_file():
            out.append(p)
        else:
            raise InputError(f"image path does not exist: {p}")
    if not out:
        raise InputError("no input images given")
    return out


def _make_backend(spec: str):
    if spec.startswith("replay:"):
        return ReplayBackend(spec[len("replay:"):])
    if spec.startswith("process:"):
        return ProcessBackend(spec[len("process:"):])
    raise InputError(
        f"backend must look like 'replay:DIR' or 'process:COMMAND', got {spec!r}"
    )


def _load_config(args):
    return cfgmod.load_config_file(args.config) if getattr(args, "config", None) else None


def _pipeline_from_args(args, cp) -> PipelineConfig:
    stage_order = (
        cfgmod.parse_stage_order(args.stage_order) if args.stage_order else None
    )
    return cfgmod.build_pipeline_config(
        cp,
        stage_order=stage_order,
        sharpen_strength=args.sharpen_strength,
        tv_weight=args.tv_weight,
        tv_iterations=args.tv_iterations,
        target_size=args.target_size,
        otsu_tie_break=args.otsu_tie_break,
    )


def _add_pipeline_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--stage-order", help="comma-separated stage list")
    sub.add_argument("--sharpen-strength", type=float, default=None)
    sub.add_argument("--tv-weight", type=float, default=None)
    sub.add_argument("--tv-iterations", type=int, default=None)
    sub.add_argument("--target-size", type=int, default=None)
    sub.add_argument("--otsu-tie-break", choices=("lowest", "highest"), default=None)


def _emit(doc: dict) -> None:
    print(json.dumps(doc))


# ---------------------------------------------------------------------------
# preprocess
# ---------------------------------------------------------------------------


def cmd_preprocess(args) -> int:
    cp = _load_config(args)
    pipeline = _pipeline_from_args(args, cp)
    in_dir = Path(args.input)
    if not in_dir.is_dir():
        raise InputError(f"input directory does not exist: {in_dir}")
    rels = sorted(
        p.relative_to(in_dir)
        for p in in_dir.rglob("*")
        if p.is_file() and p.suffix.lower() in ds.IMAGE_EXTS
    )
    if not rels:
        raise InputError(f"no images under {in_dir}")
    out_dir = Path(args.output)
    dump_dir = Path(args.dump_stages) if args.dump_stages else None

    def one(rel: Path) -> str:
        raster = load_raster(in_dir / rel)
        if dump_dir is not None:
            steps = run_pipeline_stages(raster, pipeline)
            stage_root = dump_dir / rel.stem
            for i, (name, stage_raster) in enumerate(steps):
                save_raster(stage_raster, stage_root / f"{i:02d}_{name}.png")
            result = steps[-1][1]
        else:
            result = run_pipeline(raster, pipeline)
        save_raster(result, (out_dir / rel).with_suffix(".png"))
        return rel.stem

    if args.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.workers) as pool:
            done = list(pool.map(one, rels))
    else:
        done = [one(rel) for rel in rels]
    _emit({"command": "preprocess", "processed": len(done), "output": str(out_dir)})
    return 0


# ---------------------------------------------------------------------------
# augment
# ---------------------------------------------------------------------------


def cmd_augment(args) -> int:
    root = Path(args.root)
    classes_file = root / "classes.txt"
    num_classes = len(ds.read_class_list(classes_file)) if classes_file.exists() else None
    index = ds.build_dataset_index(root, args.split, num_classes)
    spec = ds.AugmentSpec(
        rotation_deg=_parse_pair(args.rotation),
        shear_deg=_parse_pair(args.shear),
        saturation_delta=_parse_pair(args.saturation),
        exposure_delta=_parse_pair(args.exposure),
        noise_sigma=args.noise_sigma,
        occlusion_count=args.occlusions,
        occlusion_size=_parse_pair(args.occlusion_size),
        seed=args.seed,
    )
    out_root = Path(args.out)
    stems = ds.augment_index(
        index,
        spec,
        out_root / "images" / args.split,
        out_root / "labels" / args.split,
        variants=args.variants,
        keep_originals=not args.no_originals,
    )
    if classes_file.exists():
        out_root.mkdir(parents=True, exist_ok=True)
        shutil.copy2(classes_file, out_root / "classes.txt")
    _emit(
        {
            "command": "augment",
            "split": args.split,
            "written": len(stems),
            "variants": args.variants,
            "seed": args.seed,
        }
    )
    return 0


# ---------------------------------------------------------------------------
# split
# ---------------------------------------------------------------------------


def cmd_split(args) -> int:
    num_classes = len(ds.read_class_list(args.classes)) if args.classes else None
    index = ds.index_from_dirs(args.images, args.labels, num_classes)
    fractions = _parse_fractions(args.fractions)
    splits = ds.split_dataset(index, fractions, args.seed)
    out_root = Path(args.out)
    ds.materialize_split(splits, out_root)
    if args.classes:
        out_root.mkdir(parents=True, exist_ok=True)
        shutil.copy2(args.classes, out_root / "classes.txt")
    _emit(
        {
            "command": "split",
            "seed": args.seed,
            "counts": {name: len(idx) for name, idx in splits.items()},
            "output": str(out_root),
        }
    )
    return 0


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------


def cmd_predict(args) -> int:
    cp = _load_config(args)
    conf = cfgmod.resolve(
        args.conf, cp, "detection", "conf_threshold", PREDICT_CONFIDENCE, float
    )
    nms_iou = cfgmod.resolve(args.nms_iou, cp, "detection", "nms_iou", NMS_IOU, float)
    class_aware = cfgmod.resolve(
        False if args.class_agnostic else None,
        cp,
        "detection",
        "class_aware",
        True,
        cfgmod.parse_bool,
    )
    names = ds.read_class_list(args.classes)
    try:
        inventory = ClassInventory.from_names(names)
    except InputError:
        inventory = None
        print(
            "warning: class names are not glyphs; transliteration disabled",
            file=sys.stderr,
        )
    lexicon = load_lexicon(args.lexicon) if args.lexicon else None
    images = _expand_images(args.images)
    backend = _make_backend(args.backend)

    tmp: tempfile.TemporaryDirectory | None = None
    backend_inputs = [str(p) for p in images]
    if args.preprocess:
        pipeline = _pipeline_from_args(args, cp)
        tmp = tempfile.TemporaryDirectory(prefix="bayocr-pre-")
        processed = []
        for p in images:
            out_path = Path(tmp.name) / f"{p.stem}.png"
            save_raster(run_pipeline(load_raster(p), pipeline), out_path)
            processed.append(str(out_path))
        backend_inputs = processed

    try:
        sidecars = detect(
            backend_inputs,
            backend,
            conf_threshold=conf,
            nms_iou=nms_iou,
            class_aware=class_aware,
        )
    finally:
        if tmp is not None:
            tmp.cleanup()
        close = getattr(backend, "close", None)
        if close:
            close()

    out_dir = Path(args.out) if args.out else None
    render_dir = Path(args.render) if args.render else None
    for src, sc in zip(images, sidecars):
        doc: dict = {
            "image": Path(sc.image).stem if sc.image else src.stem,
            "width": sc.width,
            "height": sc.height,
        }
        matches = None
        if inventory is not None:
            lines = transliterate_lines(sc.detections, inventory)
            doc["lines"] = lines
            if lexicon is not None:
                matches = []
                for line in lines:
                    if not line:
                        continue
                    word, dist = disambiguate(line, lexicon)
                    matches.append({"line": line, "word": word, "distance": dist})
                doc["text"] = " ".join(m["word"] for m in matches)
            else:
                doc["text"] = " ".join(lines)
        doc["matches"] = matches
        doc["detections"] = [
            {
                "class_id": d.class_id,
                "name": names[d.class_id] if d.class_id < len(names) else str(d.class_id),
                "confidence": d.confidence,
                "bbox": [d.bbox.cx, d.bbox.cy, d.bbox.w, d.bbox.h],
            }
            for d in sc.detections
        ]
        _emit(doc)
        if out_dir is not None:
            write_sidecar(sc, out_dir / f"{doc['image']}.json")
        if render_dir is not None:
            overlay = draw_detections(load_raster(src), sc.detections, names)
            save_raster(overlay, render_dir / f"{doc['image']}.png")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def cmd_eval(args) -> int:
    names = ds.read_class_list(args.classes)
    pred_dir = Path(args.pred)
    gt_dir = Path(args.gt)
    if not pred_dir.is_dir():
        raise InputError(f"prediction directory does not exist: {pred_dir}")
    if not gt_dir.is_dir():
        raise InputError(f"ground-truth directory does not exist: {gt_dir}")
    preds = {p.stem: p for p in sorted(pred_dir.glob("*.json"))}
    gts = {p.stem: p for p in sorted(gt_dir.glob("*.txt"))}
    shared = sorted(preds.keys() & gts.keys())
    only_pred = sorted(preds.keys() - gts.keys())
    only_gt = sorted(gts.keys() - preds.keys())
    for stem in only_pred:
        print(f"warning: prediction {stem!r} has no ground truth", file=sys.stderr)
    for stem in only_gt:
        print(f"warning: ground truth {stem!r} has no prediction", file=sys.stderr)
    if not shared:
        raise InputError("no stems shared between predictions and ground truth")
    samples = []
    for stem in shared:
        sc = load_sidecar(preds[stem])
        anns = ds.read_labels(gts[stem], num_classes=len(names))
        samples.append((list(sc.detections), anns))
    report = evaluate_detections(
        samples,
        num_classes=len(names),
        conf_threshold=args.conf,
        iou_threshold=args.iou,
        class_names=names,
    )
    print(json.dumps(report.to_json_dict()))
    print(report.format_table(), file=sys.stderr)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(report.to_json_dict(), indent=2) + "\n", encoding="utf-8"
        )
        (out / "report.txt").write_text(report.format_table(), encoding="utf-8")
        rows = [",".join(str(v) for v in row) for row in report.confusion.tolist()]
        (out / "confusion.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        if args.plot:
            plot_confusion(report, out / "confusion.png")
    elif args.plot:
        raise InputError("--plot needs --out to know where to write the image")
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def cmd_bench(args) -> int:
    cp = _load_config(args)
    images = _expand_images(args.images)
    backend = _make_backend(args.backend)
    pipeline = _pipeline_from_args(args, cp) if args.preprocess else None
    conf = cfgmod.resolve(
        args.conf, cp, "detection", "conf_threshold", EVAL_CONFIDENCE, float
    )
    nms_iou = cfgmod.resolve(args.nms_iou, cp, "detection", "nms_iou", NMS_IOU, float)
    report = benchmark(
        images,
        backend,
        warmup=args.warmup,
        repeats=args.repeats,
        pipeline=pipeline,
        conf_threshold=conf,
        nms_iou=nms_iou,
    )
    doc = report.to_json_dict()
    print(json.dumps(doc))
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# render
# ---------------------------------------------------------------------------


def cmd_render(args) -> int:
    names = ds.read_class_list(args.classes)
    images = _expand_images(args.images)
    out_dir = Path(args.out)
    rendered = 0
    for img_path in images:
        stem = img_path.stem
        if args.pred:
            sidecar_path = Path(args.pred) / f"{stem}.json"
            if not sidecar_path.exists():
                print(f"warning: no prediction for {stem!r}", file=sys.stderr)
                continue
            sc = load_sidecar(sidecar_path)
            dets = [d for d in sc.detections if d.confidence >= args.conf]
            overlay = draw_detections(load_raster(img_path), dets, names)
        else:
            label_path = Path(args.labels) / f"{stem}.txt"
            if not label_path.exists():
                print(f"warning: no labels for {stem!r}", file=sys.stderr)
                continue
            anns = ds.read_labels(label_path, num_classes=len(names))
            overlay = draw_annotations(load_raster(img_path), anns, names)
        save_raster(overlay, out_dir / f"{stem}.png")
        rendered += 1
    if rendered == 0:
        raise InputError("nothing to render: no image had a matching source")
    _emit({"command": "render", "rendered": rendered, "output": str(out_dir)})
    return 0


# ---------------------------------------------------------------------------
# export-train
# ---------------------------------------------------------------------------


def cmd_export_train(args) -> int:
    root = Path(args.root)
    names = ds.read_class_list(root / "classes.txt")
    index = ds.build_dataset_index(root, args.split, num_classes=len(names))
    weights = ds.compute_class_weights(index, len(names))
    out = Path(args.out)
    weights_path = out / "class_weights.json"
    ds.write_class_weights(weights_path, weights, names)
    train_cfg = cfgmod.TrainConfig(
        dataset=str(root.resolve()),
        class_weights=str(weights_path.resolve()),
        image_size=args.image_size,
        batch=args.batch,
        lr0=args.lr0,
        momentum=args.momentum,
        max_epochs=args.max_epochs,
        patience=args.patience,
        model_size=args.model_size,
        seed=args.seed,
    )
    ini_path = out / "train.ini"
    cfgmod.write_train_config(train_cfg, ini_path)
    _emit(
        {
            "command": "export-train",
            "train_ini": str(ini_path),
            "class_weights": str(weights_path),
            "num_classes": len(names),
            "items": len(index),
            "split": args.split,
        }
    )
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bayocr",
        description="Handwritten syllabary detection toolkit",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("preprocess", help="run the pixel pipeline over a directory")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--config")
    p.add_argument("--dump-stages", help="also write per-stage intermediates here")
    p.add_argument("--workers", type=int, default=1)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = subs.add_parser("augment", help="grow a split with randomized variants")
    p.add_argument("--root", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--out", required=True)
    p.add_argument("--variants", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rotation", default="0,0", help="degrees, 'lo,hi'")
    p.add_argument("--shear", default="0,0", help="degrees, 'lo,hi'")
    p.add_argument("--saturation", default="0,0", help="fractional delta, 'lo,hi'")
    p.add_argument("--exposure", default="0,0", help="fractional delta, 'lo,hi'")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--occlusions", type=int, default=0)
    p.add_argument("--occlusion-size", default="0.05,0.15")
    p.add_argument("--no-originals", action="store_true")
    p.set_defaults(func=cmd_augment)

    p = subs.add_parser("split", help="partition a flat dataset into train/val/test")
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fractions", default="24/26,1/26,1/26")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes")
    p.set_defaults(func=cmd_split)

    p = subs.add_parser("predict", help="detect and transliterate images")
    p.add_argument("images", nargs="+")
    p.add_argument("--backend", required=True, help="'replay:DIR' or 'process:COMMAND'")
    p.add_argument("--classes", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--config")
    p.add_argument("--conf", type=float, default=None)
    p.add_argument("--nms-iou", type=float, default=None)
    p.add_argument("--class-agnostic", action="store_true")
    p.add_argument("--out", help="write post-processed sidecars here")
    p.add_argument("--render", help="write overlay images here")
    p.add_argument("--preprocess", action="store_true")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_predict)

    p = subs.add_parser("eval", help="score sidecar predictions against labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--conf", type=float, default=EVAL_CONFIDENCE)
    p.add_argument("--out")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("bench", help="time a backend over images")
    p.add_argument("--images", nargs="+", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--preprocess", action="store_true")
    p.add_argument("--config")
    p.add_argument("--conf", type=float, default=None)
    p.add_argument("--nms-iou", type=float, default=None)
    p.add_argument("--out")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_bench)

    p = subs.add_parser("render", help="draw boxes from predictions or labels")
    p.add_argument("--images", nargs="+", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pred")
    group.add_argument("--labels")
    p.add_argument("--classes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--conf", type=float, default=PREDICT_CONFIDENCE)
    p.set_defaults(func=cmd_render)

    p = subs.add_parser("export-train", help="write train.ini and class weights")
    p.add_argument("--root", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--model-size", choices=("n", "s", "m"), default="n")
    p.add_argument("--image-size", type=int, default=640)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr0", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.937)
    p.add_argument("--max-epochs", type=int, default=600)
    p.add_argument("--patience", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_export_train)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except BayocrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
