"""Prediction to sidecar JSON, in batch form and as a line-protocol server.

The output contract is the detector toolkit's sidecar schema:

    {"image": stem, "width": int, "height": int,
     "detections": [{"class_id": int, "confidence": float,
                     "bbox": [cx, cy, w, h]}]}

one JSON document per image, boxes normalized to the unit square of the
original image. ``serve`` speaks the external-process protocol: one image
path per stdin line, one sidecar document per stdout line, nonzero exit on
failure. A GroundTruthEcho predictor stands in for a model where the test
needs detections that reproduce the labels exactly.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path
from typing import Callable, IO, Protocol, Sequence

import numpy as np
import torch

from .data import box_to_image, decode_image, letterbox, read_labels
from .errors import DataError, ModelError
from .model import GridDetector, decode

Logger = Callable[[str], None]
BoxRow = tuple[int, float, float, float, float, float]


def _stderr(msg: str) -> None:
    print(msg, file=sys.stderr)


class Predictor(Protocol):
    def boxes_for(self, image: np.ndarray, stem: str) -> list[BoxRow]:
        """Detections for one decoded image, unit-square coordinates."""
        ...


def load_model(path: str | Path, device: torch.device) -> tuple[GridDetector, dict]:
    """Load a checkpoint written by the training loop."""
    p = Path(path)
    try:
        doc = torch.load(p, map_location=device, weights_only=True)
    except Exception as exc:
        # torch.load raises anything from OSError to IndexError on bad bytes.
        raise ModelError(f"cannot load model {p}: {exc}") from None
    for key in ("state_dict", "model_size", "image_size", "num_classes", "class_names"):
        if key not in doc:
            raise ModelError(f"{p}: checkpoint is missing {key!r}")
    model = GridDetector(doc["num_classes"], doc["model_size"])
    try:
        model.load_state_dict(doc["state_dict"])
    except RuntimeError as exc:
        raise ModelError(f"{p}: state dict does not fit: {exc}") from None
    model.to(device)
    model.eval()
    return model, doc


class TrainedPredictor:
    """Run a trained checkpoint over letterboxed images."""

    def __init__(
        self,
        model: GridDetector,
        meta: dict,
        device: torch.device,
        conf_threshold: float = 0.25,
    ) -> None:
        self.model = model
        self.image_size = int(meta["image_size"])
        self.device = device
        self.conf_threshold = conf_threshold

    def boxes_for(self, image: np.ndarray, stem: str) -> list[BoxRow]:
        canvas, new_w, new_h, pad_x, pad_y = letterbox(image, self.image_size)
        tensor = torch.from_numpy(canvas.transpose(2, 0, 1)).float() / 255.0
        with torch.no_grad():
            logits = self.model(tensor.unsqueeze(0).to(self.device))[0]
        out = []
        for cid, conf, cx, cy, w, h in decode(logits, self.conf_threshold):
            box = box_to_image((cx, cy, w, h), new_w, new_h, pad_x, pad_y, self.image_size)
            out.append((cid, conf, *box))
        return out


def load_predictor(
    model_path: str | Path, device: torch.device, conf_threshold: float = 0.25
) -> TrainedPredictor:
    model, meta = load_model(model_path, device)
    return TrainedPredictor(model, meta, device, conf_threshold)


class GroundTruthEcho:
    """Identity 'model': answer with the image's own label file.

    Useful as an oracle for the sidecar plumbing; its detections match the
    ground truth exactly, so downstream evaluation must score perfectly.
    """

    def __init__(self, labels_dir: str | Path, confidence: float = 0.95) -> None:
        self.labels_dir = Path(labels_dir)
        self.confidence = confidence

    def boxes_for(self, image: np.ndarray, stem: str) -> list[BoxRow]:
        label = self.labels_dir / f"{stem}.txt"
        if not label.exists():
            return []
        rows = read_labels(label)
        return [
            (int(row[0]), self.confidence, float(row[1]), float(row[2]), float(row[3]), float(row[4]))
            for row in rows
        ]


def clamp_box(
    cx: float, cy: float, w: float, h: float
) -> tuple[float, float, float, float] | None:
    """Intersect a box with the unit square; None when nothing remains.

    A box already inside comes back unchanged, so well-behaved predictions
    (and ground-truth echoes) keep their exact float values.
    """
    if not all(math.isfinite(v) for v in (cx, cy, w, h)) or w <= 0 or h <= 0:
        return None
    x1, x2 = cx - w / 2, cx + w / 2
    y1, y2 = cy - h / 2, cy + h / 2
    if x1 >= 0 and y1 >= 0 and x2 <= 1 and y2 <= 1:
        return (cx, cy, w, h)
    x1, x2 = max(0.0, x1), min(1.0, x2)
    y1, y2 = max(0.0, y1), min(1.0, y2)
    if x2 <= x1 or y2 <= y1:
        return None
    return ((x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1)


def sidecar_doc(stem: str, width: int, height: int, boxes: Sequence[BoxRow]) -> dict:
    """Assemble one schema-exact sidecar document from predictor output."""
    dets = []
    for cid, conf, cx, cy, w, h in boxes:
        clamped = clamp_box(cx, cy, w, h)
        if clamped is None:
            continue
        dets.append(
            {
                "class_id": int(cid),
                "confidence": min(max(float(conf), 0.0), 1.0),
                "bbox": [float(v) for v in clamped],
            }
        )
    return {"image": stem, "width": int(width), "height": int(height), "detections": dets}


def infer_to_sidecars(
    predictor: Predictor,
    images: Sequence[str | Path],
    out_dir: str | Path,
    log: Logger = _stderr,
) -> tuple[list[Path], list[str]]:
    """Write one sidecar JSON per decodable image; report failures per image.

    Returns (written paths, failure messages); a failed decode never aborts
    the rest of the batch.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    failures: list[str] = []
    for path in images:
        p = Path(path)
        try:
            img = decode_image(p)
        except DataError as exc:
            log(f"error: {exc}")
            failures.append(str(exc))
            continue
        h0, w0 = img.shape[:2]
        doc = sidecar_doc(p.stem, w0, h0, predictor.boxes_for(img, p.stem))
        target = out / f"{p.stem}.json"
        target.write_text(json.dumps(doc) + "\n", encoding="utf-8")
        written.append(target)
    return written, failures


def serve(
    predictor: Predictor,
    in_stream: IO[str] | None = None,
    out_stream: IO[str] | None = None,
) -> int:
    """Line protocol: image path in, sidecar document out, flush per line.

    Any failure stops the server with a nonzero status; the driving process
    treats the exit code plus stderr as the error report.
    """
    ins = in_stream if in_stream is not None else sys.stdin
    outs = out_stream if out_stream is not None else sys.stdout
    for line in ins:
        path = line.strip()
        if not path:
            continue
        p = Path(path)
        try:
            img = decode_image(p)
        except DataError as exc:
            _stderr(f"error: {exc}")
            return 1
        h0, w0 = img.shape[:2]
        doc = sidecar_doc(p.stem, w0, h0, predictor.boxes_for(img, p.stem))
        outs.write(json.dumps(doc) + "\n")
        outs.flush()
    return 0
