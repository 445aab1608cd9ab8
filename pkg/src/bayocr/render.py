"""Draw boxes and class labels onto rasters for visual inspection."""

from __future__ import annotations

import colorsys
from typing import Sequence

import cv2
import numpy as np

from .dataset import Annotation, BBox
from .detection import Detection
from .imgproc import Raster


def class_color(class_id: int) -> tuple[int, int, int]:
    """Stable RGB color for a class id.

    Hues step around the color wheel by the golden ratio so nearby ids stay
    visually distinct; the mapping is a pure function of the id, never of
    interpreter state.
    """
    hue = (class_id * 0.61803398875) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.75, 0.95)
    return (int(round(r * 255)), int(round(g * 255)), int(round(b * 255)))


def _draw_box(
    canvas: np.ndarray, bbox: BBox, color: tuple[int, int, int], text: str
) -> None:
    h, w = canvas.shape[0], canvas.shape[1]
    x1 = int(round(bbox.x1 * w))
    y1 = int(round(bbox.y1 * h))
    x2 = int(round(bbox.x2 * w))
    y2 = int(round(bbox.y2 * h))
    x1, x2 = max(0, x1), min(w - 1, x2)
    y1, y2 = max(0, y1), min(h - 1, y2)
    cv2.rectangle(canvas, (x1, y1), (x2, y2), color, 1)
    if text:
        ty = y1 - 4 if y1 >= 12 else min(h - 2, y2 + 12)
        cv2.putText(
            canvas, text, (x1, ty), cv2.FONT_HERSHEY_SIMPLEX, 0.35, color, 1, cv2.LINE_AA
        )


def draw_detections(
    img: Raster,
    detections: Sequence[Detection],
    class_names: Sequence[str] | None = None,
    show_confidence: bool = True,
) -> Raster:
    """Overlay detection boxes; returns a new RGB raster."""
    canvas = img.pixels.copy()
    if canvas.ndim == 2:
        canvas = np.stack([canvas] * 3, axis=-1)
    for det in detections:
        name = (
            class_names[det.class_id]
            if class_names is not None and det.class_id < len(class_names)
            else str(det.class_id)
        )
        text = f"{name} {det.confidence:.2f}" if show_confidence else name
        _draw_box(canvas, det.bbox, class_color(det.class_id), text)
    return Raster(canvas)


def draw_annotations(
    img: Raster,
    annotations: Sequence[Annotation],
    class_names: Sequence[str] | None = None,
) -> Raster:
    """Overlay ground-truth boxes; returns a new RGB raster."""
    canvas = img.pixels.copy()
    if canvas.ndim == 2:
        canvas = np.stack([canvas] * 3, axis=-1)
    for ann in annotations:
        name = (
            class_names[ann.class_id]
            if class_names is not None and ann.class_id < len(class_names)
            else str(ann.class_id)
        )
        _draw_box(canvas, ann.bbox, class_color(ann.class_id), name)
    return Raster(canvas)
