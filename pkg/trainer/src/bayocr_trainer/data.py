"""Dataset layout access and letterbox geometry.

The layout is the detector toolkit's directory convention:

    root/classes.txt                      "<id> <name>" per line, ids dense
    root/images/{train,val,test}/*.png
    root/labels/{train,val,test}/*.txt    "<class> <cx> <cy> <w> <h>", normalized

A missing label file is an image with no objects. All box coordinates are
centers plus sizes in the unit square of their own image; letterboxing maps
them into the square training canvas and back.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import cv2
import numpy as np
import torch
from torch.utils.data import Dataset

from .errors import DataError

IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp")
PAD_VALUE = 114
SPLITS = ("train", "val", "test")


def read_class_names(path: str | Path) -> list[str]:
    """Parse ``<id> <name>`` lines into a name list indexed by id."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read class list {p}: {exc}") from None
    entries: dict[int, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise DataError(f"{p}: line {lineno}: expected '<id> <name>'")
        try:
            cid = int(fields[0])
        except ValueError:
            raise DataError(f"{p}: line {lineno}: bad class id {fields[0]!r}") from None
        if cid in entries:
            raise DataError(f"{p}: line {lineno}: duplicate class id {cid}")
        entries[cid] = fields[1]
    n = len(entries)
    missing = sorted(set(range(n)) - set(entries))
    if missing:
        raise DataError(f"{p}: class ids must cover 0..{n - 1}; missing {missing}")
    return [entries[i] for i in range(n)]


def parse_labels(text: str, num_classes: int | None = None) -> np.ndarray:
    """Parse label text into an (n, 5) float array of (class, cx, cy, w, h)."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise DataError(f"line {lineno}: expected 5 fields, got {len(fields)}")
        try:
            cid = int(fields[0])
            cx, cy, w, h = (float(f) for f in fields[1:])
        except ValueError:
            raise DataError(f"line {lineno}: malformed label {line!r}") from None
        if cid < 0 or (num_classes is not None and cid >= num_classes):
            raise DataError(f"line {lineno}: class id {cid} out of range")
        if w <= 0 or h <= 0:
            raise DataError(f"line {lineno}: box size must be positive")
        rows.append((float(cid), cx, cy, w, h))
    if not rows:
        return np.zeros((0, 5), dtype=np.float64)
    return np.asarray(rows, dtype=np.float64)


def read_labels(path: str | Path, num_classes: int | None = None) -> np.ndarray:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read label file {p}: {exc}") from None
    try:
        return parse_labels(text, num_classes)
    except DataError as exc:
        raise DataError(f"{p}: {exc}") from None


@dataclass(frozen=True)
class LayoutItem:
    """One image path with its (n, 5) boxes, class id first."""

    image: Path
    boxes: np.ndarray


def scan_split(root: str | Path, split: str, num_classes: int | None = None) -> list[LayoutItem]:
    """List one split's items in sorted filename order."""
    if split not in SPLITS:
        raise DataError(f"split must be one of {SPLITS}, got {split!r}")
    img_dir = Path(root) / "images" / split
    lab_dir = Path(root) / "labels" / split
    if not img_dir.is_dir():
        raise DataError(f"image directory does not exist: {img_dir}")
    items = []
    for img in sorted(img_dir.iterdir()):
        if img.suffix.lower() not in IMAGE_EXTS or not img.is_file():
            continue
        label = lab_dir / f"{img.stem}.txt"
        boxes = read_labels(label, num_classes) if label.exists() else np.zeros((0, 5), np.float64)
        items.append(LayoutItem(img, boxes))
    return items


def decode_image(path: str | Path) -> np.ndarray:
    """Read an image as 3-channel BGR uint8; raise DataError on failure."""
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise DataError(f"cannot decode image: {path}")
    return img


def letterbox(img: np.ndarray, size: int) -> tuple[np.ndarray, int, int, int, int]:
    """Fit an image onto a size x size canvas, aspect preserved, pad 114.

    Returns (canvas, new_w, new_h, pad_x, pad_y); the resized content spans
    canvas[pad_y:pad_y+new_h, pad_x:pad_x+new_w].
    """
    h0, w0 = img.shape[:2]
    scale = size / max(w0, h0)
    new_w = max(1, round(w0 * scale))
    new_h = max(1, round(h0 * scale))
    resized = cv2.resize(img, (new_w, new_h), interpolation=cv2.INTER_LINEAR)
    canvas = np.full((size, size, 3), PAD_VALUE, dtype=np.uint8)
    pad_x = (size - new_w) // 2
    pad_y = (size - new_h) // 2
    canvas[pad_y : pad_y + new_h, pad_x : pad_x + new_w] = resized
    return canvas, new_w, new_h, pad_x, pad_y


def box_to_canvas(
    box: Sequence[float], new_w: int, new_h: int, pad_x: int, pad_y: int, size: int
) -> tuple[float, float, float, float]:
    """Map a unit-square box of the original image into canvas coordinates."""
    cx, cy, w, h = box
    return (
        (cx * new_w + pad_x) / size,
        (cy * new_h + pad_y) / size,
        w * new_w / size,
        h * new_h / size,
    )


def box_to_image(
    box: Sequence[float], new_w: int, new_h: int, pad_x: int, pad_y: int, size: int
) -> tuple[float, float, float, float]:
    """Inverse of box_to_canvas: canvas coordinates back to the original image."""
    cx, cy, w, h = box
    return (
        (cx * size - pad_x) / new_w,
        (cy * size - pad_y) / new_h,
        w * size / new_w,
        h * size / new_h,
    )


class PageDataset(Dataset):
    """Letterboxed pages as CHW float tensors plus (n, 5) target boxes.

    Targets are (class, cx, cy, w, h) in canvas coordinates so the model
    never sees original-image geometry.
    """

    def __init__(self, items: Sequence[LayoutItem], image_size: int) -> None:
        self.items = list(items)
        self.image_size = image_size

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, idx: int) -> tuple[torch.Tensor, torch.Tensor]:
        item = self.items[idx]
        img = decode_image(item.image)
        canvas, new_w, new_h, pad_x, pad_y = letterbox(img, self.image_size)
        tensor = torch.from_numpy(canvas.transpose(2, 0, 1)).float() / 255.0
        boxes = np.array(item.boxes, dtype=np.float64, copy=True)
        for row in boxes:
            row[1:] = box_to_canvas(row[1:], new_w, new_h, pad_x, pad_y, self.image_size)
        return tensor, torch.from_numpy(boxes.astype(np.float32))


def collate(batch: Sequence[tuple[torch.Tensor, torch.Tensor]]) -> tuple[torch.Tensor, list[torch.Tensor]]:
    """Stack images; keep per-image box tensors as a list (counts vary)."""
    images = torch.stack([b[0] for b in batch])
    return images, [b[1] for b in batch]
