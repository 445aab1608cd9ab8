"""Shared helpers: synthetic pages, dataset scaffolding, fixture paths."""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Sequence

import cv2
import numpy as np
import pytest

from bayocr.dataset import Annotation, BBox, write_labels
from bayocr.imgproc import Raster, save_raster

FIXTURES = Path(__file__).parent / "fixtures"

STUB_DETECTOR = FIXTURES / "stub_detector.py"


def fixture_path(*parts: str) -> Path:
    return FIXTURES.joinpath(*parts)


def stub_command(sidecar_dir: Path, *extra: str) -> list[str]:
    return [sys.executable, str(STUB_DETECTOR), str(sidecar_dir), *extra]


def glyph_page(
    width: int,
    height: int,
    boxes: Sequence[tuple[float, float, float, float]],
    seed: int = 0,
    gray: bool = False,
) -> Raster:
    """A light page with a dark stroke ring inside each normalized box.

    Looks nothing like real handwriting but gives binarization and letterbox
    stages realistic light/dark structure, deterministically.
    """
    rng = np.random.default_rng(seed)
    page = np.full((height, width, 3), 245, dtype=np.int64)
    page += rng.integers(-6, 7, (height, width, 1))
    px = np.clip(page, 0, 255).astype(np.uint8)
    for cx, cy, w, h in boxes:
        x1 = int((cx - w / 2) * width)
        y1 = int((cy - h / 2) * height)
        x2 = int((cx + w / 2) * width)
        y2 = int((cy + h / 2) * height)
        cv2.rectangle(px, (x1 + 2, y1 + 2), (x2 - 2, y2 - 2), (40, 35, 30), 2)
        cv2.line(px, (x1 + 2, y2 - 2), (x2 - 2, y1 + 2), (60, 50, 45), 1)
    if gray:
        return Raster(cv2.cvtColor(px, cv2.COLOR_RGB2GRAY))
    return Raster(px)


def random_bbox(rng: np.random.Generator, min_size: float = 0.01) -> BBox:
    cx = float(rng.uniform(0.1, 0.9))
    cy = float(rng.uniform(0.1, 0.9))
    w = float(rng.uniform(min_size, 2 * min(cx, 1 - cx)))
    h = float(rng.uniform(min_size, 2 * min(cy, 1 - cy)))
    return BBox(cx, cy, w, h)


def make_dataset(
    root: Path,
    split: str,
    items: dict[str, list[Annotation]],
    size: tuple[int, int] = (64, 48),
    class_names: Sequence[str] | None = None,
    seed: int = 0,
) -> Path:
    """Write a dataset layout with synthetic pages for the given labels."""
    img_dir = root / "images" / split
    lab_dir = root / "labels" / split
    img_dir.mkdir(parents=True, exist_ok=True)
    lab_dir.mkdir(parents=True, exist_ok=True)
    for i, (stem, anns) in enumerate(sorted(items.items())):
        page = glyph_page(size[0], size[1], [a.bbox.as_tuple() for a in anns], seed=seed + i)
        save_raster(page, img_dir / f"{stem}.png")
        write_labels(lab_dir / f"{stem}.txt", anns)
    if class_names is not None:
        text = "\n".join(f"{i} {n}" for i, n in enumerate(class_names)) + "\n"
        (root / "classes.txt").write_text(text, encoding="utf-8")
    return root


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
