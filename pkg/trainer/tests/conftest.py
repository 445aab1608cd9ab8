"""Shared fixtures: tiny dataset layouts and a reusable smoke training run."""

from __future__ import annotations

import json
from pathlib import Path

import cv2
import numpy as np
import pytest

from bayocr_trainer import TrainSettings, train

SMOKE_CLASSES = 3
SMOKE_IMAGE_SIZE = 64


def make_layout(
    root: Path,
    counts: dict[str, int] | None = None,
    num_classes: int = SMOKE_CLASSES,
    size: tuple[int, int] = (64, 48),
    boxes_per: int = 2,
    seed: int = 5,
) -> Path:
    """Write a small dataset layout: light pages with filled dark rectangles."""
    counts = counts if counts is not None else {"train": 8, "val": 2}
    rng = np.random.default_rng(seed)
    w_px, h_px = size
    for split, count in counts.items():
        (root / "images" / split).mkdir(parents=True, exist_ok=True)
        (root / "labels" / split).mkdir(parents=True, exist_ok=True)
        for i in range(count):
            img = np.full((h_px, w_px, 3), 235, np.uint8)
            lines = []
            for _ in range(boxes_per):
                cx, cy = rng.uniform(0.25, 0.75, 2)
                bw, bh = rng.uniform(0.15, 0.3, 2)
                cid = int(rng.integers(0, num_classes))
                x1, y1 = int((cx - bw / 2) * w_px), int((cy - bh / 2) * h_px)
                x2, y2 = int((cx + bw / 2) * w_px), int((cy + bh / 2) * h_px)
                cv2.rectangle(img, (x1, y1), (x2, y2), (40 + 50 * cid,) * 3, -1)
                lines.append(f"{cid} {cx} {cy} {bw} {bh}")
            cv2.imwrite(str(root / "images" / split / f"p{i}.png"), img)
            (root / "labels" / split / f"p{i}.txt").write_text("\n".join(lines) + "\n")
    (root / "classes.txt").write_text("".join(f"{i} c{i}\n" for i in range(num_classes)))
    return root


def write_handoff(
    layout: Path, out: Path, weights: list[float] | None = None, **overrides
) -> Path:
    """Write a train.ini plus class weights the way the export step lays them out."""
    out.mkdir(parents=True, exist_ok=True)
    num_classes = len((layout / "classes.txt").read_text().splitlines())
    weights = weights if weights is not None else [1.0] * num_classes
    weights_path = out / "class_weights.json"
    weights_path.write_text(json.dumps({f"c{i}": w for i, w in enumerate(weights)}) + "\n")
    values: dict[str, object] = {
        "dataset": str(layout.resolve()),
        "class_weights": str(weights_path.resolve()),
        "image_size": SMOKE_IMAGE_SIZE,
        "batch": 4,
        "optimizer": "sgd",
        "lr0": 0.01,
        "momentum": 0.937,
        "max_epochs": 2,
        "patience": 2,
        "loss": "bce_logits",
        "model_size": "n",
        "seed": 0,
    }
    values.update(overrides)
    ini = out / "train.ini"
    body = "".join(f"{k} = {v}\n" for k, v in values.items())
    ini.write_text(f"[train]\n{body}")
    return ini


def smoke_settings(layout: Path, handoff: Path, **overrides) -> TrainSettings:
    defaults: dict[str, object] = {
        "dataset": str(layout.resolve()),
        "class_weights": str((handoff / "class_weights.json").resolve()),
        "image_size": SMOKE_IMAGE_SIZE,
        "batch": 4,
        "max_epochs": 2,
        "patience": 2,
    }
    defaults.update(overrides)
    return TrainSettings(**defaults)  # type: ignore[arg-type]


@pytest.fixture(scope="session")
def smoke_layout(tmp_path_factory) -> Path:
    return make_layout(tmp_path_factory.mktemp("layout"))


@pytest.fixture(scope="session")
def smoke_run(smoke_layout, tmp_path_factory):
    """One 10-image, 2-epoch training run shared by every test that needs it."""
    handoff = tmp_path_factory.mktemp("handoff")
    write_handoff(smoke_layout, handoff)
    out = tmp_path_factory.mktemp("run")
    messages: list[str] = []
    run = train(smoke_settings(smoke_layout, handoff), out, device="cpu", log=messages.append)
    return run, messages


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
