"""Dataset tooling: normalized boxes, label files, splits, weights, augmentation.

Label files follow the one-line-per-object convention
``<class_id> <cx> <cy> <w> <h>`` with box coordinates normalized to the unit
square. Class lists are plain text, one ``<id> <name>`` per line. Splits live
under ``images/<split>/`` and ``labels/<split>/`` beneath a dataset root.
"""

from __future__ import annotations

import dataclasses
import json
import math
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import cv2
import numpy as np

from .errors import DatasetError, InputError, LabelParseError
from .imgproc import GRAY_WEIGHTS, PAD_VALUE, Raster, load_raster, save_raster

# Slack on unit-square edge checks; absorbs float round-off, nothing more.
EDGE_TOL = 1e-9

IMAGE_EXTS = (".png", ".jpg", ".jpeg")

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: center (cx, cy) and size (w, h), all in [0, 1].

    Sizes are strictly positive and both edges must stay inside the unit
    square to within EDGE_TOL.
    """

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("cx", "cy", "w", "h"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise InputError(f"bbox {name} must be a finite number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.w <= 0 or self.h <= 0:
            raise InputError(f"bbox size must be positive, got w={self.w}, h={self.h}")
        for lo, hi, axis in (
            (self.cx - self.w / 2, self.cx + self.w / 2, "x"),
            (self.cy - self.h / 2, self.cy + self.h / 2, "y"),
        ):
            if lo < -EDGE_TOL or hi > 1 + EDGE_TOL:
                raise InputError(
                    f"bbox {axis} extent [{lo}, {hi}] leaves the unit square"
                )

    @property
    def x1(self) -> float:
        return self.cx - self.w / 2

    @property
    def y1(self) -> float:
        return self.cy - self.h / 2

    @property
    def x2(self) -> float:
        return self.cx + self.w / 2

    @property
    def y2(self) -> float:
        return self.cy + self.h / 2

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h)


@dataclass(frozen=True)
class Annotation:
    """One labeled object: class index plus its box."""

    class_id: int
    bbox: BBox

    def __post_init__(self) -> None:
        if not isinstance(self.class_id, int) or isinstance(self.class_id, bool):
            raise InputError(f"class_id must be an int, got {self.class_id!r}")
        if self.class_id < 0:
            raise InputError(f"class_id must be >= 0, got {self.class_id}")


def parse_label_file(text: str, num_classes: int | None = None) -> list[Annotation]:
    """Parse label text into annotations; blank lines are skipped.

    Raises LabelParseError naming the 1-based line number for any malformed
    line: wrong field count, non-numeric values, out-of-range class ids, or
    boxes that violate the unit-square invariants.
    """
    out: list[Annotation] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise LabelParseError(
                f"line {lineno}: expected 5 fields, got {len(fields)}"
            )
        try:
            class_id = int(fields[0])
        except ValueError:
            raise LabelParseError(
                f"line {lineno}: class id {fields[0]!r} is not an integer"
            ) from None
        try:
            cx, cy, w, h = (float(f) for f in fields[1:])
        except ValueError:
            raise LabelParseError(
                f"line {lineno}: box fields must be numbers: {line!r}"
            ) from None
        if class_id < 0:
            raise LabelParseError(f"line {lineno}: class id {class_id} is negative")
        if num_classes is not None and class_id >= num_classes:
            raise LabelParseError(
                f"line {lineno}: class id {class_id} out of range (num_classes={num_classes})"
            )
        try:
            bbox = BBox(cx, cy, w, h)
        except InputError as exc:
            raise LabelParseError(f"line {lineno}: {exc}") from None
        out.append(Annotation(class_id, bbox))
    return out


def write_label_file(annotations: Sequence[Annotation]) -> str:
    """Serialize annotations with fixed 6-decimal coordinates.

    Values are quantized to the 1e-6 grid; sizes are then shrunk (on the same
    grid) just enough to keep box edges inside the unit square, so the output
    always re-parses. A box whose quantized size would vanish is rejected.
    """
    lines = []
    for i, ann in enumerate(annotations):
        b = ann.bbox
        qcx = round(b.cx * 1e6)
        qcy = round(b.cy * 1e6)
        qw = round(b.w * 1e6)
        qh = round(b.h * 1e6)
        qcx = min(max(qcx, 0), 10**6)
        qcy = min(max(qcy, 0), 10**6)
        qw = min(qw, 2 * min(qcx, 10**6 - qcx))
        qh = min(qh, 2 * min(qcy, 10**6 - qcy))
        if qw <= 0 or qh <= 0:
            raise InputError(
                f"annotation {i}: box too small to serialize at 6 decimals "
                f"(w={b.w}, h={b.h} at cx={b.cx}, cy={b.cy})"
            )
        vals = (qcx / 1e6, qcy / 1e6, qw / 1e6, qh / 1e6)
        lines.append(f"{ann.class_id} " + " ".join(f"{v:.6f}" for v in vals))
    return "\n".join(lines) + ("\n" if lines else "")


def read_labels(path: str | Path, num_classes: int | None = None) -> list[Annotation]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read label file {p}: {exc}") from None
    try:
        return parse_label_file(text, num_classes=num_classes)
    except LabelParseError as exc:
        raise LabelParseError(f"{p}: {exc}") from None


def write_labels(path: str | Path, annotations: Sequence[Annotation]) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(write_label_file(annotations), encoding="utf-8")


# ---------------------------------------------------------------------------
# Class lists
# ---------------------------------------------------------------------------


def parse_class_list(text: str) -> list[str]:
    """Parse ``<id> <name>`` lines into a name list indexed by id.

    Ids must cover 0..N-1 exactly once and names must be unique single tokens.
    """
    entries: dict[int, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise DatasetError(f"line {lineno}: expected '<id> <name>', got {line!r}")
        try:
            cid = int(fields[0])
        except ValueError:
            raise DatasetError(f"line {lineno}: id {fields[0]!r} is not an integer") from None
        if cid in entries:
            raise DatasetError(f"line {lineno}: duplicate class id {cid}")
        entries[cid] = fields[1]
    if not entries:
        raise DatasetError("class list is empty")
    n = len(entries)
    missing = sorted(set(range(n)) - set(entries))
    if missing:
        raise DatasetError(f"class ids must cover 0..{n - 1}; missing {missing}")
    names = [entries[i] for i in range(n)]
    if len(set(names)) != n:
        raise DatasetError("class names must be unique")
    return names


def write_class_list(names: Sequence[str]) -> str:
    return "\n".join(f"{i} {name}" for i, name in enumerate(names)) + "\n"


def read_class_list(path: str | Path) -> list[str]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read class list {p}: {exc}") from None
    try:
        return parse_class_list(text)
    except DatasetError as exc:
        raise DatasetError(f"{p}: {exc}") from None


# ---------------------------------------------------------------------------
# Index, splits, weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetItem:
    image: Path
    annotations: tuple[Annotation, ...]

    @property
    def stem(self) -> str:
        return self.image.stem


@dataclass(frozen=True)
class DatasetIndex:
    """Ordered (image, annotations) pairs for one split."""

    items: tuple[DatasetItem, ...]
    split: str = "all"

    def __len__(self) -> int:
        return len(self.items)

    def class_counts(self, num_classes: int) -> list[int]:
        counts = [0] * num_classes
        for item in self.items:
            for ann in item.annotations:
                if ann.class_id >= num_classes:
                    raise DatasetError(
                        f"{item.image}: class id {ann.class_id} out of range "
                        f"(num_classes={num_classes})"
                    )
                counts[ann.class_id] += 1
        return counts


def index_from_dirs(
    images_dir: str | Path,
    labels_dir: str | Path,
    num_classes: int | None = None,
    split: str = "all",
) -> DatasetIndex:
    """Pair image files with their label files by stem.

    Images are taken in sorted filename order; a missing label file means an
    image with no objects. Two images sharing a stem is an error since their
    labels would collide.
    """
    img_dir = Path(images_dir)
    lab_dir = Path(labels_dir)
    if not img_dir.is_dir():
        raise DatasetError(f"image directory does not exist: {img_dir}")
    files = sorted(
        p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_EXTS and p.is_file()
    )
    if not files:
        raise DatasetError(f"no images ({'/'.join(IMAGE_EXTS)}) in {img_dir}")
    seen: dict[str, Path] = {}
    items = []
    for img in files:
        if img.stem in seen:
            raise DatasetError(f"duplicate image stem {img.stem!r}: {seen[img.stem]} and {img}")
        seen[img.stem] = img
        label_path = lab_dir / f"{img.stem}.txt"
        anns = read_labels(label_path, num_classes) if label_path.exists() else []
        items.append(DatasetItem(img, tuple(anns)))
    return DatasetIndex(tuple(items), split)


def build_dataset_index(
    root: str | Path, split: str, num_classes: int | None = None
) -> DatasetIndex:
    """Index one split of a dataset rooted at ``root``."""
    if split not in SPLITS:
        raise DatasetError(f"split must be one of {SPLITS}, got {split!r}")
    r = Path(root)
    return index_from_dirs(r / "images" / split, r / "labels" / split, num_classes, split)


def split_dataset(
    index: DatasetIndex,
    fractions: tuple[float, float, float],
    seed: int,
) -> dict[str, DatasetIndex]:
    """Randomly partition an index into train/val/test.

    Membership is decided by a seeded permutation; the first floor(f_train*N)
    items go to train, the next floor(f_val*N) to val, and the remainder to
    test. Items within each split are re-sorted by filename.
    """
    fr = tuple(float(f) for f in fractions)
    if len(fr) != 3 or any(f < 0 for f in fr):
        raise DatasetError(f"fractions must be three non-negative numbers, got {fractions}")
    if abs(sum(fr) - 1.0) > 1e-6:
        raise DatasetError(f"fractions must sum to 1, got {sum(fr)}")
    n = len(index)
    nonzero = sum(1 for f in fr if f > 0)
    if n < nonzero:
        raise DatasetError(f"{n} items cannot fill {nonzero} non-empty splits")
    # The 1e-9 nudge guards against f*N landing a float ulp below an integer.
    n_train = math.floor(fr[0] * n + 1e-9)
    n_val = math.floor(fr[1] * n + 1e-9)
    if n_train + n_val > n:
        raise DatasetError("train and val fractions exhaust the dataset")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(n)
    picks = {
        "train": order[:n_train],
        "val": order[n_train : n_train + n_val],
        "test": order[n_train + n_val :],
    }
    out = {}
    for name, idxs in picks.items():
        chosen = sorted((index.items[i] for i in idxs), key=lambda it: it.image.name)
        out[name] = DatasetIndex(tuple(chosen), name)
    return out


def materialize_split(splits: dict[str, DatasetIndex], out_root: str | Path) -> None:
    """Copy images and write label files under images/<split>, labels/<split>."""
    root = Path(out_root)
    for name, idx in splits.items():
        img_dir = root / "images" / name
        lab_dir = root / "labels" / name
        img_dir.mkdir(parents=True, exist_ok=True)
        lab_dir.mkdir(parents=True, exist_ok=True)
        for item in idx.items:
            shutil.copy2(item.image, img_dir / item.image.name)
            write_labels(lab_dir / f"{item.stem}.txt", item.annotations)


def compute_class_weights(index: DatasetIndex, num_classes: int) -> list[float]:
    """Inverse-frequency weights: N_total / (present_classes * count_c).

    Classes absent from the index get weight 0. Weighted by these, the per
    class contributions of the present classes are equal on average.
    """
    if num_classes < 1:
        raise DatasetError(f"num_classes must be >= 1, got {num_classes}")
    counts = index.class_counts(num_classes)
    total = sum(counts)
    if total == 0:
        raise DatasetError("index has no annotations; cannot derive class weights")
    present = sum(1 for c in counts if c > 0)
    return [total / (present * c) if c > 0 else 0.0 for c in counts]


def write_class_weights(
    path: str | Path, weights: Sequence[float], names: Sequence[str]
) -> None:
    """Store weights as a {class_name: weight} JSON object, id order preserved."""
    if len(weights) != len(names):
        raise DatasetError(
            f"{len(weights)} weights for {len(names)} class names"
        )
    doc = {name: weights[i] for i, name in enumerate(names)}
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def read_class_weights(path: str | Path, names: Sequence[str]) -> list[float]:
    p = Path(path)
    doc = json.loads(p.read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise DatasetError(f"{p}: class weights must be a JSON object")
    missing = [n for n in names if n not in doc]
    if missing:
        raise DatasetError(f"{p}: missing weights for classes {missing}")
    return [float(doc[n]) for n in names]


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AugmentSpec:
    """Parameter ranges for one augmentation draw.

    Ranges are inclusive (lo, hi) pairs sampled uniformly. Angles are in
    degrees; saturation and exposure deltas are fractional (e.g. 0.2 means up
    to +20%); noise_sigma is in 8-bit intensity levels; occlusion sizes are
    fractions of the image side. A spec with all-zero ranges, zero sigma, and
    zero occlusions is the identity.
    """

    rotation_deg: tuple[float, float] = (0.0, 0.0)
    shear_deg: tuple[float, float] = (0.0, 0.0)
    saturation_delta: tuple[float, float] = (0.0, 0.0)
    exposure_delta: tuple[float, float] = (0.0, 0.0)
    noise_sigma: float = 0.0
    occlusion_count: int = 0
    occlusion_size: tuple[float, float] = (0.05, 0.15)
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("rotation_deg", "shear_deg", "saturation_delta", "exposure_delta", "occlusion_size"):
            pair = tuple(float(v) for v in getattr(self, name))
            if len(pair) != 2 or not all(math.isfinite(v) for v in pair) or pair[0] > pair[1]:
                raise InputError(f"{name} must be a (lo, hi) pair with lo <= hi, got {pair}")
            object.__setattr__(self, name, pair)
        if max(abs(v) for v in self.shear_deg) >= 90:
            raise InputError(f"shear_deg must stay within (-90, 90), got {self.shear_deg}")
        if min(self.saturation_delta) < -1 or min(self.exposure_delta) < -1:
            raise InputError("saturation/exposure deltas must be >= -1")
        if not (0 < self.occlusion_size[0] and self.occlusion_size[1] < 1):
            raise InputError(f"occlusion_size must lie inside (0, 1), got {self.occlusion_size}")
        if not math.isfinite(self.noise_sigma) or self.noise_sigma < 0:
            raise InputError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.occlusion_count < 0:
            raise InputError(f"occlusion_count must be >= 0, got {self.occlusion_count}")
        if not (0 <= int(self.seed) < 2**64):
            raise InputError(f"seed must fit in 64 bits, got {self.seed}")


def _exact_cos_deg(angle: float) -> float | None:
    r = angle % 360.0
    return {0.0: 1.0, 90.0: 0.0, 180.0: -1.0, 270.0: 0.0}.get(r)


def _rotation_shear_matrix(angle_deg: float, shear_deg: float) -> np.ndarray:
    """2x2 linear part of shear(rotate(.)) about the unit-square center.

    Rotation is counter-clockwise as displayed (y axis points down); shear
    slants verticals by the given angle. Right angles use exact 0/1/-1 entries.
    """
    c = _exact_cos_deg(angle_deg)
    s = _exact_cos_deg(angle_deg - 90.0)
    if c is None or s is None:
        rad = math.radians(angle_deg)
        c, s = math.cos(rad), math.sin(rad)
    rot = np.array([[c, s], [-s, c]], dtype=np.float64)
    sh = np.array([[1.0, math.tan(math.radians(shear_deg))], [0.0, 1.0]], dtype=np.float64)
    return sh @ rot


def _transform_box(bbox: BBox, angle: float, shear: float) -> tuple[float, float, float, float]:
    """Corner-hull transform of a box in normalized coordinates.

    Exact quarter turns take a closed-form path so 90-degree rotations swap w
    and h without any float drift.
    """
    if shear == 0.0 and angle % 90.0 == 0.0:
        q = int(angle % 360.0) // 90
        cx, cy, w, h = bbox.cx, bbox.cy, bbox.w, bbox.h
        if q == 0:
            return (cx, cy, w, h)
        if q == 1:
            return (cy, 1.0 - cx, h, w)
        if q == 2:
            return (1.0 - cx, 1.0 - cy, w, h)
        return (1.0 - cy, cx, h, w)
    lin = _rotation_shear_matrix(angle, shear)
    corners = np.array(
        [
            [bbox.x1, bbox.y1],
            [bbox.x2, bbox.y1],
            [bbox.x1, bbox.y2],
            [bbox.x2, bbox.y2],
        ]
    )
    moved = (corners - 0.5) @ lin.T + 0.5
    x1, y1 = moved.min(axis=0)
    x2, y2 = moved.max(axis=0)
    return ((x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1)


def _warp_raster(img: Raster, angle: float, shear: float) -> Raster:
    lin = _rotation_shear_matrix(angle, shear)
    w, h = img.width, img.height
    # Conjugate the normalized-space transform into pixel coordinates
    # (pixel-center convention: x_px = x * W - 0.5).
    scale = np.array([[w, 0.0], [0.0, h]])
    inv_scale = np.array([[1.0 / w, 0.0], [0.0, 1.0 / h]])
    m_lin = scale @ lin @ inv_scale
    center_px = np.array([0.5, 0.5])
    t_norm = np.array([0.5, 0.5]) - lin @ np.array([0.5, 0.5])
    t_px = m_lin @ center_px + scale @ t_norm - center_px
    m = np.concatenate([m_lin, t_px[:, None]], axis=1)
    warped = cv2.warpAffine(
        img.pixels,
        m,
        (w, h),
        flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=(PAD_VALUE, PAD_VALUE, PAD_VALUE),
    )
    return Raster(warped)


def augment(
    img: Raster, annotations: Sequence[Annotation], spec: AugmentSpec
) -> tuple[Raster, list[Annotation]]:
    """Apply one randomized augmentation draw to a raster and its boxes.

    Geometry (rotation, then shear, both about the image center in normalized
    coordinates) moves pixels and boxes consistently: each box becomes the
    axis-aligned hull of its transformed corners, clamped to the unit square.
    Boxes whose visible area drops below 1% of their original area are
    dropped. Saturation, exposure, noise, and occlusion rectangles then touch
    only pixels. The draw order is fixed, so equal (spec, raster) inputs give
    bit-equal outputs.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    angle = float(rng.uniform(*spec.rotation_deg))
    shear = float(rng.uniform(*spec.shear_deg))
    sat = float(rng.uniform(*spec.saturation_delta))
    expo = float(rng.uniform(*spec.exposure_delta))

    boxes: list[Annotation] = list(annotations)
    out = img
    if angle != 0.0 or shear != 0.0:
        out = _warp_raster(out, angle, shear)
        kept = []
        for ann in boxes:
            cx, cy, w, h = _transform_box(ann.bbox, angle, shear)
            x1, y1 = cx - w / 2, cy - h / 2
            x2, y2 = cx + w / 2, cy + h / 2
            k1, l1 = max(x1, 0.0), max(y1, 0.0)
            k2, l2 = min(x2, 1.0), min(y2, 1.0)
            if (k1, l1, k2, l2) == (x1, y1, x2, y2):
                # Nothing clipped: keep the transformed size bit for bit
                # (exact quarter turns must swap w and h without drift).
                kept.append(Annotation(ann.class_id, BBox(cx, cy, w, h)))
                continue
            vw, vh = k2 - k1, l2 - l1
            if vw <= 0 or vh <= 0 or vw * vh < 0.01 * ann.bbox.area:
                continue
            kept.append(
                Annotation(ann.class_id, BBox((k1 + k2) / 2, (l1 + l2) / 2, vw, vh))
            )
        boxes = kept

    px: np.ndarray | None = None  # float accumulator, allocated on first edit

    def acc() -> np.ndarray:
        nonlocal px
        if px is None:
            px = out.pixels.astype(np.float64)
        return px

    if sat != 0.0 and out.channels == 3:
        a = acc()
        gray = a @ np.asarray(GRAY_WEIGHTS)
        px = gray[..., None] + (1.0 + sat) * (a - gray[..., None])
    if expo != 0.0:
        px = acc() * (1.0 + expo)
    if spec.noise_sigma > 0.0:
        px = acc() + rng.standard_normal(out.pixels.shape) * spec.noise_sigma

    if px is not None:
        out = Raster(np.clip(np.rint(px), 0, 255).astype(np.uint8))

    if spec.occlusion_count > 0:
        canvas = out.pixels.copy()
        hpx, wpx = canvas.shape[0], canvas.shape[1]
        for _ in range(spec.occlusion_count):
            wf = float(rng.uniform(*spec.occlusion_size))
            hf = float(rng.uniform(*spec.occlusion_size))
            x0 = float(rng.uniform(0.0, 1.0 - wf))
            y0 = float(rng.uniform(0.0, 1.0 - hf))
            value = int(rng.integers(0, 256))
            c0 = int(round(x0 * wpx))
            r0 = int(round(y0 * hpx))
            c1 = min(wpx, c0 + max(1, int(round(wf * wpx))))
            r1 = min(hpx, r0 + max(1, int(round(hf * hpx))))
            canvas[r0:r1, c0:c1] = value
        out = Raster(canvas)

    return out, boxes


def variant_seed(base_seed: int, item_index: int, variant: int) -> int:
    """Derive a per-(item, variant) seed from the dataset-level seed."""
    ss = np.random.SeedSequence((base_seed, item_index, variant))
    return int(ss.generate_state(1, np.uint64)[0])


def augment_index(
    index: DatasetIndex,
    spec: AugmentSpec,
    out_images: str | Path,
    out_labels: str | Path,
    variants: int = 2,
    keep_originals: bool = True,
) -> list[str]:
    """Write augmented copies of every indexed item; returns written stems.

    Each variant k of item i draws from its own seed derived from
    (spec.seed, i, k), so regenerating with the same arguments is
    reproducible and items do not share random streams.
    """
    if variants < 0:
        raise DatasetError(f"variants must be >= 0, got {variants}")
    img_dir = Path(out_images)
    lab_dir = Path(out_labels)
    img_dir.mkdir(parents=True, exist_ok=True)
    lab_dir.mkdir(parents=True, exist_ok=True)
    stems: list[str] = []
    for i, item in enumerate(index.items):
        raster = load_raster(item.image)
        if keep_originals:
            save_raster(raster, img_dir / f"{item.stem}.png")
            write_labels(lab_dir / f"{item.stem}.txt", item.annotations)
            stems.append(item.stem)
        for k in range(variants):
            drawn = dataclasses.replace(spec, seed=variant_seed(spec.seed, i, k))
            aug_img, aug_anns = augment(raster, item.annotations, drawn)
            stem = f"{item.stem}_aug{k}"
            save_raster(aug_img, img_dir / f"{stem}.png")
            write_labels(lab_dir / f"{stem}.txt", aug_anns)
            stems.append(stem)
    return stems
