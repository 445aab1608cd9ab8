"""Detection post-processing: IoU, confidence filtering, NMS, reading order."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .dataset import BBox
from .errors import InputError

# Threshold used when scoring a model's raw output.
EVAL_CONFIDENCE = 0.25
# Threshold used when showing results to a person.
PREDICT_CONFIDENCE = 0.6

NMS_IOU = 0.45


@dataclass(frozen=True)
class Detection:
    """A predicted object: box, class index, and confidence in [0, 1]."""

    bbox: BBox
    class_id: int
    confidence: float

    def __post_init__(self) -> None:
        if not isinstance(self.class_id, int) or isinstance(self.class_id, bool):
            raise InputError(f"class_id must be an int, got {self.class_id!r}")
        if self.class_id < 0:
            raise InputError(f"class_id must be >= 0, got {self.class_id}")
        c = self.confidence
        if not isinstance(c, (int, float)) or not math.isfinite(c) or not 0 <= c <= 1:
            raise InputError(f"confidence must be in [0, 1], got {c!r}")
        object.__setattr__(self, "confidence", float(c))


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; disjoint boxes give 0."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def filter_confidence(
    detections: Sequence[Detection], threshold: float
) -> list[Detection]:
    """Keep detections with confidence >= threshold, preserving input order."""
    if not 0 <= threshold <= 1:
        raise InputError(f"confidence threshold must be in [0, 1], got {threshold}")
    return [d for d in detections if d.confidence >= threshold]


def nms(
    detections: Sequence[Detection],
    iou_threshold: float = NMS_IOU,
    class_aware: bool = True,
) -> list[Detection]:
    """Greedy non-maximum suppression.

    Candidates are visited by descending confidence (ties: lower class id,
    then earlier input position). Each kept detection suppresses remaining
    candidates whose IoU with it exceeds ``iou_threshold``; with
    ``class_aware`` only same-class candidates are suppressed. The kept
    detections are returned in visit order.
    """
    if not 0 <= iou_threshold <= 1:
        raise InputError(f"iou threshold must be in [0, 1], got {iou_threshold}")
    order = sorted(
        range(len(detections)),
        key=lambda i: (-detections[i].confidence, detections[i].class_id, i),
    )
    kept: list[Detection] = []
    suppressed = [False] * len(detections)
    for i in order:
        if suppressed[i]:
            continue
        d = detections[i]
        kept.append(d)
        for j in order:
            if suppressed[j] or j == i:
                continue
            other = detections[j]
            if class_aware and other.class_id != d.class_id:
                continue
            if iou(d.bbox, other.bbox) > iou_threshold:
                suppressed[j] = True
        suppressed[i] = True
    return kept


@dataclass(frozen=True)
class ReadingOrder:
    """Detections grouped into text lines, top to bottom then left to right.

    ``lines`` holds indexes into the detection sequence the order was built
    from.
    """

    lines: tuple[tuple[int, ...], ...]

    def flat(self) -> list[int]:
        return [i for line in self.lines for i in line]


def assemble_reading_order(detections: Sequence[Detection]) -> ReadingOrder:
    """Group detections into lines and order them for reading.

    Two boxes belong to the same line when their vertical overlap is at least
    half the shorter box's height; line membership is transitive. Lines are
    ordered by mean center-y, members within a line by center-x.
    """
    n = len(detections)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri

    for i in range(n):
        bi = detections[i].bbox
        for j in range(i + 1, n):
            bj = detections[j].bbox
            overlap = min(bi.y2, bj.y2) - max(bi.y1, bj.y1)
            if overlap >= 0.5 * min(bi.h, bj.h):
                union(i, j)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    lines = sorted(groups.values(), key=lambda g: sum(detections[i].bbox.cy for i in g) / len(g))
    ordered = tuple(
        tuple(sorted(g, key=lambda i: (detections[i].bbox.cx, i))) for g in lines
    )
    return ReadingOrder(ordered)
