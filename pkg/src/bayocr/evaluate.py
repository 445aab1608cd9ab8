"""Detection metrics: greedy matching, precision/recall/F1, AP, confusion.

A "sample" is one image's (detections, ground truths) pair; dataset-level
metrics take a sequence of samples. AP follows the 101-point interpolation
convention: precision is the best value achieved at any recall >= r for the
101 evenly spaced recall points, and classes with no ground truth are left
out of the mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Annotation
from .detection import EVAL_CONFIDENCE, Detection, iou
from .errors import InputError

Sample = tuple[Sequence[Detection], Sequence[Annotation]]

# IoU sweep for the averaged AP figure: 0.50 to 0.95 in steps of 0.05.
COCO_THRESHOLDS = (0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95)

CONFUSION_IOU = 0.45


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching one image's detections against its ground truths.

    ``pairs`` holds (detection_index, gt_index or None, iou) in the original
    detection order; ``gt_matched`` flags each ground truth.
    """

    pairs: tuple[tuple[int, int | None, float], ...]
    gt_matched: tuple[bool, ...]

    @property
    def tp(self) -> int:
        return sum(1 for _, gt, _ in self.pairs if gt is not None)

    @property
    def fp(self) -> int:
        return sum(1 for _, gt, _ in self.pairs if gt is None)

    @property
    def fn(self) -> int:
        return sum(1 for m in self.gt_matched if not m)


def match_detections(
    detections: Sequence[Detection],
    truths: Sequence[Annotation],
    iou_threshold: float = 0.5,
    class_aware: bool = True,
) -> MatchResult:
    """Greedily pair detections with ground truths.

    Detections are visited by descending confidence (ties: earlier input
    position). Each takes the unmatched ground truth with the highest IoU at
    or above the threshold (ties: lower ground-truth index); with
    ``class_aware`` only same-class truths are eligible.
    """
    if not 0 <= iou_threshold <= 1:
        raise InputError(f"iou threshold must be in [0, 1], got {iou_threshold}")
    order = sorted(range(len(detections)), key=lambda i: (-detections[i].confidence, i))
    taken = [False] * len(truths)
    assigned: dict[int, tuple[int | None, float]] = {}
    for i in order:
        det = detections[i]
        best_j, best_iou = None, 0.0
        for j, gt in enumerate(truths):
            if taken[j]:
                continue
            if class_aware and gt.class_id != det.class_id:
                continue
            value = iou(det.bbox, gt.bbox)
            if value >= iou_threshold and (best_j is None or value > best_iou):
                best_j, best_iou = j, value
        if best_j is not None:
            taken[best_j] = True
            assigned[i] = (best_j, best_iou)
        else:
            assigned[i] = (None, 0.0)
    pairs = tuple((i, assigned[i][0], assigned[i][1]) for i in range(len(detections)))
    return MatchResult(pairs, tuple(taken))


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision < 0 or recall < 0:
        raise InputError("precision and recall must be non-negative")
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def precision_recall_f1(matches: Sequence[MatchResult]) -> tuple[float, float, float]:
    """Pool TP/FP/FN over matches; zero denominators yield zero metrics."""
    tp = sum(m.tp for m in matches)
    fp = sum(m.fp for m in matches)
    fn = sum(m.fn for m in matches)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall, f1_score(precision, recall)


def _ranked_flags(
    samples: Sequence[Sample], class_id: int, iou_threshold: float
) -> tuple[list[bool], int]:
    """Global confidence-ranked TP flags for one class, plus its GT count.

    Ranking ties break by sample order then detection order. Matching within
    each image is greedy in that same global order.
    """
    ranked: list[tuple[float, int, int]] = []
    n_gt = 0
    gt_lists: list[list[int]] = []
    for s, (dets, gts) in enumerate(samples):
        gt_ids = [j for j, g in enumerate(gts) if g.class_id == class_id]
        gt_lists.append(gt_ids)
        n_gt += len(gt_ids)
        for d, det in enumerate(dets):
            if det.class_id == class_id:
                ranked.append((-det.confidence, s, d))
    ranked.sort()
    taken: list[set[int]] = [set() for _ in samples]
    flags: list[bool] = []
    for _, s, d in ranked:
        det = samples[s][0][d]
        gts = samples[s][1]
        best_j, best_iou = None, 0.0
        for j in gt_lists[s]:
            if j in taken[s]:
                continue
            value = iou(det.bbox, gts[j].bbox)
            if value >= iou_threshold and (best_j is None or value > best_iou):
                best_j, best_iou = j, value
        if best_j is not None:
            taken[s].add(best_j)
            flags.append(True)
        else:
            flags.append(False)
    return flags, n_gt


def _interpolated_ap(flags: Sequence[bool], n_gt: int) -> float:
    """101-point interpolated AP from ranked TP flags."""
    if n_gt == 0:
        raise InputError("AP is undefined for a class with no ground truth")
    if not flags:
        return 0.0
    tp_cum = 0
    recalls: list[float] = []
    precisions: list[float] = []
    for k, hit in enumerate(flags, start=1):
        tp_cum += int(hit)
        recalls.append(tp_cum / n_gt)
        precisions.append(tp_cum / k)
    # Best precision at or beyond each rank; recalls are non-decreasing.
    suffix_best = precisions.copy()
    for k in range(len(suffix_best) - 2, -1, -1):
        suffix_best[k] = max(suffix_best[k], suffix_best[k + 1])
    total = 0.0
    for i in range(101):
        r = i / 100
        k = int(np.searchsorted(np.asarray(recalls), r, side="left"))
        total += suffix_best[k] if k < len(recalls) else 0.0
    return total / 101


def average_precision(
    samples: Sequence[Sample],
    iou_threshold: float = 0.5,
) -> dict[int, float]:
    """Per-class 101-point AP at one IoU threshold.

    Only classes that appear in the ground truth are reported; detections for
    absent classes count against nothing and no AP is defined for them.
    """
    if not 0 <= iou_threshold <= 1:
        raise InputError(f"iou threshold must be in [0, 1], got {iou_threshold}")
    gt_classes = sorted({g.class_id for _, gts in samples for g in gts})
    out: dict[int, float] = {}
    for c in gt_classes:
        flags, n_gt = _ranked_flags(samples, c, iou_threshold)
        out[c] = _interpolated_ap(flags, n_gt)
    return out


def mean_ap(
    samples: Sequence[Sample],
    thresholds: Sequence[float] = (0.5,),
) -> float:
    """AP averaged over ground-truth classes, then over IoU thresholds."""
    if not thresholds:
        raise InputError("at least one IoU threshold is required")
    totals = []
    for t in thresholds:
        per_class = average_precision(samples, t)
        if not per_class:
            raise InputError("no ground truth in any sample; mAP is undefined")
        totals.append(sum(per_class.values()) / len(per_class))
    return sum(totals) / len(totals)


def confusion_matrix(
    samples: Sequence[Sample],
    num_classes: int,
    iou_threshold: float = CONFUSION_IOU,
    conf_threshold: float = EVAL_CONFIDENCE,
) -> np.ndarray:
    """(num_classes + 1)^2 table of GT class vs predicted class.

    Detections below ``conf_threshold`` are ignored. Matching is by box
    geometry only, so cross-class confusions land off the diagonal. The extra
    final row collects unmatched detections (background predicted as a class);
    the final column collects unmatched ground truths (class missed).
    """
    if num_classes < 1:
        raise InputError(f"num_classes must be >= 1, got {num_classes}")
    table = np.zeros((num_classes + 1, num_classes + 1), dtype=np.int64)
    background = num_classes
    for dets, gts in samples:
        kept = [d for d in dets if d.confidence >= conf_threshold]
        for d in kept:
            if d.class_id >= num_classes:
                raise InputError(f"detection class id {d.class_id} out of range")
        for g in gts:
            if g.class_id >= num_classes:
                raise InputError(f"ground-truth class id {g.class_id} out of range")
        result = match_detections(kept, gts, iou_threshold, class_aware=False)
        for i, j, _ in result.pairs:
            if j is None:
                table[background, kept[i].class_id] += 1
            else:
                table[gts[j].class_id, kept[i].class_id] += 1
        for j, matched in enumerate(result.gt_matched):
            if not matched:
                table[gts[j].class_id, background] += 1
    return table


@dataclass(frozen=True)
class EvalReport:
    """Dataset-level metrics at a fixed operating point plus ranked AP."""

    precision: float
    recall: float
    f1: float
    map50: float
    map50_95: float
    per_class_ap: dict[int, float]
    confusion: np.ndarray
    num_classes: int
    conf_threshold: float
    iou_threshold: float
    class_names: tuple[str, ...] | None = None

    def to_json_dict(self) -> dict:
        def name(cid: int) -> str:
            if self.class_names and cid < len(self.class_names):
                return self.class_names[cid]
            return str(cid)

        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "map50": self.map50,
            "map50_95": self.map50_95,
            "per_class_ap": {name(c): ap for c, ap in sorted(self.per_class_ap.items())},
            "confusion": self.confusion.tolist(),
            "settings": {
                "num_classes": self.num_classes,
                "conf_threshold": self.conf_threshold,
                "iou_threshold": self.iou_threshold,
            },
        }

    def format_table(self) -> str:
        rows = [
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
            ("mAP@50", self.map50),
            ("mAP@50-95", self.map50_95),
        ]
        lines = [f"{k:<12} {v:.4f}" for k, v in rows]
        if self.per_class_ap:
            lines.append("")
            lines.append("AP@50 by class:")
            for c, ap in sorted(self.per_class_ap.items()):
                label = self.class_names[c] if self.class_names else str(c)
                lines.append(f"  {label:<8} {ap:.4f}")
        return "\n".join(lines) + "\n"


def evaluate_detections(
    samples: Sequence[Sample],
    num_classes: int,
    conf_threshold: float = EVAL_CONFIDENCE,
    iou_threshold: float = 0.5,
    class_names: Sequence[str] | None = None,
) -> EvalReport:
    """Compute the full metric suite over a dataset.

    Point metrics (precision/recall/F1 and the confusion table) use
    detections at or above ``conf_threshold``; the ranked AP figures use every
    detection, as the precision/recall curve orders them by confidence itself.
    """
    kept_samples = [
        ([d for d in dets if d.confidence >= conf_threshold], gts)
        for dets, gts in samples
    ]
    matches = [
        match_detections(dets, gts, iou_threshold, class_aware=True)
        for dets, gts in kept_samples
    ]
    precision, recall, f1 = precision_recall_f1(matches)
    per_class = average_precision(samples, 0.5)
    map50 = sum(per_class.values()) / len(per_class) if per_class else 0.0
    map50_95 = mean_ap(samples, COCO_THRESHOLDS) if per_class else 0.0
    confusion = confusion_matrix(samples, num_classes, CONFUSION_IOU, conf_threshold)
    return EvalReport(
        precision=precision,
        recall=recall,
        f1=f1,
        map50=map50,
        map50_95=map50_95,
        per_class_ap=per_class,
        confusion=confusion,
        num_classes=num_classes,
        conf_threshold=conf_threshold,
        iou_threshold=iou_threshold,
        class_names=tuple(class_names) if class_names is not None else None,
    )


def plot_confusion(report: EvalReport, path: str | Path) -> None:
    """Render the confusion table as a heatmap image."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n = report.num_classes
    labels = list(report.class_names) if report.class_names else [str(i) for i in range(n)]
    labels = labels[:n] + ["background"]
    fig, ax = plt.subplots(figsize=(max(6, n * 0.35), max(5, n * 0.3)))
    im = ax.imshow(report.confusion, cmap="viridis")
    ax.set_xlabel("predicted")
    ax.set_ylabel("ground truth")
    if n <= 30:
        ax.set_xticks(range(n + 1), labels, rotation=90, fontsize=6)
        ax.set_yticks(range(n + 1), labels, fontsize=6)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
