"""Matching, F1, interpolated AP, and the confusion table."""

from __future__ import annotations

import numpy as np
import pytest

from bayocr.dataset import Annotation, BBox
from bayocr.detection import Detection
from bayocr.errors import InputError
from bayocr.evaluate import (
    COCO_THRESHOLDS,
    EvalReport,
    average_precision,
    confusion_matrix,
    evaluate_detections,
    f1_score,
    match_detections,
    mean_ap,
    precision_recall_f1,
)

# Published operating points this implementation must reproduce: each
# (precision, recall) pair and the F1 reported alongside it.
REPORTED_F1 = [
    (0.879, 0.802, 0.8387),
    (0.859, 0.809, 0.8333),
    (0.879, 0.802, 0.8387),
    (0.879, 0.802, 0.8387),
    (0.858, 0.839, 0.8484),
    (0.854, 0.857, 0.8555),
]


def det(cx, cy, w, h, conf=0.9, cid=0):
    return Detection(BBox(cx, cy, w, h), cid, conf)


def ann(cx, cy, w, h, cid=0):
    return Annotation(cid, BBox(cx, cy, w, h))


def cell_box(row: int, col: int, grid: int = 6) -> tuple[float, float, float, float]:
    """Disjoint unit-square cells so IoU between distinct cells is 0."""
    size = 0.6 / grid
    return ((col + 0.5) / grid, (row + 0.5) / grid, size, size)


class TestMatchDetections:
    def test_single_true_positive(self):
        m = match_detections([det(0.5, 0.5, 0.2, 0.2)], [ann(0.5, 0.5, 0.2, 0.2)])
        assert [(i, j) for i, j, _ in m.pairs] == [(0, 0)]
        assert m.pairs[0][2] == pytest.approx(1.0)
        assert m.gt_matched == (True,)
        assert (m.tp, m.fp, m.fn) == (1, 0, 0)

    def test_iou_below_threshold_is_fp_and_fn(self):
        m = match_detections([det(0.2, 0.2, 0.1, 0.1)], [ann(0.7, 0.7, 0.1, 0.1)])
        assert m.pairs == ((0, None, 0.0),)
        assert (m.tp, m.fp, m.fn) == (0, 1, 1)

    def test_threshold_is_inclusive(self):
        # IoU exactly 1/3 matches at threshold 1/3.
        d = det(0.25, 0.5, 0.5, 0.5)
        g = ann(0.5, 0.5, 0.5, 0.5)
        assert match_detections([d], [g], 1 / 3).tp == 1
        assert match_detections([d], [g], 0.34).tp == 0

    def test_higher_confidence_claims_the_truth_first(self):
        truth = ann(0.5, 0.5, 0.2, 0.2)
        weak = det(0.5, 0.5, 0.2, 0.2, conf=0.6)
        strong = det(0.52, 0.5, 0.2, 0.2, conf=0.9)
        m = match_detections([weak, strong], [truth])
        assert m.pairs[1][1] == 0  # strong took it
        assert m.pairs[0][1] is None
        assert (m.tp, m.fp, m.fn) == (1, 1, 0)

    def test_confidence_tie_prefers_earlier_detection(self):
        truth = ann(0.5, 0.5, 0.2, 0.2)
        a = det(0.5, 0.5, 0.2, 0.2, conf=0.8)
        b = det(0.5, 0.5, 0.2, 0.2, conf=0.8)
        m = match_detections([a, b], [truth])
        assert m.pairs[0][1] == 0 and m.pairs[1][1] is None

    def test_best_iou_wins_with_gt_index_tiebreak(self):
        g1 = ann(0.3, 0.5, 0.2, 0.2)
        g2 = ann(0.5, 0.5, 0.2, 0.2)
        d = det(0.48, 0.5, 0.2, 0.2)
        m = match_detections([d], [g1, g2], 0.1)
        assert m.pairs[0][1] == 1  # overlaps g2 far more
        twin = det(0.5, 0.5, 0.2, 0.2)
        m2 = match_detections([twin], [ann(0.5, 0.5, 0.2, 0.2), ann(0.5, 0.5, 0.2, 0.2)])
        assert m2.pairs[0][1] == 0  # identical IoU: lower GT index

    def test_class_aware_toggle(self):
        g = ann(0.5, 0.5, 0.2, 0.2, cid=1)
        d = det(0.5, 0.5, 0.2, 0.2, cid=2)
        assert match_detections([d], [g]).tp == 0
        assert match_detections([d], [g], class_aware=False).tp == 1

    def test_threshold_validation(self):
        with pytest.raises(InputError):
            match_detections([], [], iou_threshold=1.5)


class TestF1:
    def test_published_operating_points(self):
        for p, r, want in REPORTED_F1:
            assert f1_score(p, r) == pytest.approx(want, abs=5e-4)

    def test_degenerate(self):
        assert f1_score(0.0, 0.0) == 0.0
        assert f1_score(1.0, 1.0) == 1.0
        with pytest.raises(InputError):
            f1_score(-0.1, 0.5)

    def test_pooled_counts(self):
        # Image 1: 1 TP; image 2: 1 TP, 1 FP, 1 FN.
        m1 = match_detections([det(0.5, 0.5, 0.2, 0.2)], [ann(0.5, 0.5, 0.2, 0.2)])
        m2 = match_detections(
            [det(0.3, 0.3, 0.1, 0.1), det(0.8, 0.8, 0.1, 0.1)],
            [ann(0.3, 0.3, 0.1, 0.1), ann(0.6, 0.6, 0.1, 0.1)],
        )
        p, r, f1 = precision_recall_f1([m1, m2])
        assert p == pytest.approx(2 / 3)
        assert r == pytest.approx(2 / 3)
        assert f1 == pytest.approx(2 / 3)

    def test_empty_pool_is_zero(self):
        assert precision_recall_f1([]) == (0.0, 0.0, 0.0)


def direct_max_ap(flags: list[bool], n_gt: int) -> float:
    """Reference 101-point AP: direct max over the raw P/R curve."""
    prec, rec, tp = [], [], 0
    for k, hit in enumerate(flags, start=1):
        tp += int(hit)
        prec.append(tp / k)
        rec.append(tp / n_gt)
    total = 0.0
    for i in range(101):
        r = i / 100
        candidates = [p for p, q in zip(prec, rec) if q >= r]
        total += max(candidates) if candidates else 0.0
    return total / 101


def planted_samples(rng, n_images=3, n_classes=3, grid=6):
    """Samples whose TP/FP ranking is known by construction.

    Boxes live in disjoint grid cells, so every detection has IoU 1 with its
    own cell's ground truth and IoU 0 with everything else. Confidences are
    globally distinct. Returns (samples, expected flags per class, GT counts).
    """
    confs = iter(rng.permutation(np.linspace(0.05, 0.95, 200)).tolist())
    samples = []
    placed = []  # (sample, cell, class_id, conf, is_gt_cell)
    gt_count = dict.fromkeys(range(n_classes), 0)
    for s in range(n_images):
        cells = [(r, c) for r in range(grid) for c in range(grid)]
        rng.shuffle(cells)
        cells = iter(cells)
        gts, dets = [], []
        for cid in range(n_classes):
            for _ in range(int(rng.integers(1, 4))):  # GTs for this class
                cell = next(cells)
                gts.append(ann(*cell_box(*cell, grid), cid=cid))
                gt_count[cid] += 1
                for _ in range(int(rng.integers(0, 3))):  # dets on the GT
                    conf = float(next(confs))
                    dets.append(det(*cell_box(*cell, grid), conf=conf, cid=cid))
                    placed.append((s, cell, cid, conf, True))
            for _ in range(int(rng.integers(0, 2))):  # dets on empty cells
                cell = next(cells)
                conf = float(next(confs))
                dets.append(det(*cell_box(*cell, grid), conf=conf, cid=cid))
                placed.append((s, cell, cid, conf, False))
        samples.append((dets, gts))
    flags = {}
    for cid in range(n_classes):
        ranked = sorted(
            (p for p in placed if p[2] == cid), key=lambda p: -p[3]
        )
        claimed = set()
        out = []
        for s, cell, _, _, on_gt in ranked:
            if on_gt and (s, cell) not in claimed:
                claimed.add((s, cell))
                out.append(True)
            else:
                out.append(False)
        flags[cid] = out
    return samples, flags, gt_count


class TestAveragePrecision:
    def test_perfect_detections_score_one(self):
        gts = [ann(*cell_box(0, c), cid=c % 2) for c in range(4)]
        dets = [det(*cell_box(0, c), conf=0.9 - 0.1 * c, cid=c % 2) for c in range(4)]
        aps = average_precision([(dets, gts)])
        assert aps == {0: 1.0, 1: 1.0}
        assert mean_ap([(dets, gts)], COCO_THRESHOLDS) == 1.0

    def test_known_small_curve(self):
        # Flags T,F,T over 2 truths: P/R curve (1, .5), (.5, .5), (2/3, 1).
        gts = [ann(*cell_box(0, 0)), ann(*cell_box(0, 1))]
        dets = [
            det(*cell_box(0, 0), conf=0.9),
            det(*cell_box(3, 3), conf=0.8),
            det(*cell_box(0, 1), conf=0.7),
        ]
        ap = average_precision([(dets, gts)])[0]
        want = (51 * 1.0 + 50 * (2 / 3)) / 101
        assert ap == pytest.approx(want, abs=1e-12)
        assert ap == pytest.approx(direct_max_ap([True, False, True], 2), abs=1e-12)

    def test_matches_direct_max_oracle(self, rng):
        for _ in range(30):
            samples, flags, gt_count = planted_samples(rng)
            got = average_precision(samples, 0.5)
            assert set(got) == {c for c, n in gt_count.items() if n > 0}
            for cid, ap in got.items():
                want = direct_max_ap(flags[cid], gt_count[cid])
                assert ap == pytest.approx(want, abs=1e-9)

    def test_all_misses_is_zero(self):
        gts = [ann(*cell_box(0, 0))]
        dets = [det(*cell_box(3, 3), conf=0.9)]
        assert average_precision([(dets, gts)]) == {0: 0.0}

    def test_detected_only_classes_are_excluded(self):
        gts = [ann(*cell_box(0, 0), cid=0)]
        dets = [det(*cell_box(0, 0), conf=0.9, cid=0), det(*cell_box(1, 1), conf=0.8, cid=7)]
        assert set(average_precision([(dets, gts)])) == {0}

    def test_strict_thresholds_never_help(self, rng):
        for _ in range(10):
            samples, _, _ = planted_samples(rng, n_images=2)
            # Jitter detection boxes so IoU values land between 0 and 1.
            jittered = []
            for dets, gts in samples:
                moved = [
                    Detection(
                        BBox(
                            min(max(d.bbox.cx + rng.uniform(-0.02, 0.02), d.bbox.w / 2), 1 - d.bbox.w / 2),
                            min(max(d.bbox.cy + rng.uniform(-0.02, 0.02), d.bbox.h / 2), 1 - d.bbox.h / 2),
                            d.bbox.w,
                            d.bbox.h,
                        ),
                        d.class_id,
                        d.confidence,
                    )
                    for d in dets
                ]
                jittered.append((moved, gts))
            map50 = mean_ap(jittered, (0.5,))
            map5095 = mean_ap(jittered, COCO_THRESHOLDS)
            assert map5095 <= map50 + 1e-12

    def test_no_ground_truth_rejected(self):
        with pytest.raises(InputError):
            mean_ap([([det(0.5, 0.5, 0.1, 0.1)], [])])


class TestConfusionMatrix:
    def test_cross_class_confusion_lands_off_diagonal(self):
        # A d/r-style swap: the box matches but the class differs.
        gts = [ann(0.5, 0.5, 0.2, 0.2, cid=0)]
        dets = [det(0.5, 0.5, 0.2, 0.2, conf=0.9, cid=1)]
        table = confusion_matrix([(dets, gts)], num_classes=2)
        want = np.zeros((3, 3), dtype=np.int64)
        want[0, 1] = 1
        assert np.array_equal(table, want)

    def test_background_row_and_column(self):
        gts = [ann(*cell_box(0, 0), cid=0)]
        dets = [det(*cell_box(3, 3), conf=0.9, cid=1)]  # spurious
        table = confusion_matrix([(dets, gts)], num_classes=2)
        assert table[2, 1] == 1  # background predicted as class 1
        assert table[0, 2] == 1  # class 0 missed
        assert table.sum() == 2

    def test_low_confidence_is_ignored(self):
        gts = [ann(0.5, 0.5, 0.2, 0.2, cid=0)]
        dets = [det(0.5, 0.5, 0.2, 0.2, conf=0.1, cid=0)]
        table = confusion_matrix([(dets, gts)], num_classes=1, conf_threshold=0.25)
        assert table[0, 1] == 1 and table.sum() == 1

    def test_marginals_count_inputs(self, rng):
        samples, _, _ = planted_samples(rng, n_images=2, n_classes=3)
        table = confusion_matrix(samples, num_classes=3, conf_threshold=0.0)
        for c in range(3):
            n_dets = sum(1 for dets, _ in samples for d in dets if d.class_id == c)
            n_gts = sum(1 for _, gts in samples for g in gts if g.class_id == c)
            assert table[:, c].sum() == n_dets
            assert table[c, :].sum() == n_gts

    def test_out_of_range_ids_rejected(self):
        gts = [ann(0.5, 0.5, 0.2, 0.2, cid=5)]
        with pytest.raises(InputError):
            confusion_matrix([([], gts)], num_classes=2)


class TestEvaluateDetections:
    def perfect_sample(self):
        gts = [ann(*cell_box(0, c), cid=c) for c in range(3)]
        dets = [det(*cell_box(0, c), conf=0.9, cid=c) for c in range(3)]
        return (dets, gts)

    def test_perfect_report(self):
        report = evaluate_detections([self.perfect_sample()], num_classes=3)
        assert (report.precision, report.recall, report.f1) == (1.0, 1.0, 1.0)
        assert report.map50 == 1.0 and report.map50_95 == 1.0
        assert np.array_equal(report.confusion.diagonal()[:3], [1, 1, 1])

    def test_ap_uses_all_detections_but_points_use_threshold(self):
        # A low-confidence TP is invisible to P/R at 0.25 yet still feeds AP.
        gts = [ann(*cell_box(0, 0))]
        dets = [det(*cell_box(0, 0), conf=0.1)]
        report = evaluate_detections([(dets, gts)], num_classes=1)
        assert report.recall == 0.0
        assert report.map50 == 1.0

    def test_json_dict_shape(self):
        report = evaluate_detections(
            [self.perfect_sample()], num_classes=3, class_names=["a", "i", "u"]
        )
        d = report.to_json_dict()
        assert list(d) == [
            "precision",
            "recall",
            "f1",
            "map50",
            "map50_95",
            "per_class_ap",
            "confusion",
            "settings",
        ]
        assert d["per_class_ap"] == {"a": 1.0, "i": 1.0, "u": 1.0}
        assert d["settings"]["num_classes"] == 3
        assert isinstance(d["confusion"], list)

    def test_format_table_mentions_metrics(self):
        report = evaluate_detections([self.perfect_sample()], num_classes=3)
        text = report.format_table()
        for token in ("precision", "recall", "f1", "mAP@50", "mAP@50-95"):
            assert token in text
