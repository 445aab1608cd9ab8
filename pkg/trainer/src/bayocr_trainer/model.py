"""A deliberately small single-scale grid detector.

Three stride-2 conv blocks take the letterboxed canvas down to a G x G grid
(stride 8); a 1x1 head predicts per cell a box in sigmoid space, an
objectness logit, and one logit per class. The n/s/m variants differ only in
channel width. This is training-ecosystem glue, not a competitive
architecture: the contract is the sidecar output, not the score.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

WIDTHS = {"n": 16, "s": 32, "m": 48}
BOX_GAIN = 5.0
OBJ_BIAS_INIT = -4.0
MAX_DECODE = 300

# Channel layout of the head output.
_TX, _TY, _TW, _TH, _OBJ = 0, 1, 2, 3, 4


def _block(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=2, padding=1, bias=False),
        nn.BatchNorm2d(cout),
        nn.SiLU(inplace=True),
    )


class GridDetector(nn.Module):
    def __init__(self, num_classes: int, model_size: str = "n") -> None:
        if model_size not in WIDTHS:
            raise ValueError(f"model_size must be one of {tuple(WIDTHS)}, got {model_size!r}")
        if num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {num_classes}")
        super().__init__()
        w = WIDTHS[model_size]
        self.num_classes = num_classes
        self.model_size = model_size
        self.backbone = nn.Sequential(_block(3, w), _block(w, 2 * w), _block(2 * w, 4 * w))
        self.head = nn.Conv2d(4 * w, 5 + num_classes, 1)
        # Start objectness rare so the background-dominated obj loss is calm.
        with torch.no_grad():
            self.head.bias[_OBJ] = OBJ_BIAS_INIT

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.backbone(x))


def build_targets(
    boxes: torch.Tensor, grid: int, num_classes: int
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Expand (n, 5) canvas boxes into per-cell training targets.

    Returns (obj (G, G), box (4, G, G), cls (C, G, G), mask (G, G)); each
    box claims its center cell, later boxes winning a collision. Box targets
    live in the head's sigmoid space: cell-relative center plus
    canvas-normalized size.
    """
    obj = torch.zeros(grid, grid)
    box = torch.zeros(4, grid, grid)
    cls = torch.zeros(num_classes, grid, grid)
    mask = torch.zeros(grid, grid, dtype=torch.bool)
    for row in boxes:
        cid = int(row[0])
        cx, cy, w, h = (float(v) for v in row[1:])
        col = min(max(int(cx * grid), 0), grid - 1)
        rowi = min(max(int(cy * grid), 0), grid - 1)
        obj[rowi, col] = 1.0
        box[_TX, rowi, col] = cx * grid - col
        box[_TY, rowi, col] = cy * grid - rowi
        box[_TW, rowi, col] = w
        box[_TH, rowi, col] = h
        cls[:, rowi, col] = 0.0
        cls[cid, rowi, col] = 1.0
        mask[rowi, col] = True
    return obj, box, cls, mask


def detection_loss(
    logits: torch.Tensor,
    targets: list[torch.Tensor],
    class_weights: torch.Tensor | None = None,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Objectness + box + weighted class loss for one batch.

    Objectness is binary cross-entropy with logits over every cell; box is
    mean squared error in sigmoid space at claimed cells; class is binary
    cross-entropy with logits at claimed cells, weighted per class by the
    exported weights.
    """
    batch, channels, grid, _ = logits.shape
    num_classes = channels - 5
    device = logits.device
    obj_t = torch.zeros(batch, grid, grid, device=device)
    box_t = torch.zeros(batch, 4, grid, grid, device=device)
    cls_t = torch.zeros(batch, num_classes, grid, grid, device=device)
    mask = torch.zeros(batch, grid, grid, dtype=torch.bool, device=device)
    for i, boxes in enumerate(targets):
        o, b, c, m = build_targets(boxes, grid, num_classes)
        obj_t[i], box_t[i], cls_t[i], mask[i] = (
            o.to(device),
            b.to(device),
            c.to(device),
            m.to(device),
        )

    obj_loss = F.binary_cross_entropy_with_logits(logits[:, _OBJ], obj_t)
    if mask.any():
        pred_box = torch.sigmoid(logits[:, :4].permute(0, 2, 3, 1)[mask])
        true_box = box_t.permute(0, 2, 3, 1)[mask]
        box_loss = F.mse_loss(pred_box, true_box)
        pred_cls = logits[:, 5:].permute(0, 2, 3, 1)[mask]
        true_cls = cls_t.permute(0, 2, 3, 1)[mask]
        weight = class_weights.to(device) if class_weights is not None else None
        cls_loss = F.binary_cross_entropy_with_logits(pred_cls, true_cls, weight=weight)
    else:
        box_loss = logits.new_zeros(())
        cls_loss = logits.new_zeros(())

    total = obj_loss + BOX_GAIN * box_loss + cls_loss
    parts = {
        "obj": float(obj_loss.detach()),
        "box": float(box_loss.detach()),
        "cls": float(cls_loss.detach()),
    }
    return total, parts


def decode(
    logits: torch.Tensor, conf_threshold: float
) -> list[tuple[int, float, float, float, float, float]]:
    """Turn one image's (5+C, G, G) head output into canvas-space boxes.

    Confidence is objectness times the best class probability; results come
    back as (class_id, confidence, cx, cy, w, h) sorted by descending
    confidence, at most MAX_DECODE of them.
    """
    channels, grid, _ = logits.shape
    obj = torch.sigmoid(logits[_OBJ])
    cls_prob = torch.sigmoid(logits[5:])
    best_prob, best_cls = cls_prob.max(dim=0)
    conf = obj * best_prob
    keep = (conf >= conf_threshold).nonzero(as_tuple=False)
    out = []
    for rowi, col in keep.tolist():
        c = float(conf[rowi, col])
        cx = (col + float(torch.sigmoid(logits[_TX, rowi, col]))) / grid
        cy = (rowi + float(torch.sigmoid(logits[_TY, rowi, col]))) / grid
        w = float(torch.sigmoid(logits[_TW, rowi, col]))
        h = float(torch.sigmoid(logits[_TH, rowi, col]))
        out.append((int(best_cls[rowi, col]), c, cx, cy, w, h))
    out.sort(key=lambda d: (-d[1], d[0]))
    return out[:MAX_DECODE]
