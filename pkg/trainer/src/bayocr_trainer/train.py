"""The training loop: SGD fine-tuning with early stopping and a CSV log.

Everything a run needs arrives in a TrainSettings (read from the exported
train.ini); everything it produces lands in one output directory:

    out/model.pt          best-validation checkpoint (opaque artifact)
    out/loss_log.csv      "epoch,train_loss,val_loss", one row per epoch
    out/val_sidecars/     best model's detections on the validation split

Runs with the same settings and a single worker are bit-reproducible on the
same hardware class: the seed fixes init and batch order, and the log rows
are formatted from deterministic arithmetic.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import torch
from torch.utils.data import DataLoader

from .config import TrainSettings, load_class_weights
from .data import PageDataset, collate, read_class_names, scan_split
from .errors import DataError
from .infer import infer_to_sidecars, load_predictor
from .model import GridDetector, detection_loss

VAL_SIDECAR_CONFIDENCE = 0.25

Logger = Callable[[str], None]


def _stderr(msg: str) -> None:
    print(msg, file=sys.stderr)


class EarlyStopper:
    """Stop after ``patience`` consecutive epochs without improvement.

    ``update`` records one epoch's validation loss and returns True when
    training should stop now; improvement means strictly lower than the best
    seen. After an update, ``stale == 0`` iff that epoch improved.
    """

    def __init__(self, patience: int) -> None:
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        self.patience = patience
        self.best = math.inf
        self.stale = 0

    def update(self, val_loss: float) -> bool:
        if val_loss < self.best:
            self.best = val_loss
            self.stale = 0
            return False
        self.stale += 1
        return self.stale >= self.patience


def resolve_device(requested: str, log: Logger = _stderr) -> torch.device:
    """Pick the compute device; a missing GPU degrades to CPU with a warning."""
    if requested == "cpu":
        return torch.device("cpu")
    if requested not in ("auto", "cuda"):
        raise ValueError(f"device must be auto, cpu, or cuda, got {requested!r}")
    if torch.cuda.is_available():
        return torch.device("cuda")
    log("warning: no GPU available; training on CPU")
    return torch.device("cpu")


@dataclass(frozen=True)
class TrainRun:
    """One completed training run and where its artifacts live."""

    settings: TrainSettings
    device: str
    epochs_run: int
    best_epoch: int
    best_val_loss: float
    stopped_early: bool
    model_path: Path
    loss_log_path: Path
    sidecar_dir: Path
    loss_rows: tuple[tuple[int, float, float], ...]


def _run_epoch(
    model: GridDetector,
    loader: DataLoader,
    weights: torch.Tensor,
    device: torch.device,
    optimizer: torch.optim.Optimizer | None,
) -> float:
    training = optimizer is not None
    model.train(training)
    total, count = 0.0, 0
    with torch.set_grad_enabled(training):
        for images, targets in loader:
            images = images.to(device)
            loss, _ = detection_loss(model(images), targets, weights)
            if optimizer is not None:
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            total += float(loss.detach()) * images.shape[0]
            count += images.shape[0]
    return total / count


def train(
    settings: TrainSettings,
    out_dir: str | Path,
    device: str = "auto",
    log: Logger = _stderr,
) -> TrainRun:
    """Fine-tune a detector per the exported settings; see the module docs.

    The validation split drives checkpointing and early stopping; when it is
    missing or empty the training split stands in for it, with a warning.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(settings.seed)

    names = read_class_names(Path(settings.dataset) / "classes.txt")
    weights = torch.tensor(
        load_class_weights(settings.class_weights, names), dtype=torch.float32
    )
    train_items = scan_split(settings.dataset, "train", len(names))
    if not train_items:
        raise DataError(f"train split has no images under {settings.dataset}")
    try:
        val_items = scan_split(settings.dataset, "val", len(names))
    except DataError:
        val_items = []
    if not val_items:
        log("warning: validation split empty; validating on the training split")
        val_items = train_items

    dev = resolve_device(device, log)
    model = GridDetector(len(names), settings.model_size).to(dev)
    log(
        f"training: model_size={settings.model_size}"
        f" image_size={settings.image_size} batch={settings.batch}"
        f" optimizer={settings.optimizer} lr0={settings.lr0:g}"
        f" momentum={settings.momentum:g} max_epochs={settings.max_epochs}"
        f" patience={settings.patience} seed={settings.seed} device={dev.type}"
        f" classes={len(names)} train={len(train_items)} val={len(val_items)}"
    )

    generator = torch.Generator()
    generator.manual_seed(settings.seed)
    train_loader = DataLoader(
        PageDataset(train_items, settings.image_size),
        batch_size=settings.batch,
        shuffle=True,
        generator=generator,
        collate_fn=collate,
        num_workers=0,
    )
    val_loader = DataLoader(
        PageDataset(val_items, settings.image_size),
        batch_size=settings.batch,
        shuffle=False,
        collate_fn=collate,
        num_workers=0,
    )
    optimizer = torch.optim.SGD(model.parameters(), lr=settings.lr0, momentum=settings.momentum)
    stopper = EarlyStopper(settings.patience)

    model_path = out / "model.pt"
    log_path = out / "loss_log.csv"
    rows: list[tuple[int, float, float]] = []
    best_epoch = 0
    stopped_early = False
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,val_loss\n")
        for epoch in range(1, settings.max_epochs + 1):
            train_loss = _run_epoch(model, train_loader, weights, dev, optimizer)
            val_loss = _run_epoch(model, val_loader, weights, dev, None)
            rows.append((epoch, train_loss, val_loss))
            fh.write(f"{epoch},{train_loss:.8f},{val_loss:.8f}\n")
            fh.flush()
            stop = stopper.update(val_loss)
            if stopper.stale == 0:
                best_epoch = epoch
                torch.save(
                    {
                        "state_dict": {
                            k: v.detach().cpu() for k, v in model.state_dict().items()
                        },
                        "model_size": settings.model_size,
                        "image_size": settings.image_size,
                        "num_classes": len(names),
                        "class_names": list(names),
                    },
                    model_path,
                )
            log(
                f"epoch {epoch}/{settings.max_epochs}:"
                f" train {train_loss:.6f} val {val_loss:.6f}"
                + (" *" if stopper.stale == 0 else "")
            )
            if stop:
                stopped_early = True
                log(f"early stop: no improvement for {stopper.patience} epochs")
                break

    sidecar_dir = out / "val_sidecars"
    predictor = load_predictor(model_path, dev, VAL_SIDECAR_CONFIDENCE)
    infer_to_sidecars(predictor, [item.image for item in val_items], sidecar_dir, log=log)
    return TrainRun(
        settings=settings,
        device=dev.type,
        epochs_run=len(rows),
        best_epoch=best_epoch,
        best_val_loss=stopper.best,
        stopped_early=stopped_early,
        model_path=model_path,
        loss_log_path=log_path,
        sidecar_dir=sidecar_dir,
        loss_rows=tuple(rows),
    )
