"""Training settings: the exported INI hand-off and the class-weight file.

The detector toolkit's ``export-train`` subcommand writes a ``[train]`` INI
section plus a ``{class_name: weight}`` JSON file. This module reads both;
it is the only configuration surface the trainer has, so a hand-edited file
that drifts from the contract fails loudly here.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import ConfigError

OPTIMIZERS = ("sgd",)
LOSSES = ("bce_logits",)
MODEL_SIZES = ("n", "s", "m")

_INI_KEYS = (
    "dataset",
    "class_weights",
    "image_size",
    "batch",
    "optimizer",
    "lr0",
    "momentum",
    "max_epochs",
    "patience",
    "loss",
    "model_size",
    "seed",
)


@dataclass(frozen=True)
class TrainSettings:
    """One training run's full recipe, as handed over by the export step."""

    dataset: str
    class_weights: str
    image_size: int = 640
    batch: int = 32
    optimizer: str = "sgd"
    lr0: float = 0.01
    momentum: float = 0.937
    max_epochs: int = 600
    patience: int = 100
    loss: str = "bce_logits"
    model_size: str = "n"
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.dataset:
            raise ConfigError("dataset path is empty")
        if not self.class_weights:
            raise ConfigError("class_weights path is empty")
        if self.image_size < 32:
            raise ConfigError(f"image_size must be >= 32, got {self.image_size}")
        if self.batch < 1:
            raise ConfigError(f"batch must be >= 1, got {self.batch}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unsupported optimizer {self.optimizer!r}")
        if not (math.isfinite(self.lr0) and self.lr0 > 0):
            raise ConfigError(f"lr0 must be positive, got {self.lr0}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not 1 <= self.patience <= self.max_epochs:
            raise ConfigError(
                f"patience must be in [1, max_epochs], got {self.patience} vs {self.max_epochs}"
            )
        if self.loss not in LOSSES:
            raise ConfigError(f"unsupported loss {self.loss!r}")
        if self.model_size not in MODEL_SIZES:
            raise ConfigError(f"model_size must be one of {MODEL_SIZES}, got {self.model_size!r}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")


def settings_from_mapping(values: dict[str, str]) -> TrainSettings:
    """Build settings from raw INI strings; unknown keys are rejected."""
    for key in values:
        if key not in _INI_KEYS:
            raise ConfigError(f"unknown train option {key!r}")
    kwargs: dict[str, object] = dict(values)
    try:
        for key in ("image_size", "batch", "max_epochs", "patience", "seed"):
            if key in kwargs:
                kwargs[key] = int(str(kwargs[key]))
        for key in ("lr0", "momentum"):
            if key in kwargs:
                kwargs[key] = float(str(kwargs[key]))
    except ValueError as exc:
        raise ConfigError(f"train option {key}: {exc}") from None
    if "dataset" not in kwargs or "class_weights" not in kwargs:
        missing = [k for k in ("dataset", "class_weights") if k not in kwargs]
        raise ConfigError(f"missing train options: {missing}")
    return TrainSettings(**kwargs)  # type: ignore[arg-type]


def read_settings(path: str | Path) -> TrainSettings:
    """Read an exported train.ini; relative file paths resolve against it."""
    p = Path(path)
    cp = configparser.ConfigParser()
    try:
        with open(p, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{p}: {exc}") from None
    if not cp.has_section("train"):
        raise ConfigError(f"{p}: missing [train] section")
    settings = settings_from_mapping(dict(cp["train"]))
    base = p.resolve().parent
    return TrainSettings(
        **{
            **settings.__dict__,
            "dataset": str((base / settings.dataset).resolve()),
            "class_weights": str((base / settings.class_weights).resolve()),
        }
    )


def load_class_weights(path: str | Path, names: Sequence[str]) -> list[float]:
    """Read the exported {class_name: weight} JSON, returned in id order."""
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read class weights {p}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: class weights must be a JSON object")
    missing = [n for n in names if n not in doc]
    if missing:
        raise ConfigError(f"{p}: missing weights for classes {missing}")
    weights = []
    for n in names:
        v = doc[n]
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0:
            raise ConfigError(f"{p}: weight for {n!r} must be a number >= 0, got {v!r}")
        weights.append(float(v))
    return weights
