"""Detector fine-tuning companion for the bayocr toolkit.

Consumes the toolkit's exported training hand-off (train.ini plus class
weights), fine-tunes a small grid detector on the standard dataset layout,
and emits predictions as sidecar JSON, both in batch and over the external
process line protocol. The two packages share only file formats: this one
never imports the toolkit.
"""

from .config import TrainSettings, load_class_weights, read_settings
from .data import (
    LayoutItem,
    PageDataset,
    box_to_canvas,
    box_to_image,
    collate,
    decode_image,
    letterbox,
    parse_labels,
    read_class_names,
    read_labels,
    scan_split,
)
from .errors import ConfigError, DataError, ModelError, TrainerError
from .infer import (
    GroundTruthEcho,
    TrainedPredictor,
    clamp_box,
    infer_to_sidecars,
    load_model,
    load_predictor,
    serve,
    sidecar_doc,
)
from .model import GridDetector, build_targets, decode, detection_loss
from .train import EarlyStopper, TrainRun, resolve_device, train

__all__ = [
    "ConfigError",
    "DataError",
    "EarlyStopper",
    "GridDetector",
    "GroundTruthEcho",
    "LayoutItem",
    "ModelError",
    "PageDataset",
    "TrainRun",
    "TrainSettings",
    "TrainedPredictor",
    "TrainerError",
    "box_to_canvas",
    "box_to_image",
    "build_targets",
    "clamp_box",
    "collate",
    "decode",
    "decode_image",
    "detection_loss",
    "infer_to_sidecars",
    "letterbox",
    "load_class_weights",
    "load_model",
    "load_predictor",
    "parse_labels",
    "read_class_names",
    "read_labels",
    "read_settings",
    "resolve_device",
    "scan_split",
    "serve",
    "sidecar_doc",
    "train",
]
