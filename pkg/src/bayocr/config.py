"""Configuration files: INI loading, layered option resolution, train config.

Option precedence everywhere is command line > config file > built-in
default. Config files are INI style with lowercase keys grouped into
sections (``[pipeline]``, ``[detection]``, ``[train]``).
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Mapping, TypeVar

from .errors import ConfigError
from .imgproc import PipelineConfig

T = TypeVar("T")

_BOOL_WORDS = {
    "1": True,
    "true": True,
    "yes": True,
    "on": True,
    "0": False,
    "false": False,
    "no": False,
    "off": False,
}


def load_config_file(path: str | Path) -> configparser.ConfigParser:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file does not exist: {p}")
    cp = configparser.ConfigParser()
    try:
        cp.read_string(p.read_text(encoding="utf-8"), source=str(p))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config file: {exc}") from None
    return cp


def parse_bool(text: str) -> bool:
    try:
        return _BOOL_WORDS[text.strip().lower()]
    except KeyError:
        raise ConfigError(f"expected a boolean, got {text!r}") from None


def parse_stage_order(text: str) -> tuple[str, ...]:
    stages = tuple(s.strip() for s in text.split(",") if s.strip())
    if not stages:
        raise ConfigError(f"stage order is empty: {text!r}")
    return stages


def resolve(
    cli_value: T | None,
    cp: configparser.ConfigParser | None,
    section: str,
    key: str,
    default: T,
    parse: Callable[[str], T],
) -> T:
    """Pick the effective value for one option.

    The command-line value wins when present; otherwise the config file
    section is consulted; otherwise the default applies. Config file values
    are strings and go through ``parse``, with errors naming the option.
    """
    if cli_value is not None:
        return cli_value
    if cp is not None and cp.has_option(section, key):
        raw = cp.get(section, key)
        try:
            return parse(raw)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None
    return default


def build_pipeline_config(
    cp: configparser.ConfigParser | None = None,
    stage_order: tuple[str, ...] | None = None,
    sharpen_strength: float | None = None,
    tv_weight: float | None = None,
    tv_iterations: int | None = None,
    target_size: int | None = None,
    otsu_tie_break: str | None = None,
) -> PipelineConfig:
    """Assemble a PipelineConfig from explicit values, a config file, and defaults."""
    base = PipelineConfig()
    return PipelineConfig(
        stage_order=resolve(
            stage_order, cp, "pipeline", "stage_order", base.stage_order, parse_stage_order
        ),
        sharpen_strength=resolve(
            sharpen_strength, cp, "pipeline", "sharpen_strength", base.sharpen_strength, float
        ),
        tv_weight=resolve(tv_weight, cp, "pipeline", "tv_weight", base.tv_weight, float),
        tv_iterations=resolve(
            tv_iterations, cp, "pipeline", "tv_iterations", base.tv_iterations, int
        ),
        target_size=resolve(target_size, cp, "pipeline", "target_size", base.target_size, int),
        otsu_tie_break=resolve(
            otsu_tie_break, cp, "pipeline", "otsu_tie_break", base.otsu_tie_break, str
        ),
    )


@dataclass(frozen=True)
class TrainConfig:
    """Everything a trainer needs, as written by the export step.

    Defaults mirror the training recipe the detector models were tuned with:
    640-pixel inputs, SGD at lr 0.01 with momentum 0.937, batches of 32, up
    to 600 epochs with early stopping after 100 stale epochs, and
    binary-cross-entropy-with-logits losses weighted per class.
    """

    dataset: str = ""
    class_weights: str = "class_weights.json"
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
        if self.image_size < 32:
            raise ConfigError(f"image_size must be >= 32, got {self.image_size}")
        if self.batch < 1:
            raise ConfigError(f"batch must be >= 1, got {self.batch}")
        if self.optimizer != "sgd":
            raise ConfigError(f"unsupported optimizer {self.optimizer!r}")
        if not (math.isfinite(self.lr0) and self.lr0 > 0):
            raise ConfigError(f"lr0 must be positive, got {self.lr0}")
        if not (0 <= self.momentum < 1):
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not 1 <= self.patience <= self.max_epochs:
            raise ConfigError(
                f"patience must be in [1, max_epochs], got {self.patience} vs {self.max_epochs}"
            )
        if self.loss != "bce_logits":
            raise ConfigError(f"unsupported loss {self.loss!r}")
        if self.model_size not in ("n", "s", "m"):
            raise ConfigError(f"model_size must be n, s, or m, got {self.model_size!r}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["train"] = {}
        section = cp["train"]
        for f in fields(self):
            section[f.name] = str(getattr(self, f.name))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


_TRAIN_PARSERS: Mapping[str, Callable[[str], object]] = {
    "dataset": str,
    "class_weights": str,
    "image_size": int,
    "batch": int,
    "optimizer": str,
    "lr0": float,
    "momentum": float,
    "max_epochs": int,
    "patience": int,
    "loss": str,
    "model_size": str,
    "seed": int,
}


def train_config_from_mapping(values: Mapping[str, str]) -> TrainConfig:
    kwargs: dict[str, object] = {}
    for key, raw in values.items():
        parser = _TRAIN_PARSERS.get(key)
        if parser is None:
            raise ConfigError(f"unknown train option {key!r}")
        try:
            kwargs[key] = parser(raw)
        except ValueError as exc:
            raise ConfigError(f"train option {key}: {exc}") from None
    return TrainConfig(**kwargs)  # type: ignore[arg-type]


def read_train_config(path: str | Path) -> TrainConfig:
    cp = load_config_file(path)
    if not cp.has_section("train"):
        raise ConfigError(f"{path}: missing [train] section")
    return train_config_from_mapping(dict(cp["train"]))


def write_train_config(config: TrainConfig, path: str | Path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(config.to_ini(), encoding="utf-8")
