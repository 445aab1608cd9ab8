"""Deterministic raster preprocessing for handwritten character detection.

Stages: grayscale conversion, unsharp-style sharpening, total-variation
denoising, Otsu binarization, and letterbox normalization. A small pipeline
driver composes them in a configurable order. Every operation is pure: the
input raster is never mutated and equal inputs produce bit-equal outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import cv2
import numpy as np

from .errors import ConfigError, InputError

# BT.601 luma coefficients.
GRAY_WEIGHTS = (0.299, 0.587, 0.114)

# Letterbox fill. Mid-gray, so padded margins never read as ink.
PAD_VALUE = 114

STAGES = ("grayscale", "sharpen", "denoise", "binarize", "normalize")

# Default order mirrors the preprocessing column layout used during dataset
# preparation: denoise the grayscale image before thresholding it.
DEFAULT_STAGE_ORDER = ("grayscale", "sharpen", "denoise", "binarize", "normalize")

# Alternate order: threshold first, then smooth the binary map. Kept selectable
# because both arrangements are defensible and produce different rasters.
BINARIZE_FIRST_STAGE_ORDER = ("grayscale", "sharpen", "binarize", "denoise", "normalize")


@dataclass(frozen=True, eq=False)
class Raster:
    """8-bit image: (h, w) grayscale or (h, w, 3) RGB, row-major, C-contiguous."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise InputError(f"raster pixels must be uint8, got {px.dtype}")
        if not (px.ndim == 2 or (px.ndim == 3 and px.shape[2] == 3)):
            raise InputError(f"raster shape must be (h, w) or (h, w, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise InputError("raster must contain at least one pixel")
        object.__setattr__(self, "pixels", np.ascontiguousarray(px))

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    def same_pixels(self, other: "Raster") -> bool:
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )


def load_raster(path: str | Path) -> Raster:
    """Read an image file as a Raster (RGB channel order for color files)."""
    data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if data is None:
        raise InputError(f"could not read image: {path}")
    if data.ndim == 3 and data.shape[2] == 4:
        data = cv2.cvtColor(data, cv2.COLOR_BGRA2BGR)
    if data.ndim == 3:
        data = cv2.cvtColor(data, cv2.COLOR_BGR2RGB)
    if data.dtype != np.uint8:
        # 16-bit PNGs and friends: rescale into 8 bits rather than reject.
        data = np.clip(np.rint(data.astype(np.float64) / 257.0), 0, 255).astype(np.uint8)
    return Raster(data)


def save_raster(raster: Raster, path: str | Path) -> None:
    """Write a Raster to disk; color rasters are stored from RGB order."""
    px = raster.pixels
    if raster.channels == 3:
        px = cv2.cvtColor(px, cv2.COLOR_RGB2BGR)
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(out), px):
        raise InputError(f"could not write image: {out}")


def to_grayscale(img: Raster) -> Raster:
    """Collapse RGB to single-channel luma; grayscale input passes through.

    Uses BT.601 weights with round-to-nearest, so a pure red pixel maps to
    round(0.299 * 255) = 76.
    """
    if img.channels == 1:
        return img
    luma = img.pixels.astype(np.float64) @ np.asarray(GRAY_WEIGHTS)
    return Raster(np.clip(np.rint(luma), 0, 255).astype(np.uint8))


def sharpen(img: Raster, strength: float = 1.0) -> Raster:
    """Boost edges with a 4-neighbor Laplacian kernel.

    Output pixel = (1 + 4*strength) * center - strength * (N + S + E + W),
    with clamp-to-edge borders and the result clamped to [0, 255].
    strength = 0 is the identity; negative strength is rejected.
    """
    if img.channels != 1:
        raise InputError("sharpen expects a grayscale raster")
    s = float(strength)
    if not np.isfinite(s) or s < 0:
        raise InputError(f"sharpen strength must be finite and >= 0, got {strength}")
    if s == 0.0:
        return img
    p = np.pad(img.pixels.astype(np.float64), 1, mode="edge")
    core = p[1:-1, 1:-1]
    neighbors = p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:]
    out = (1.0 + 4.0 * s) * core - s * neighbors
    return Raster(np.clip(np.rint(out), 0, 255).astype(np.uint8))


class OtsuResult(NamedTuple):
    threshold: int
    binary: Raster
    degenerate: bool


def otsu_binarize(img: Raster, tie_break: str = "lowest") -> OtsuResult:
    """Threshold a grayscale raster by maximizing between-class variance.

    The argmax over all 256 candidate thresholds is evaluated in exact integer
    arithmetic (the variance ratio is compared by cross-multiplication), so
    ties are decided deterministically by ``tie_break``: "lowest" keeps the
    smallest maximizing threshold, "highest" the largest. Pixels <= threshold
    become 0 (ink), the rest 255. A constant image is degenerate: the
    threshold is that constant and the binary output is all 255 (no ink).
    """
    if img.channels != 1:
        raise InputError("otsu_binarize expects a grayscale raster")
    if tie_break not in ("lowest", "highest"):
        raise InputError(f"tie_break must be 'lowest' or 'highest', got {tie_break!r}")

    hist = np.bincount(img.pixels.ravel(), minlength=256)
    nonzero = np.flatnonzero(hist)
    if nonzero.size == 1:
        level = int(nonzero[0])
        binary = Raster(np.full(img.pixels.shape, 255, dtype=np.uint8))
        return OtsuResult(level, binary, True)

    counts = hist.tolist()
    total = int(img.pixels.size)
    weighted = [i * counts[i] for i in range(256)]
    total_sum = sum(weighted)

    # Between-class variance at threshold t is proportional to
    # (s0*c1 - s1*c0)^2 / (c0*c1); compare candidates without division.
    best_t, best_num, best_den = 0, -1, 1
    c0 = 0
    s0 = 0
    for t in range(256):
        c0 += counts[t]
        s0 += weighted[t]
        c1 = total - c0
        if c0 == 0 or c1 == 0:
            num, den = 0, 1
        else:
            s1 = total_sum - s0
            num = (s0 * c1 - s1 * c0) ** 2
            den = c0 * c1
        lhs = num * best_den
        rhs = best_num * den
        if lhs > rhs or (tie_break == "highest" and lhs == rhs):
            best_t, best_num, best_den = t, num, den

    binary = np.where(img.pixels <= best_t, 0, 255).astype(np.uint8)
    return OtsuResult(best_t, Raster(binary), False)


def _tv_gradient(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Forward differences, zero at the far edge.
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:, :-1] = u[:, 1:] - u[:, :-1]
    gy[:-1, :] = u[1:, :] - u[:-1, :]
    return gx, gy


def _tv_divergence(px: np.ndarray, py: np.ndarray) -> np.ndarray:
    # Negative adjoint of _tv_gradient.
    dx = px.copy()
    dx[:, 1:] = px[:, 1:] - px[:, :-1]
    dy = py.copy()
    dy[1:, :] = py[1:, :] - py[:-1, :]
    return dx + dy


def tv_denoise(img: Raster, weight: float = 0.1, iterations: int = 50) -> Raster:
    """Total-variation denoising via the dual (Chambolle) projection scheme.

    Approximately minimizes 0.5 * ||u - f||^2 + weight * TV(u), where TV is the
    isotropic total variation with forward differences and intensities are
    scaled to [0, 1] before solving (so ``weight`` is on that scale). The
    result is rescaled and rounded back to 8 bits. weight = 0 returns the
    input unchanged; constant inputs are fixed points for any weight.
    """
    if img.channels != 1:
        raise InputError("tv_denoise expects a grayscale raster")
    w = float(weight)
    if not np.isfinite(w) or w < 0:
        raise InputError(f"tv weight must be finite and >= 0, got {weight}")
    if int(iterations) < 1:
        raise InputError(f"tv iterations must be >= 1, got {iterations}")
    if w == 0.0:
        return img

    f = img.pixels.astype(np.float64) / 255.0
    scaled = f / w
    px = np.zeros_like(f)
    py = np.zeros_like(f)
    tau = 0.25
    for _ in range(int(iterations)):
        gx, gy = _tv_gradient(_tv_divergence(px, py) - scaled)
        norm = np.sqrt(gx * gx + gy * gy)
        denom = 1.0 + tau * norm
        px = (px + tau * gx) / denom
        py = (py + tau * gy) / denom
    u = f - w * _tv_divergence(px, py)
    return Raster(np.clip(np.rint(u * 255.0), 0, 255).astype(np.uint8))


class LetterboxResult(NamedTuple):
    raster: Raster
    scale: float
    pad_x: int
    pad_y: int


def letterbox(img: Raster, target: int = 640) -> LetterboxResult:
    """Resize the longer side to ``target`` and pad the rest with mid-gray.

    Aspect ratio is preserved (bilinear resize); padding is split evenly with
    the integer left/top offsets returned as (pad_x, pad_y). An image already
    at target size passes through with scale 1 and zero padding.
    """
    t = int(target)
    if t < 1:
        raise InputError(f"letterbox target must be >= 1, got {target}")
    w, h = img.width, img.height
    scale = t / max(w, h)
    new_w = min(t, max(1, int(round(w * scale))))
    new_h = min(t, max(1, int(round(h * scale))))
    if (new_w, new_h) == (w, h):
        resized = img.pixels
    else:
        resized = cv2.resize(img.pixels, (new_w, new_h), interpolation=cv2.INTER_LINEAR)
    pad_x = (t - new_w) // 2
    pad_y = (t - new_h) // 2
    shape = (t, t) if img.channels == 1 else (t, t, 3)
    canvas = np.full(shape, PAD_VALUE, dtype=np.uint8)
    canvas[pad_y : pad_y + new_h, pad_x : pad_x + new_w] = resized
    return LetterboxResult(Raster(canvas), scale, pad_x, pad_y)


def box_to_canvas(
    box: tuple[float, float, float, float],
    orig_w: int,
    orig_h: int,
    target: int,
    scale: float,
    pad_x: int,
    pad_y: int,
) -> tuple[float, float, float, float]:
    """Map a normalized (cx, cy, w, h) box from the source image onto the letterboxed canvas."""
    cx, cy, w, h = box
    return (
        (cx * orig_w * scale + pad_x) / target,
        (cy * orig_h * scale + pad_y) / target,
        w * orig_w * scale / target,
        h * orig_h * scale / target,
    )


def box_from_canvas(
    box: tuple[float, float, float, float],
    orig_w: int,
    orig_h: int,
    target: int,
    scale: float,
    pad_x: int,
    pad_y: int,
) -> tuple[float, float, float, float]:
    """Inverse of box_to_canvas."""
    cx, cy, w, h = box
    return (
        (cx * target - pad_x) / (orig_w * scale),
        (cy * target - pad_y) / (orig_h * scale),
        w * target / (orig_w * scale),
        h * target / (orig_h * scale),
    )


@dataclass(frozen=True)
class PipelineConfig:
    """Preprocessing stage order plus per-stage parameters.

    ``stage_order`` draws from STAGES without repeats; when "normalize"
    appears it must come last, since letterboxing changes the geometry every
    other stage assumes.
    """

    stage_order: tuple[str, ...] = DEFAULT_STAGE_ORDER
    sharpen_strength: float = 1.0
    tv_weight: float = 0.1
    tv_iterations: int = 50
    target_size: int = 640
    otsu_tie_break: str = "lowest"

    def __post_init__(self) -> None:
        order = tuple(self.stage_order)
        object.__setattr__(self, "stage_order", order)
        for stage in order:
            if stage not in STAGES:
                raise ConfigError(f"unknown stage {stage!r}; expected one of {STAGES}")
        if len(set(order)) != len(order):
            raise ConfigError(f"stage_order repeats a stage: {order}")
        if "normalize" in order and order[-1] != "normalize":
            raise ConfigError("'normalize' must be the final stage")
        if not np.isfinite(self.sharpen_strength) or self.sharpen_strength < 0:
            raise ConfigError(f"sharpen_strength must be >= 0, got {self.sharpen_strength}")
        if not np.isfinite(self.tv_weight) or self.tv_weight < 0:
            raise ConfigError(f"tv_weight must be >= 0, got {self.tv_weight}")
        if int(self.tv_iterations) < 1:
            raise ConfigError(f"tv_iterations must be >= 1, got {self.tv_iterations}")
        if int(self.target_size) < 1:
            raise ConfigError(f"target_size must be >= 1, got {self.target_size}")
        if self.otsu_tie_break not in ("lowest", "highest"):
            raise ConfigError(f"otsu_tie_break must be 'lowest' or 'highest'")


def run_pipeline(img: Raster, config: PipelineConfig | None = None) -> Raster:
    """Apply the configured stages in order and return the processed raster.

    Stages that require single-channel input (sharpen, denoise, binarize)
    raise ConfigError when reached with a color raster still in flight; put
    "grayscale" ahead of them in the order.
    """
    cfg = config if config is not None else PipelineConfig()
    out = img
    for stage in cfg.stage_order:
        if stage == "grayscale":
            out = to_grayscale(out)
        elif stage == "sharpen":
            _require_gray(out, stage)
            out = sharpen(out, cfg.sharpen_strength)
        elif stage == "denoise":
            _require_gray(out, stage)
            out = tv_denoise(out, cfg.tv_weight, cfg.tv_iterations)
        elif stage == "binarize":
            _require_gray(out, stage)
            out = otsu_binarize(out, cfg.otsu_tie_break).binary
        elif stage == "normalize":
            out = letterbox(out, cfg.target_size).raster
    return out


def run_pipeline_stages(img: Raster, config: PipelineConfig | None = None) -> list[tuple[str, Raster]]:
    """Like run_pipeline, but return every intermediate as (stage_name, raster).

    The list starts with ("input", img) and has one entry per configured
    stage, in order.
    """
    cfg = config if config is not None else PipelineConfig()
    steps: list[tuple[str, Raster]] = [("input", img)]
    for stage in cfg.stage_order:
        partial = PipelineConfig(
            stage_order=(stage,),
            sharpen_strength=cfg.sharpen_strength,
            tv_weight=cfg.tv_weight,
            tv_iterations=cfg.tv_iterations,
            target_size=cfg.target_size,
            otsu_tie_break=cfg.otsu_tie_break,
        )
        steps.append((stage, run_pipeline(steps[-1][1], partial)))
    return steps


def _require_gray(img: Raster, stage: str) -> None:
    if img.channels != 1:
        raise ConfigError(
            f"stage '{stage}' needs a grayscale raster; place 'grayscale' earlier in stage_order"
        )
