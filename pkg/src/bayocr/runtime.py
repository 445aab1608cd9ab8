"""Detector integration: sidecar documents, backends, and benchmarking.

Detectors are external to this package. Two backend flavors expose them
behind one interface: ``ReplayBackend`` serves pre-computed sidecar JSON
files keyed by image stem, and ``ProcessBackend`` drives a child process that
reads image paths line by line on stdin and answers with one sidecar JSON
document per line on stdout (a nonzero exit status means failure).

A sidecar document has exactly these fields:

    {"image": str, "width": int, "height": int,
     "detections": [{"class_id": int, "confidence": float,
                     "bbox": [cx, cy, w, h]}]}

with box coordinates normalized to the unit square.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .dataset import BBox
from .detection import (
    EVAL_CONFIDENCE,
    NMS_IOU,
    Detection,
    filter_confidence,
    nms,
)
from .errors import BackendError, InputError, SidecarError
from .imgproc import PipelineConfig, load_raster, run_pipeline

SIDECAR_FIELDS = ("image", "width", "height", "detections")
DETECTION_FIELDS = ("class_id", "confidence", "bbox")


@dataclass(frozen=True)
class DetectionSidecar:
    """One image's detections plus the pixel size they are normalized against."""

    image: str
    width: int
    height: int
    detections: tuple[Detection, ...]


def _expect_int(doc: dict, key: str, minimum: int, where: str) -> int:
    v = doc[key]
    if not isinstance(v, int) or isinstance(v, bool):
        raise SidecarError(f"{where}field '{key}': expected an integer, got {v!r}")
    if v < minimum:
        raise SidecarError(f"{where}field '{key}': expected >= {minimum}, got {v}")
    return v


def parse_sidecar(doc: dict | str, source: str = "") -> DetectionSidecar:
    """Validate a sidecar document; errors name the offending field.

    ``doc`` may be a parsed object or raw JSON text. Unknown fields are
    rejected so typos fail loudly instead of being ignored.
    """
    where = f"{source}: " if source else ""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise SidecarError(f"{where}invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SidecarError(f"{where}sidecar must be a JSON object, got {type(doc).__name__}")
    for key in SIDECAR_FIELDS:
        if key not in doc:
            raise SidecarError(f"{where}field '{key}': missing")
    for key in doc:
        if key not in SIDECAR_FIELDS:
            raise SidecarError(f"{where}unexpected field '{key}'")
    if not isinstance(doc["image"], str) or not doc["image"]:
        raise SidecarError(f"{where}field 'image': expected a non-empty string")
    width = _expect_int(doc, "width", 1, where)
    height = _expect_int(doc, "height", 1, where)
    if not isinstance(doc["detections"], list):
        raise SidecarError(f"{where}field 'detections': expected a list")
    dets = []
    for i, entry in enumerate(doc["detections"]):
        at = f"{where}detections[{i}]"
        if not isinstance(entry, dict):
            raise SidecarError(f"{at}: expected an object")
        for key in DETECTION_FIELDS:
            if key not in entry:
                raise SidecarError(f"{at}: field '{key}': missing")
        for key in entry:
            if key not in DETECTION_FIELDS:
                raise SidecarError(f"{at}: unexpected field '{key}'")
        cid = entry["class_id"]
        if not isinstance(cid, int) or isinstance(cid, bool) or cid < 0:
            raise SidecarError(f"{at}: field 'class_id': expected an integer >= 0, got {cid!r}")
        conf = entry["confidence"]
        if not isinstance(conf, (int, float)) or isinstance(conf, bool) or not 0 <= conf <= 1:
            raise SidecarError(f"{at}: field 'confidence': expected a number in [0, 1], got {conf!r}")
        box = entry["bbox"]
        if (
            not isinstance(box, list)
            or len(box) != 4
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in box)
        ):
            raise SidecarError(f"{at}: field 'bbox': expected [cx, cy, w, h] numbers, got {box!r}")
        try:
            bbox = BBox(*(float(v) for v in box))
        except InputError as exc:
            raise SidecarError(f"{at}: field 'bbox': {exc}") from None
        dets.append(Detection(bbox, cid, float(conf)))
    return DetectionSidecar(doc["image"], width, height, tuple(dets))


def load_sidecar(path: str | Path) -> DetectionSidecar:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise SidecarError(f"cannot read sidecar {p}: {exc}") from None
    return parse_sidecar(text, source=str(p))


def sidecar_to_dict(sidecar: DetectionSidecar) -> dict:
    return {
        "image": sidecar.image,
        "width": sidecar.width,
        "height": sidecar.height,
        "detections": [
            {
                "class_id": d.class_id,
                "confidence": d.confidence,
                "bbox": [d.bbox.cx, d.bbox.cy, d.bbox.w, d.bbox.h],
            }
            for d in sidecar.detections
        ],
    }


def write_sidecar(sidecar: DetectionSidecar, path: str | Path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(sidecar_to_dict(sidecar), indent=2) + "\n", encoding="utf-8")


class DetectorBackend(Protocol):
    """Anything that turns image paths into validated sidecars."""

    label: str

    def run(self, paths: Sequence[str]) -> list[DetectionSidecar]: ...

    def detect_one(self, path: str) -> DetectionSidecar: ...


class ReplayBackend:
    """Serve stored sidecar files from a directory, keyed by image stem."""

    label = "sidecar-replay"

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise BackendError(f"replay directory does not exist: {self.directory}")

    def detect_one(self, path: str) -> DetectionSidecar:
        stem = Path(path).stem
        sidecar_path = self.directory / f"{stem}.json"
        if not sidecar_path.exists():
            raise BackendError(f"no stored sidecar for {stem!r} in {self.directory}")
        return load_sidecar(sidecar_path)

    def run(self, paths: Sequence[str]) -> list[DetectionSidecar]:
        return [self.detect_one(p) for p in paths]

    def close(self) -> None:
        pass


class ProcessBackend:
    """Drive an external detector over the line protocol.

    ``run`` uses a one-shot child process: all paths in, all sidecars out.
    ``detect_one`` keeps a child alive between calls so per-image latency can
    be measured without the startup cost.
    """

    label = "external-process"

    def __init__(self, command: str | Sequence[str], timeout: float | None = 120.0) -> None:
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.command:
            raise BackendError("empty backend command")
        self.timeout = timeout
        self._child: subprocess.Popen | None = None

    def run(self, paths: Sequence[str]) -> list[DetectionSidecar]:
        payload = "".join(f"{p}\n" for p in paths)
        try:
            proc = subprocess.run(
                self.command,
                input=payload,
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except FileNotFoundError:
            raise BackendError(f"backend command not found: {self.command[0]}") from None
        except subprocess.TimeoutExpired:
            raise BackendError(f"backend timed out after {self.timeout}s") from None
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-3:]
            detail = ("; " + " | ".join(tail)) if tail else ""
            raise BackendError(
                f"backend exited with status {proc.returncode}{detail}"
            )
        lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
        if len(lines) != len(paths):
            raise BackendError(
                f"expected {len(paths)} result lines, got {len(lines)}"
            )
        out = []
        for i, line in enumerate(lines, start=1):
            try:
                out.append(parse_sidecar(line, source=f"result line {i}"))
            except SidecarError as exc:
                raise BackendError(str(exc)) from None
        return out

    def _ensure_child(self) -> subprocess.Popen:
        if self._child is None or self._child.poll() is not None:
            try:
                self._child = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    stderr=subprocess.DEVNULL,
                    text=True,
                    bufsize=1,
                )
            except FileNotFoundError:
                raise BackendError(f"backend command not found: {self.command[0]}") from None
        return self._child

    def detect_one(self, path: str) -> DetectionSidecar:
        child = self._ensure_child()
        assert child.stdin is not None and child.stdout is not None
        try:
            child.stdin.write(f"{path}\n")
            child.stdin.flush()
        except (BrokenPipeError, OSError):
            raise BackendError("backend process closed its input pipe") from None
        line = child.stdout.readline()
        if not line:
            code = child.poll()
            raise BackendError(f"backend produced no output (exit status {code})")
        try:
            return parse_sidecar(line, source="result line 1")
        except SidecarError as exc:
            raise BackendError(str(exc)) from None

    def close(self) -> None:
        if self._child is not None:
            if self._child.stdin is not None:
                try:
                    self._child.stdin.close()
                except OSError:
                    pass
            try:
                self._child.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._child.kill()
                self._child.wait()
            self._child = None


def postprocess_sidecar(
    sidecar: DetectionSidecar,
    conf_threshold: float = EVAL_CONFIDENCE,
    nms_iou: float = NMS_IOU,
    class_aware: bool = True,
) -> DetectionSidecar:
    """Apply confidence filtering and NMS to a sidecar's detections."""
    dets = filter_confidence(sidecar.detections, conf_threshold)
    dets = nms(dets, nms_iou, class_aware)
    return DetectionSidecar(sidecar.image, sidecar.width, sidecar.height, tuple(dets))


def detect(
    images: Sequence[str | Path],
    backend: DetectorBackend,
    conf_threshold: float = EVAL_CONFIDENCE,
    nms_iou: float = NMS_IOU,
    class_aware: bool = True,
    postprocess: bool = True,
) -> list[DetectionSidecar]:
    """Run the backend over images and return validated, post-processed sidecars.

    With ``postprocess`` off the backend output passes through untouched
    (still schema-validated), which preserves stored fixtures bit for bit.
    """
    if not images:
        raise InputError("no images to run detection on")
    sidecars = backend.run([str(p) for p in images])
    if postprocess:
        sidecars = [
            postprocess_sidecar(s, conf_threshold, nms_iou, class_aware) for s in sidecars
        ]
    return sidecars


# ---------------------------------------------------------------------------
# Benchmarking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchReport:
    """Latency summary over recorded passes.

    ``fps`` is always 1000 / mean_ms; stage means cover preprocessing (image
    decode plus the optional pixel pipeline), detection, and post-processing.
    """

    backend: str
    samples: int
    warmup: int
    mean_ms: float
    p50_ms: float
    p95_ms: float
    min_ms: float
    max_ms: float
    fps: float
    stages: dict[str, float]

    def to_json_dict(self) -> dict:
        return {
            "backend": self.backend,
            "samples": self.samples,
            "warmup": self.warmup,
            "mean_ms": self.mean_ms,
            "p50_ms": self.p50_ms,
            "p95_ms": self.p95_ms,
            "min_ms": self.min_ms,
            "max_ms": self.max_ms,
            "fps": self.fps,
            "stages": dict(self.stages),
        }


def summarize_latencies(
    total_ms: Sequence[float],
    backend_label: str,
    stage_ms: dict[str, Sequence[float]] | None = None,
    warmup: int = 0,
) -> BenchReport:
    """Fold raw per-image latencies into a BenchReport."""
    if not total_ms:
        raise InputError("cannot summarize zero latency samples")
    lat = np.asarray(total_ms, dtype=np.float64)
    if np.any(lat <= 0) or not np.all(np.isfinite(lat)):
        raise InputError("latencies must be positive finite milliseconds")
    mean = float(lat.mean())
    stages = {}
    if stage_ms:
        stages = {k: float(np.asarray(v, dtype=np.float64).mean()) for k, v in stage_ms.items()}
    return BenchReport(
        backend=backend_label,
        samples=int(lat.size),
        warmup=warmup,
        mean_ms=mean,
        p50_ms=float(np.percentile(lat, 50)),
        p95_ms=float(np.percentile(lat, 95)),
        min_ms=float(lat.min()),
        max_ms=float(lat.max()),
        fps=1000.0 / mean,
        stages=stages,
    )


def benchmark(
    images: Sequence[str | Path],
    backend: DetectorBackend,
    warmup: int = 1,
    repeats: int = 3,
    pipeline: PipelineConfig | None = None,
    conf_threshold: float = EVAL_CONFIDENCE,
    nms_iou: float = NMS_IOU,
) -> BenchReport:
    """Time detection end to end over several passes of the image list.

    Each pass touches every image: decode (plus the optional preprocessing
    pipeline), backend detection, then confidence filter and NMS. The first
    ``warmup`` passes are discarded; the remaining ``repeats`` passes
    contribute one total-latency sample per image. Wall time comes from the
    monotonic high-resolution clock.
    """
    if not images:
        raise InputError("no images to benchmark")
    if warmup < 0 or repeats < 1:
        raise InputError(f"need warmup >= 0 and repeats >= 1, got {warmup}, {repeats}")
    paths = [str(p) for p in images]
    totals: list[float] = []
    stage_ms: dict[str, list[float]] = {"preprocess": [], "detect": [], "postprocess": []}
    try:
        for pass_idx in range(warmup + repeats):
            record = pass_idx >= warmup
            for path in paths:
                t0 = time.perf_counter()
                raster = load_raster(path)
                if pipeline is not None:
                    run_pipeline(raster, pipeline)
                t1 = time.perf_counter()
                sidecar = backend.detect_one(path)
                t2 = time.perf_counter()
                postprocess_sidecar(sidecar, conf_threshold, nms_iou)
                t3 = time.perf_counter()
                if record:
                    totals.append((t3 - t0) * 1000.0)
                    stage_ms["preprocess"].append((t1 - t0) * 1000.0)
                    stage_ms["detect"].append((t2 - t1) * 1000.0)
                    stage_ms["postprocess"].append((t3 - t2) * 1000.0)
    finally:
        close = getattr(backend, "close", None)
        if close is not None:
            close()
    return summarize_latencies(totals, backend.label, stage_ms, warmup=warmup)
