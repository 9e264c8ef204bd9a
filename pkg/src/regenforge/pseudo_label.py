"""Full-image pseudo-labels via sliding-window classification.

Each window is classified into a probability vector; vectors accumulate
over the window's pixels and the final mask is the per-pixel argmax of the
coverage-normalized scores (soft voting, ties to the lowest class id).
Edge windows are re-anchored to the image border by default so the
classifier only ever sees real pixels. The classifier itself is pluggable:
a subprocess speaking a line-delimited JSON protocol, or a builtin stub
for tests and demos.
"""

from __future__ import annotations

import base64
import io
import json
import queue
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import numpy as np
from PIL import Image

from .errors import ContractError, RegenforgeError
from .manifest import SampleRecord, Source
from .taxonomy import SemanticMask

__all__ = [
    "WindowSpec",
    "Window",
    "tile",
    "WindowClassifier",
    "StubClassifier",
    "SubprocessClassifier",
    "ClassifierProtocolError",
    "generate_pseudo_label",
    "batch_run",
    "BatchRunResult",
]


class ClassifierProtocolError(RegenforgeError):
    """The window classifier violated the plugin contract."""


@dataclass(frozen=True)
class WindowSpec:
    size: int = 224
    stride: int = 112
    pad_policy: str = "clamp_last_window"  # or "reflect"

    def __post_init__(self):
        if not 1 <= self.stride <= self.size:
            raise ContractError(f"stride must be in 1..size, got {self.stride}/{self.size}")
        if self.pad_policy not in ("clamp_last_window", "reflect"):
            raise ContractError(f"unknown pad policy {self.pad_policy!r}")


@dataclass(frozen=True)
class Window:
    x: int
    y: int
    w: int
    h: int


def _axis_offsets(extent: int, size: int, stride: int) -> list[int]:
    if extent < size:
        raise ContractError(f"extent {extent} smaller than window size {size}")
    offsets = list(range(0, extent - size + 1, stride))
    if offsets[-1] != extent - size:  # clamp the last window to the edge
        offsets.append(extent - size)
    return offsets


def tile(width: int, height: int, spec: WindowSpec) -> list[Window]:
    """Window rectangles covering every pixel; final row/column re-anchored."""
    xs = _axis_offsets(width, spec.size, spec.stride)
    ys = _axis_offsets(height, spec.size, spec.stride)
    return [Window(x=x, y=y, w=spec.size, h=spec.size) for y in ys for x in xs]


class WindowClassifier(Protocol):
    n_classes: int

    def predict_window(self, window: np.ndarray, x: int, y: int) -> np.ndarray: ...


@dataclass
class StubClassifier:
    """Rule-driven classifier for tests and demos.

    rules: "constant" (always one class), "quadrant" (class from the
    window-centroid quadrant of the full image), or "mean_threshold"
    (class by mean intensity split).
    """

    n_classes: int
    rule: str = "constant"
    constant_class: int = 0
    quadrant_classes: tuple[int, int, int, int] = (0, 1, 2, 3)
    threshold: float = 127.5
    below_class: int = 0
    above_class: int = 1
    image_size: tuple[int, int] | None = None  # (width, height), set per image
    fail_first_n: int = 0  # test hook: fail this many calls before working

    def _one_hot(self, cid: int) -> np.ndarray:
        probs = np.zeros(self.n_classes, dtype=np.float64)
        probs[cid] = 1.0
        return probs

    def predict_window(self, window: np.ndarray, x: int, y: int) -> np.ndarray:
        if self.fail_first_n > 0:
            self.fail_first_n -= 1
            raise ClassifierProtocolError("stub transient failure")
        if self.rule == "constant":
            return self._one_hot(self.constant_class)
        if self.rule == "quadrant":
            if self.image_size is None:
                raise ContractError("quadrant rule needs image_size")
            cx = x + window.shape[1] / 2
            cy = y + window.shape[0] / 2
            qx = 0 if cx < self.image_size[0] / 2 else 1
            qy = 0 if cy < self.image_size[1] / 2 else 1
            return self._one_hot(self.quadrant_classes[2 * qy + qx])
        if self.rule == "mean_threshold":
            cid = self.below_class if window.mean() <= self.threshold else self.above_class
            return self._one_hot(cid)
        raise ContractError(f"unknown stub rule {self.rule!r}")


class SubprocessClassifier:
    """Window classifier hosted in a subprocess.

    Wire protocol, one JSON record per line over stdin/stdout:
    handshake from the plugin: {"hello": {"classes": k}};
    request: {"id": ..., "png_b64": ...};
    response: {"id": ..., "probs": [k floats summing to 1 +/- 1e-4]}.
    """

    def __init__(self, command: list[str] | str, timeout_s: float = 30.0):
        self.timeout_s = timeout_s
        if isinstance(command, str):
            import shlex

            command = shlex.split(command)
        self._proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        hello = self._read_record()
        if "hello" not in hello or "classes" not in hello["hello"]:
            raise ClassifierProtocolError(f"bad handshake: {hello}")
        self.n_classes = int(hello["hello"]["classes"])
        self._next_id = 0

    def _pump(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _read_record(self) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout_s)
        except queue.Empty:
            raise ClassifierProtocolError(
                f"classifier silent for {self.timeout_s}s"
            ) from None
        if line is None:
            raise ClassifierProtocolError("classifier closed its output stream")
        try:
            return json.loads(line)
        except json.JSONDecodeError as e:
            raise ClassifierProtocolError(f"classifier sent invalid JSON: {line!r}") from e

    def predict_window(self, window: np.ndarray, x: int, y: int) -> np.ndarray:
        buf = io.BytesIO()
        Image.fromarray(window.astype(np.uint8)).save(buf, format="PNG")
        req_id = self._next_id
        self._next_id += 1
        record = {"id": req_id, "png_b64": base64.b64encode(buf.getvalue()).decode()}
        try:
            self._proc.stdin.write(json.dumps(record) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError) as e:
            raise ClassifierProtocolError("classifier stdin closed") from e
        resp = self._read_record()
        if resp.get("id") != req_id:
            raise ClassifierProtocolError(
                f"response id {resp.get('id')} does not match request {req_id}"
            )
        probs = np.asarray(resp.get("probs", []), dtype=np.float64)
        if probs.shape != (self.n_classes,):
            raise ClassifierProtocolError(
                f"probability vector of length {probs.size}, expected {self.n_classes}"
            )
        if not np.isfinite(probs).all():
            raise ClassifierProtocolError("non-finite probabilities")
        if abs(float(probs.sum()) - 1.0) > 1e-4:
            raise ClassifierProtocolError(f"probabilities sum to {float(probs.sum())}")
        return probs

    def close(self):
        if self._proc.stdin:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _reflect_pad(image: np.ndarray, size: int) -> tuple[np.ndarray, int, int]:
    h, w = image.shape[:2]
    pad_h = max(0, size - h)
    pad_w = max(0, size - w)
    if pad_h >= h or pad_w >= w:
        raise ContractError(
            f"image {w}x{h} too small to reflect-pad to {size}x{size}"
        )
    padded = np.pad(image, ((0, pad_h), (0, pad_w), (0, 0)), mode="reflect")
    return padded, pad_h, pad_w


def generate_pseudo_label(
    image: np.ndarray,
    classifier,
    spec: WindowSpec | None = None,
) -> SemanticMask:
    """Classify sliding windows and stitch a full-image mask.

    Every window's probability vector is added over its pixels; the mask is
    the argmax of the per-pixel mean. A window that fails classification is
    retried once, then the whole run fails naming the window.
    """
    spec = spec or WindowSpec()
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ContractError(f"expected an RGB image, got shape {img.shape}")

    pad_h = pad_w = 0
    if spec.pad_policy == "reflect" and (
        img.shape[0] < spec.size or img.shape[1] < spec.size
    ):
        img, pad_h, pad_w = _reflect_pad(img, spec.size)

    h, w = img.shape[:2]
    if hasattr(classifier, "image_size"):  # size-aware stubs get the current dims
        classifier.image_size = (w, h)
    windows = tile(w, h, spec)
    k = classifier.n_classes
    scores = np.zeros((k, h, w), dtype=np.float64)
    coverage = np.zeros((h, w), dtype=np.int64)

    for win in windows:
        patch = img[win.y : win.y + win.h, win.x : win.x + win.w]
        try:
            probs = classifier.predict_window(patch, win.x, win.y)
        except ClassifierProtocolError:
            try:
                probs = classifier.predict_window(patch, win.x, win.y)  # one retry
            except ClassifierProtocolError as e:
                raise ClassifierProtocolError(
                    f"window at ({win.x}, {win.y}) failed twice: {e}"
                ) from e
        scores[:, win.y : win.y + win.h, win.x : win.x + win.w] += probs[:, None, None]
        coverage[win.y : win.y + win.h, win.x : win.x + win.w] += 1

    if coverage.min() < 1:
        raise RegenforgeError("window set left pixels uncovered")  # unreachable by tiling
    mean = scores / coverage
    mask = np.argmax(mean, axis=0).astype(np.uint8)  # first max = lowest class id
    if pad_h or pad_w:
        mask = mask[: h - pad_h, : w - pad_w]
    return SemanticMask(data=mask, ignore_index=255)


@dataclass(frozen=True)
class BatchRunResult:
    new_records: tuple[SampleRecord, ...]
    failures: tuple[tuple[str, str], ...]  # (record id, reason)
    n_windows: int


def batch_run(
    records: list[SampleRecord],
    classifier_factory: Callable[[], object],
    spec: WindowSpec,
    out_dir: str | Path,
    parallelism: int = 1,
) -> BatchRunResult:
    """Pseudo-label every record's image; per-image failures are quarantined.

    ``classifier_factory`` builds one classifier per worker so subprocess
    plugins are not shared across threads. Mask files are written as
    ``<id>_pseudo.png``; reruns produce byte-identical outputs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not records:
        return BatchRunResult(new_records=(), failures=(), n_windows=0)

    def one(record: SampleRecord, classifier) -> tuple[SampleRecord, int]:
        img = np.asarray(Image.open(record.image_path).convert("RGB"))
        mask = generate_pseudo_label(img, classifier, spec)
        mask_path = out_dir / f"{record.id}_pseudo.png"
        mask.save_png(mask_path)
        windows = len(tile(max(img.shape[1], spec.size), max(img.shape[0], spec.size), spec))
        return (
            SampleRecord(
                id=f"{record.id}_pseudo",
                source=Source.PSEUDO_LABELLED,
                image_path=record.image_path,
                mask_path=str(mask_path),
                location=record.location,
                site_name=record.site_name,
                sensor=record.sensor,
                gsd_cm=record.gsd_cm,
            ),
            windows,
        )

    new_records: list[SampleRecord] = []
    failures: list[tuple[str, str]] = []
    n_windows = 0

    def run_shard(shard: list[SampleRecord]) -> tuple[list, list, int]:
        classifier = classifier_factory()
        done, failed, windows = [], [], 0
        try:
            for record in shard:
                try:
                    new_record, n = one(record, classifier)
                    done.append(new_record)
                    windows += n
                except (RegenforgeError, OSError) as e:
                    failed.append((record.id, str(e)))
        finally:
            close = getattr(classifier, "close", None)
            if close:
                close()
        return done, failed, windows

    if parallelism <= 1 or len(records) <= 1:
        shards = [records]
    else:
        shards = [records[i::parallelism] for i in range(parallelism)]
        shards = [s for s in shards if s]
    with ThreadPoolExecutor(max_workers=len(shards)) as pool:
        for done, failed, windows in pool.map(run_shard, shards):
            new_records.extend(done)
            failures.extend(failed)
            n_windows += windows

    new_records.sort(key=lambda r: r.id)
    failures.sort()
    return BatchRunResult(
        new_records=tuple(new_records), failures=tuple(failures), n_windows=n_windows
    )
