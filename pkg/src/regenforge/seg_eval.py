"""Segmentation scoring: confusion matrices, F1/IoU/accuracy, fold pooling.

Ground-truth ignore pixels are excluded from scoring. A prediction of
ignore_index on a scored pixel is a reject: it lands in a dedicated
per-class reject column and counts as a false negative of the
ground-truth class, so abstaining never helps a model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ContractError
from .taxonomy import SemanticMask


class Scoring(str, Enum):
    PRESENT_IN_GT_OR_PRED = "present_in_gt_or_pred"
    ALL_CLASSES = "all_classes"


@dataclass
class ConfusionMatrix:
    """k x k counts (rows = ground truth, columns = prediction) plus rejects."""

    n_classes: int
    counts: np.ndarray = field(default=None, repr=False)
    reject: np.ndarray = field(default=None, repr=False)  # pred == ignore, per gt class
    ignored_pixels: int = 0

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((self.n_classes, self.n_classes), dtype=np.int64)
        if self.reject is None:
            self.reject = np.zeros(self.n_classes, dtype=np.int64)
        if self.counts.shape != (self.n_classes, self.n_classes):
            raise ContractError("confusion matrix shape does not match n_classes")

    @property
    def total(self) -> int:
        return int(self.counts.sum() + self.reject.sum())

    def copy(self) -> "ConfusionMatrix":
        return ConfusionMatrix(
            n_classes=self.n_classes,
            counts=self.counts.copy(),
            reject=self.reject.copy(),
            ignored_pixels=self.ignored_pixels,
        )

    def row_normalized(self) -> np.ndarray:
        rows = self.counts.sum(axis=1, keepdims=True) + self.reject[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(rows > 0, self.counts / rows, 0.0)
        return out


@dataclass(frozen=True)
class MetricsReport:
    """Scores in percent. macro_f1 is the mean of per_class_f1 over scored classes."""

    macro_f1: float
    miou: float
    pixel_accuracy: float
    per_class_f1: dict[int, float]
    per_class_iou: dict[int, float]
    n_scored_classes: int

    def formatted(self, names: dict[int, str] | None = None) -> str:
        lines = [
            f"macro F1        {self.macro_f1:.2f}",
            f"mIoU            {self.miou:.2f}",
            f"pixel accuracy  {self.pixel_accuracy:.2f}",
            f"scored classes  {self.n_scored_classes}",
        ]
        for cid in sorted(self.per_class_f1):
            label = names.get(cid, str(cid)) if names else str(cid)
            lines.append(f"  F1[{label}] {self.per_class_f1[cid]:.2f}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RunAggregate:
    mean: dict[str, float]
    std: dict[str, float]
    n_runs: int


def accumulate(
    cm: ConfusionMatrix, pred: SemanticMask, gt: SemanticMask, ignore_index: int = 255
) -> ConfusionMatrix:
    """Add one pred/gt pair into the matrix (in place; also returned)."""
    if pred.data.shape != gt.data.shape:
        raise ContractError(
            f"pred {pred.data.shape} and gt {gt.data.shape} dimensions differ"
        )
    g = gt.data.ravel().astype(np.int64)
    p = pred.data.ravel().astype(np.int64)
    scored = g != ignore_index
    cm.ignored_pixels += int((~scored).sum())
    g, p = g[scored], p[scored]
    if np.any(g >= cm.n_classes):
        raise ContractError("gt contains class ids outside the matrix")
    rejected = p == ignore_index
    if rejected.any():
        cm.reject += np.bincount(g[rejected], minlength=cm.n_classes)
        g, p = g[~rejected], p[~rejected]
    if np.any(p >= cm.n_classes):
        raise ContractError("pred contains class ids outside the matrix")
    if g.size:
        flat = np.bincount(g * cm.n_classes + p, minlength=cm.n_classes**2)
        cm.counts += flat.reshape(cm.n_classes, cm.n_classes)
    return cm


def metrics(cm: ConfusionMatrix, scoring: Scoring = Scoring.PRESENT_IN_GT_OR_PRED) -> MetricsReport:
    """Per-class F1/IoU and macro scores from a confusion matrix."""
    total = cm.total
    if total <= 0:
        raise ContractError("metrics on an empty confusion matrix")
    tp = np.diag(cm.counts).astype(float)
    fp = cm.counts.sum(axis=0) - tp
    fn = cm.counts.sum(axis=1) - tp + cm.reject

    support = tp + fp + fn
    if scoring is Scoring.PRESENT_IN_GT_OR_PRED:
        scored = support > 0
    else:
        scored = np.ones(cm.n_classes, dtype=bool)
    if not scored.any():
        raise ContractError("no scored classes")

    with np.errstate(invalid="ignore", divide="ignore"):
        f1 = np.where(support > 0, 2 * tp / (2 * tp + fp + fn), 0.0)
        iou = np.where(support > 0, tp / support, 0.0)

    per_f1 = {int(c): float(100 * f1[c]) for c in np.flatnonzero(scored)}
    per_iou = {int(c): float(100 * iou[c]) for c in np.flatnonzero(scored)}
    return MetricsReport(
        macro_f1=float(100 * f1[scored].mean()),
        miou=float(100 * iou[scored].mean()),
        pixel_accuracy=float(100 * tp.sum() / total),
        per_class_f1=per_f1,
        per_class_iou=per_iou,
        n_scored_classes=int(scored.sum()),
    )


def pooled_eval(
    fold_results: list[ConfusionMatrix], scoring: Scoring = Scoring.PRESENT_IN_GT_OR_PRED
) -> MetricsReport:
    """Sum fold matrices element-wise, then score once on the pooled matrix."""
    if not fold_results:
        raise ContractError("pooled_eval requires at least one confusion matrix")
    k = fold_results[0].n_classes
    if any(m.n_classes != k for m in fold_results):
        raise ContractError("fold matrices built under different taxonomies")
    pooled = ConfusionMatrix(n_classes=k)
    for m in fold_results:
        pooled.counts += m.counts
        pooled.reject += m.reject
        pooled.ignored_pixels += m.ignored_pixels
    return metrics(pooled, scoring)


def aggregate_runs(reports: list[MetricsReport]) -> RunAggregate:
    """Mean and population std of each metric over repeated runs."""
    if not reports:
        raise ContractError("aggregate_runs requires at least one report")
    values = {
        "macro_f1": [r.macro_f1 for r in reports],
        "miou": [r.miou for r in reports],
        "pixel_accuracy": [r.pixel_accuracy for r in reports],
    }
    shared = set(reports[0].per_class_f1)
    for r in reports[1:]:
        shared &= set(r.per_class_f1)
    for cid in sorted(shared):
        values[f"f1_class_{cid}"] = [r.per_class_f1[cid] for r in reports]
    mean = {k: float(np.mean(v)) for k, v in values.items()}
    std = {k: float(np.std(v)) for k, v in values.items()}
    return RunAggregate(mean=mean, std=std, n_runs=len(reports))


def format_matrix(cm: ConfusionMatrix, names: dict[int, str] | None = None) -> str:
    """Counts plus row-normalized matrix, one block each."""
    names = names or {}
    k = cm.n_classes
    labels = [names.get(i, str(i)) for i in range(k)]
    width = max(6, max(len(s) for s in labels) + 1)
    head = " " * width + "".join(f"{s:>{width}}" for s in labels) + f"{'reject':>{width}}"
    lines = ["confusion matrix (rows = ground truth):", head]
    for i in range(k):
        row = "".join(f"{int(v):>{width}d}" for v in cm.counts[i])
        lines.append(f"{labels[i]:>{width}}" + row + f"{int(cm.reject[i]):>{width}d}")
    lines.append("")
    lines.append("row-normalized:")
    norm = cm.row_normalized()
    lines.append(" " * width + "".join(f"{s:>{width}}" for s in labels))
    for i in range(k):
        lines.append(f"{labels[i]:>{width}}" + "".join(f"{v:>{width}.3f}" for v in norm[i]))
    lines.append(f"ignored pixels: {cm.ignored_pixels}")
    return "\n".join(lines) + "\n"
