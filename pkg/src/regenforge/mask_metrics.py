"""Structural statistics over semantic masks.

The complexity score for a mask is the mean inverse isoperimetric
quotient: with n distinct classes present, sum L_c^2 / A_c over classes
and divide by 4*pi*n, where A_c is the class pixel count and L_c its
boundary length.

Perimeter here is the axis-aligned boundary edge count (Manhattan
perimeter): every unit edge where a class pixel meets a different class,
an ignore pixel, or the image border. Under this definition a full-frame
square scores exactly 4/pi, and the score is invariant under integer
upscaling (L scales by k, A by k^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import ndimage

from .errors import ContractError
from .taxonomy import SemanticMask

_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class MaskStats:
    per_class_pixels: dict[int, int]
    per_class_regions: dict[int, int]
    mipq: float
    n_present_classes: int


@dataclass(frozen=True)
class DatasetMaskStats:
    mean_mipq: float
    std_mipq: float
    mean_instances: float
    n_masks: int


def _present_classes(mask: SemanticMask) -> list[int]:
    ids = np.unique(mask.data)
    return [int(i) for i in ids if int(i) != mask.ignore_index]


def boundary_length(binary: np.ndarray) -> int:
    """Manhattan perimeter of a binary region: unit edges against anything else.

    The image border counts as boundary; interior edges count once per
    side-adjacent pair where exactly the region side is set.
    """
    b = np.asarray(binary, dtype=bool)
    edges = int(b[0, :].sum() + b[-1, :].sum() + b[:, 0].sum() + b[:, -1].sum())
    edges += int(np.count_nonzero(b[:, 1:] != b[:, :-1]))
    edges += int(np.count_nonzero(b[1:, :] != b[:-1, :]))
    return edges


def mipq(mask: SemanticMask) -> float:
    """Mean inverse isoperimetric quotient of a mask; higher = more intricate."""
    present = _present_classes(mask)
    if not present:
        raise ContractError("mipq requires at least one non-ignore pixel")
    total = 0.0
    for cid in present:
        binary = mask.data == cid
        area = float(np.count_nonzero(binary))
        length = float(boundary_length(binary))
        total += length * length / area
    return total / (4.0 * math.pi * len(present))


def instance_count(mask: SemanticMask, connectivity: int = 4) -> dict[int, int]:
    """Connected components per class under 4- or 8-connectivity."""
    if connectivity not in (4, 8):
        raise ContractError(f"connectivity must be 4 or 8, got {connectivity}")
    struct = _STRUCT_4 if connectivity == 4 else _STRUCT_8
    counts = {}
    for cid in _present_classes(mask):
        _, n = ndimage.label(mask.data == cid, structure=struct)
        counts[cid] = int(n)
    return counts


def mask_stats(mask: SemanticMask, connectivity: int = 4) -> MaskStats:
    present = _present_classes(mask)
    pixels = {cid: int(np.count_nonzero(mask.data == cid)) for cid in present}
    return MaskStats(
        per_class_pixels=pixels,
        per_class_regions=instance_count(mask, connectivity),
        mipq=mipq(mask),
        n_present_classes=len(present),
    )


def class_distribution(masks: Iterable[SemanticMask]) -> dict[int, float]:
    """Pixel proportion per class over all non-ignore pixels of all masks."""
    totals: dict[int, int] = {}
    n_masks = 0
    for mask in masks:
        n_masks += 1
        ids, counts = np.unique(mask.data, return_counts=True)
        for cid, count in zip(ids, counts):
            if int(cid) == mask.ignore_index:
                continue
            totals[int(cid)] = totals.get(int(cid), 0) + int(count)
    if n_masks == 0:
        raise ContractError("class_distribution requires at least one mask")
    grand = sum(totals.values())
    if grand == 0:
        raise ContractError("all pixels are ignore; no distribution to compute")
    return {cid: count / grand for cid, count in sorted(totals.items())}


def dataset_mask_stats(masks: Iterable[SemanticMask], connectivity: int = 4) -> DatasetMaskStats:
    """Mean/std of mIPQ plus mean instance count; std is the population form."""
    mipqs = []
    instances = []
    for mask in masks:
        stats = mask_stats(mask, connectivity)
        mipqs.append(stats.mipq)
        instances.append(sum(stats.per_class_regions.values()))
    if not mipqs:
        raise ContractError("dataset_mask_stats requires at least one mask")
    arr = np.array(mipqs, dtype=float)
    return DatasetMaskStats(
        mean_mipq=float(arr.mean()),
        std_mipq=float(arr.std()),  # population std: masks are the whole set reported
        mean_instances=float(np.mean(instances)),
        n_masks=len(mipqs),
    )


def format_stats_table(rows: list[tuple[str, DatasetMaskStats]]) -> str:
    """Plain-text complexity table: dataset, mask count, mIPQ mean +/- std."""
    lines = [
        f"{'Dataset':<18} {'Masks':>7} {'mIPQ':>16} {'Instances/mask':>15}",
        "-" * 59,
    ]
    for label, s in rows:
        lines.append(
            f"{label:<18} {s.n_masks:>7d} {s.mean_mipq:>8.1f} ± {s.std_mipq:<5.1f} "
            f"{s.mean_instances:>14.1f}"
        )
    return "\n".join(lines) + "\n"
