"""Overlap and classification metrics between predicted and true masks.

All metrics operate on 3D voxel sets: a region selected from a stack of
per-slice label masks (slices x rows x cols) at one time point. Dice is
2|X∩Y|/(|X|+|Y|); overlap is the Jaccard index |X∩Y|/|X∪Y|. Both
define the empty-vs-empty comparison as 1 (perfect agreement about
absence) and flag it with BothEmptyWarning so it remains auditable —
apical and basal slices are legitimately empty.

Classification counts treat the selected region as the positive class
over every voxel of the stack. Ratios whose denominator is zero are
reported as None (undefined), never as 0: an empty prediction has no
precision, it does not have bad precision.
"""

from __future__ import annotations

import csv
import warnings
from contextlib import nullcontext
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .volumetrics import Region, region_codes

__all__ = [
    "BothEmptyWarning",
    "VoxelSet",
    "ConfusionCounts",
    "dice",
    "overlap",
    "confusion",
    "MetricRow",
    "write_metrics_csv",
    "mean_std",
]


class BothEmptyWarning(UserWarning):
    """Both voxel sets were empty; the metric defaulted to 1."""


@dataclass(frozen=True)
class VoxelSet:
    """A region's voxels within one 3D stack of label masks."""

    masks: tuple
    region: Region

    def __post_init__(self) -> None:
        if len(self.masks) == 0:
            raise ValueError("a voxel set needs at least one slice")
        dims = {(m.height, m.width) for m in self.masks}
        if len(dims) > 1:
            raise ValueError(f"slices disagree on dimensions: {sorted(dims)}")
        object.__setattr__(self, "masks", tuple(self.masks))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (len(self.masks), self.masks[0].height, self.masks[0].width)

    def members(self) -> np.ndarray:
        """Boolean (slices, rows, cols) array of region membership."""
        codes = region_codes(self.region)
        labels = np.stack([m.labels for m in self.masks])
        hit = labels == codes[0]
        for code in codes[1:]:
            hit |= labels == code
        return hit


def _paired_members(x: VoxelSet, y: VoxelSet) -> tuple[np.ndarray, np.ndarray]:
    if x.shape != y.shape:
        raise ValueError(f"stack dimensions differ: {x.shape} vs {y.shape}")
    return x.members(), y.members()


def dice(x: VoxelSet, y: VoxelSet) -> float:
    """Dice similarity 2|X∩Y|/(|X|+|Y|); 1 (with warning) if both empty."""
    mx, my = _paired_members(x, y)
    nx = int(np.count_nonzero(mx))
    ny = int(np.count_nonzero(my))
    if nx + ny == 0:
        warnings.warn("both voxel sets empty; dice = 1", BothEmptyWarning, stacklevel=2)
        return 1.0
    inter = int(np.count_nonzero(mx & my))
    return 2.0 * inter / (nx + ny)


def overlap(x: VoxelSet, y: VoxelSet) -> float:
    """Jaccard index |X∩Y|/|X∪Y|; 1 (with warning) if both empty."""
    mx, my = _paired_members(x, y)
    union = int(np.count_nonzero(mx | my))
    if union == 0:
        warnings.warn("both voxel sets empty; overlap = 1", BothEmptyWarning, stacklevel=2)
        return 1.0
    inter = int(np.count_nonzero(mx & my))
    return inter / union


@dataclass(frozen=True)
class ConfusionCounts:
    """Voxel-level confusion counts of prediction X against truth Y.

    Derived ratios return None when their denominator is zero.
    """

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self) -> Optional[float]:
        return (self.tp + self.tn) / self.total if self.total else None

    @property
    def precision(self) -> Optional[float]:
        d = self.tp + self.fp
        return self.tp / d if d else None

    @property
    def recall(self) -> Optional[float]:
        d = self.tp + self.fn
        return self.tp / d if d else None

    @property
    def specificity(self) -> Optional[float]:
        d = self.tn + self.fp
        return self.tn / d if d else None


def confusion(x: VoxelSet, y: VoxelSet, total_voxels: Optional[int] = None) -> ConfusionCounts:
    """Confusion counts with ``x`` as prediction and ``y`` as truth.

    ``total_voxels`` defaults to the full stack size; passing a larger
    universe only inflates the true-negative count.
    """
    mx, my = _paired_members(x, y)
    tp = int(np.count_nonzero(mx & my))
    fp = int(np.count_nonzero(mx & ~my))
    fn = int(np.count_nonzero(~mx & my))
    stack_total = mx.size
    if total_voxels is None:
        total_voxels = stack_total
    elif total_voxels < tp + fp + fn:
        raise ValueError(
            f"total_voxels={total_voxels} smaller than |X∪Y|={tp + fp + fn}"
        )
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=total_voxels - tp - fp - fn)


@dataclass(frozen=True)
class MetricRow:
    """One case/phase/region evaluation, ready for CSV."""

    case_id: str
    phase: str
    region: Region
    dice: float
    overlap: float
    accuracy: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    specificity: Optional[float]


_CSV_FIELDS = (
    "case_id",
    "phase",
    "region",
    "dice",
    "overlap",
    "accuracy",
    "precision",
    "recall",
    "specificity",
)


def _cell(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.6f}"


def write_metrics_csv(rows: Sequence[MetricRow], path) -> None:
    """One row per (case, phase, region); undefined ratios left empty.

    ``path`` may also be an open text stream.
    """
    sink = nullcontext(path) if hasattr(path, "write") else open(
        path, "w", newline="", encoding="utf-8"
    )
    with sink as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_FIELDS)
        for r in rows:
            writer.writerow(
                [r.case_id, r.phase, r.region.value]
                + [_cell(v) for v in (r.dice, r.overlap, r.accuracy, r.precision, r.recall, r.specificity)]
            )


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation, for mean±std summaries."""
    arr = np.asarray([v for v in values if v is not None], dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no defined values to summarize")
    return float(arr.mean()), float(arr.std())
