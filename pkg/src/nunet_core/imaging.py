"""Core image, mask and cine-stack value types plus deterministic resizing.

Conventions used throughout the package:

* Pixel ``(i, j)`` means ``(row, column)`` with index origin 0.
* Intensities are stored as float64 regardless of the on-disk datatype;
  label masks are stored as uint8 categorical codes.
* ``pixel_spacing`` is ``(dx, dy)`` in mm, where ``dx`` is the column
  spacing (along image width) and ``dy`` the row spacing (along height).

All types are immutable value objects: their pixel buffers are marked
read-only at construction, so instances can be shared freely between
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "BACKGROUND",
    "LV_POOL",
    "LV_MYO",
    "RV_POOL",
    "RV_MYO",
    "LABEL_CODES",
    "Image2D",
    "LabelMask",
    "CineStack",
    "MaskCine",
    "Spacing",
    "resize_to",
    "resize_mask_to",
]

# Categorical codes of a LabelMask.
BACKGROUND = 0
LV_POOL = 1
LV_MYO = 2
RV_POOL = 3
RV_MYO = 4
LABEL_CODES = (BACKGROUND, LV_POOL, LV_MYO, RV_POOL, RV_MYO)


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    if out is arr and arr.flags.writeable:
        out = arr.copy()
    out.flags.writeable = False
    return out


def _check_spacing_pair(spacing: tuple[float, float]) -> tuple[float, float]:
    dx, dy = float(spacing[0]), float(spacing[1])
    if not (dx > 0 and dy > 0):
        raise ValueError(f"pixel spacing must be positive, got ({dx}, {dy})")
    return (dx, dy)


@dataclass(frozen=True)
class Image2D:
    """A single 2D image: float64 intensities plus physical pixel spacing.

    Parameters
    ----------
    pixels : ndarray, shape (height, width)
        Row-major scalar intensities; converted to read-only float64.
    pixel_spacing : (dx, dy)
        Physical size of one pixel in mm.
    """

    pixels: np.ndarray
    pixel_spacing: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be 2D with positive dims, got shape {arr.shape}")
        object.__setattr__(self, "pixels", _freeze(arr))
        object.__setattr__(self, "pixel_spacing", _check_spacing_pair(self.pixel_spacing))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class LabelMask:
    """Per-pixel categorical map over the cardiac label codes 0..4."""

    labels: np.ndarray
    pixel_spacing: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self) -> None:
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask must be 2D with positive dims, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.array_equal(arr, np.rint(arr)):
                raise ValueError("mask labels must be integral")
        if arr.size and (arr.min() < 0 or arr.max() > max(LABEL_CODES)):
            raise ValueError(
                f"mask codes must lie in {LABEL_CODES}, got range [{arr.min()}, {arr.max()}]"
            )
        object.__setattr__(self, "labels", _freeze(arr.astype(np.uint8)))
        object.__setattr__(self, "pixel_spacing", _check_spacing_pair(self.pixel_spacing))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def codes_present(self) -> frozenset[int]:
        return frozenset(int(c) for c in np.unique(self.labels))


@dataclass(frozen=True)
class Spacing:
    """Voxel spacing: in-plane (dx, dy) mm/pixel, dz mm/slice, dt frames/cycle.

    ``dz`` is the inter-slice spacing, i.e. slice thickness plus gap.
    ``dt`` is informational only and never enters volume arithmetic.
    """

    dx: float
    dy: float
    dz: float
    dt: float = 0.0

    def __post_init__(self) -> None:
        if not (self.dx > 0 and self.dy > 0 and self.dz > 0):
            raise ValueError(f"dx, dy, dz must be positive, got ({self.dx}, {self.dy}, {self.dz})")

    @property
    def voxel_volume_mm3(self) -> float:
        return self.dx * self.dy * self.dz


def _check_grid(grid: Sequence[Sequence], what: str) -> tuple[tuple, ...]:
    rows = tuple(tuple(r) for r in grid)
    if len(rows) < 1 or any(len(r) < 1 for r in rows):
        raise ValueError(f"{what} grid must have at least one slice and one frame")
    n_frames = len(rows[0])
    if any(len(r) != n_frames for r in rows):
        raise ValueError(f"{what} grid is ragged: slices disagree on frame count")
    return rows


@dataclass(frozen=True)
class CineStack:
    """Short-axis cine stack: grid[slice][frame] of Image2D with slice geometry."""

    images: Sequence[Sequence[Image2D]]
    slice_thickness: float
    slice_gap: float = 0.0

    def __post_init__(self) -> None:
        rows = _check_grid(self.images, "image")
        first = rows[0][0]
        for r in rows:
            for img in r:
                if (img.height, img.width) != (first.height, first.width):
                    raise ValueError("all cine images must share dimensions")
                if img.pixel_spacing != first.pixel_spacing:
                    raise ValueError("all cine images must share pixel spacing")
        if not self.slice_thickness > 0:
            raise ValueError("slice_thickness must be positive")
        if self.slice_gap < 0:
            raise ValueError("slice_gap must be non-negative")
        object.__setattr__(self, "images", rows)

    @property
    def n_slices(self) -> int:
        return len(self.images)

    @property
    def n_frames(self) -> int:
        return len(self.images[0])

    def spacing(self) -> Spacing:
        dx, dy = self.images[0][0].pixel_spacing
        return Spacing(dx, dy, self.slice_thickness + self.slice_gap, float(self.n_frames))


@dataclass(frozen=True)
class MaskCine:
    """Grid[slice][frame] of LabelMask mirroring CineStack geometry."""

    masks: Sequence[Sequence[LabelMask]]
    slice_thickness: float
    slice_gap: float = 0.0

    def __post_init__(self) -> None:
        rows = _check_grid(self.masks, "mask")
        first = rows[0][0]
        for r in rows:
            for m in r:
                if (m.height, m.width) != (first.height, first.width):
                    raise ValueError("all cine masks must share dimensions")
                if m.pixel_spacing != first.pixel_spacing:
                    raise ValueError("all cine masks must share pixel spacing")
        if not self.slice_thickness > 0:
            raise ValueError("slice_thickness must be positive")
        if self.slice_gap < 0:
            raise ValueError("slice_gap must be non-negative")
        object.__setattr__(self, "masks", rows)

    @property
    def n_slices(self) -> int:
        return len(self.masks)

    @property
    def n_frames(self) -> int:
        return len(self.masks[0])

    def frame(self, f: int) -> tuple[LabelMask, ...]:
        return tuple(row[f] for row in self.masks)

    def spacing(self) -> Spacing:
        dx, dy = self.masks[0][0].pixel_spacing
        return Spacing(dx, dy, self.slice_thickness + self.slice_gap, float(self.n_frames))


def _corner_aligned_coords(n_out: int, n_in: int) -> np.ndarray:
    """Source coordinates so that output corner pixels coincide with input corners."""
    if n_in == 1:
        return np.zeros(n_out, dtype=np.float64)
    if n_out == 1:
        return np.full(1, (n_in - 1) / 2.0, dtype=np.float64)
    return np.arange(n_out, dtype=np.float64) * ((n_in - 1) / (n_out - 1))


def _check_target(target_w: int, target_h: int) -> None:
    if target_w < 1 or target_h < 1:
        raise ValueError(f"target dimensions must be >= 1, got {target_w}x{target_h}")


def resize_to(img: Image2D, target_w: int, target_h: int) -> Image2D:
    """Bilinear, corner-aligned resize preserving the physical extent.

    Pixel spacing is rescaled by (width/target_w, height/target_h) so that
    width*dx and height*dy stay constant up to floating rounding. An
    identity target returns a bit-identical image.
    """
    _check_target(target_w, target_h)
    h, w = img.height, img.width
    if (target_w, target_h) == (w, h):
        return img

    rows = _corner_aligned_coords(target_h, h)
    cols = _corner_aligned_coords(target_w, w)

    r0 = np.clip(np.floor(rows).astype(np.intp), 0, max(h - 2, 0))
    c0 = np.clip(np.floor(cols).astype(np.intp), 0, max(w - 2, 0))
    fr = rows - r0
    fc = cols - c0
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)

    px = img.pixels
    top = px[np.ix_(r0, c0)] * (1 - fc)[None, :] + px[np.ix_(r0, c1)] * fc[None, :]
    bot = px[np.ix_(r1, c0)] * (1 - fc)[None, :] + px[np.ix_(r1, c1)] * fc[None, :]
    out = top * (1 - fr)[:, None] + bot * fr[:, None]

    dx, dy = img.pixel_spacing
    return Image2D(out, (dx * w / target_w, dy * h / target_h))


def resize_mask_to(mask: LabelMask, target_w: int, target_h: int) -> LabelMask:
    """Nearest-neighbor resize of a label mask on the corner-aligned grid.

    Never introduces codes absent from the input (a pure gather).
    """
    _check_target(target_w, target_h)
    h, w = mask.height, mask.width
    if (target_w, target_h) == (w, h):
        return mask

    rows = _corner_aligned_coords(target_h, h)
    cols = _corner_aligned_coords(target_w, w)
    ri = np.clip(np.floor(rows + 0.5).astype(np.intp), 0, h - 1)
    ci = np.clip(np.floor(cols + 0.5).astype(np.intp), 0, w - 1)

    out = mask.labels[np.ix_(ri, ci)]
    dx, dy = mask.pixel_spacing
    return LabelMask(out, (dx * w / target_w, dy * h / target_h))
