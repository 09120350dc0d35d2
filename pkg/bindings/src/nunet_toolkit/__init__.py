"""Array-in, array-out bindings over the nunet-core toolkit.

Batch operations that accept any contiguous row-major buffer (anything
numpy can view zero-copy, copying only when it must) and hand the work
to nunet-core unchanged — no arithmetic is duplicated here, so results
are bit-identical to the native library and command-line paths for the
same (config, seed, index).

Shapes are ``(h, w)`` for a single plane or ``(n, h, w)`` for a batch;
images are floating point, masks small unsigned integers with label
codes 0..4. Shape or element-kind violations raise ValueError/TypeError
carrying the core library's message. Calls share no mutable state, so
concurrent use from host threads is safe.
"""

from __future__ import annotations

from typing import NamedTuple, Optional, Union

import numpy as np

from nunet_core.augment import (
    AffineParams,
    AugmentConfig,
    AugmentSpec,
    DeformCoeffs,
    config_from_mapping,
    sample_spec,
    warp_image,
    warp_mask,
)
from nunet_core.imaging import Image2D, LabelMask
from nunet_core.seg_metrics import VoxelSet, dice
from nunet_core.volumetrics import Region

__all__ = [
    "AffineParams",
    "AugmentConfig",
    "AugmentSpec",
    "DeformCoeffs",
    "Region",
    "AugmentBatchResult",
    "augment_batch",
    "dice_batch",
]

__version__ = "0.1.0"

_UNIT_SPACING = (1.0, 1.0)  # warps ignore physical spacing


class AugmentBatchResult(NamedTuple):
    """Outputs of augment_batch, leading dimension preserved."""

    images: np.ndarray
    masks: np.ndarray
    specs: tuple[AugmentSpec, ...]


def _as_batch(buffer, kind: str, name: str) -> tuple[np.ndarray, bool]:
    """(n, h, w) contiguous array view of ``buffer`` plus a was-2d flag."""
    arr = np.asarray(buffer)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
        squeezed = True
    elif arr.ndim == 3:
        squeezed = False
    else:
        raise ValueError(f"{name}: expected (h, w) or (n, h, w), got shape {arr.shape}")
    if kind == "float":
        if arr.dtype.kind not in "fiu":
            raise TypeError(f"{name}: expected numeric elements, got {arr.dtype}")
        arr = np.ascontiguousarray(arr, dtype=np.float64)
    else:
        if arr.dtype.kind != "u" or arr.dtype.itemsize > 2:
            raise TypeError(
                f"{name}: expected small unsigned integer elements, got {arr.dtype}"
            )
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
    return arr, squeezed


def augment_batch(
    images,
    masks,
    config: Optional[dict] = None,
    seed: int = 0,
    start_index: int = 0,
) -> AugmentBatchResult:
    """Augment paired image/mask planes deterministically.

    ``config`` takes the same keys as the command line's JSON config
    (epsilon, rotation_range, scale_min, scale_max, shear_range,
    translation_range, flip_prob_x, flip_prob_y); omitted keys fall back
    to the core defaults, unknown keys are rejected. Plane ``i`` is
    transformed by the AugmentSpec drawn for ``(seed, start_index + i)``, the
    stream the pipeline and command line draw from — note the command
    line additionally quantizes image files to float32 on write.

    Returns float64 images, uint8 masks, and the sampled spec records,
    with the input's leading dimension preserved.
    """
    image_arr, image_2d = _as_batch(images, "float", "images")
    mask_arr, mask_2d = _as_batch(masks, "uint", "masks")
    if image_arr.shape[0] != mask_arr.shape[0]:
        raise ValueError(
            f"images and masks disagree on batch size: "
            f"{image_arr.shape[0]} vs {mask_arr.shape[0]}"
        )
    if image_2d != mask_2d:
        raise ValueError("images and masks must have the same rank")

    cfg, _ = config_from_mapping(dict(config) if config else {}, source="config")
    out_images = []
    out_masks = []
    specs = []
    for i in range(image_arr.shape[0]):
        spec = sample_spec(cfg, seed=seed, sample_index=start_index + i)
        out_images.append(warp_image(Image2D(image_arr[i], _UNIT_SPACING), spec).pixels)
        out_masks.append(warp_mask(LabelMask(mask_arr[i], _UNIT_SPACING), spec).labels)
        specs.append(spec)

    images_out = np.stack(out_images)
    masks_out = np.stack(out_masks)
    if image_2d:
        images_out, masks_out = images_out[0], masks_out[0]
    return AugmentBatchResult(images=images_out, masks=masks_out, specs=tuple(specs))


def dice_batch(
    pred,
    truth,
    region: Union[Region, str] = Region.LV_ENDO,
) -> list[float]:
    """Dice coefficient per plane between predicted and true label masks.

    ``region`` selects which label codes count as foreground (a Region
    or its string value, e.g. "lv_endo"). Planes where both masks are
    empty score 1.0, matching the core convention.
    """
    pred_arr, pred_2d = _as_batch(pred, "uint", "pred")
    truth_arr, truth_2d = _as_batch(truth, "uint", "truth")
    if pred_arr.shape != truth_arr.shape or pred_2d != truth_2d:
        raise ValueError(
            f"pred and truth disagree on shape: {pred_arr.shape} vs {truth_arr.shape}"
        )
    region = Region(region)
    return [
        dice(
            VoxelSet(masks=(LabelMask(pred_arr[i], _UNIT_SPACING),), region=region),
            VoxelSet(masks=(LabelMask(truth_arr[i], _UNIT_SPACING),), region=region),
        )
        for i in range(pred_arr.shape[0])
    ]
