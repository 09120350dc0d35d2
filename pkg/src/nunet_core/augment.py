"""Deterministic single-sample augmentation.

A sample's warp is the composition of an affine-group transform (rotation,
scale, shear, translation, axis flips) with a local deformation whose two
displacement components are second-degree polynomials of the pixel
coordinates. Both act in center-normalized coordinates: pixel (row, col)
of an h-by-w image maps to ``(i, j) = ((2*row - (h-1))/(h-1),
(2*col - (w-1))/(w-1))``, so each component spans [-1, 1] across the
image. Displacements returned by the polynomials are in the same
normalized units, which keeps the deformation bound ``epsilon``
dimensionless and resolution-independent.

Warping is backward (target-to-source): every output pixel is normalized,
pushed through the inverse affine, displaced by the polynomial evaluated
at that point, then de-normalized to a fractional source position.
Images interpolate bilinearly, masks take the nearest neighbor, and
source positions outside the input fill with 0 (background).

Randomness is a counter-based stream keyed by ``(seed, sample_index)``
(Philox), so sampled parameters do not depend on call order, thread, or
worker count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .imaging import Image2D, LabelMask

__all__ = [
    "AffineParams",
    "DeformCoeffs",
    "AugmentSpec",
    "AugmentConfig",
    "DEFAULT_SEED",
    "eval_deformation",
    "backward_map",
    "warp_image",
    "warp_mask",
    "sample_spec",
    "config_from_mapping",
    "load_augment_config",
]

# Fixed default so every run is reproducible without flags.
DEFAULT_SEED = 0

# |det| of the 2x2 linear part below this is treated as non-invertible.
_DET_EPS = 1e-9

# Backward-mapped coordinates this close to an integer are snapped to it,
# so pure flips / k*90-degree rotations / integer shifts stay exact pixel
# permutations despite the normalize/de-normalize round trip.
_SNAP_EPS = 1e-9

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class AffineParams:
    """Affine-group parameters acting on normalized image coordinates.

    ``rotation`` is in radians about the image center. ``scale`` and
    ``shear`` are (row-axis, col-axis) factors; ``translation`` is in
    normalized units (1.0 = half the image extent). ``flip_x`` mirrors the
    row axis, ``flip_y`` the column axis.
    """

    rotation: float = 0.0
    scale: tuple[float, float] = (1.0, 1.0)
    shear: tuple[float, float] = (0.0, 0.0)
    translation: tuple[float, float] = (0.0, 0.0)
    flip_x: bool = False
    flip_y: bool = False

    def __post_init__(self) -> None:
        sx, sy = self.scale
        if not (sx > 0 and sy > 0):
            raise ValueError(f"scale factors must be positive, got ({sx}, {sy})")
        if abs(np.linalg.det(self.matrix())) <= _DET_EPS:
            raise ValueError("affine linear part is not invertible")

    def matrix(self) -> np.ndarray:
        """Forward 2x2 linear part: rotation @ shear @ scale @ flips."""
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        rot = np.array([[c, -s], [s, c]])
        hx, hy = self.shear
        shear = np.array([[1.0, hx], [hy, 1.0]])
        sx, sy = self.scale
        scale = np.diag([sx, sy])
        flip = np.diag([-1.0 if self.flip_x else 1.0, -1.0 if self.flip_y else 1.0])
        return rot @ shear @ scale @ flip

    def is_identity(self) -> bool:
        return (
            self.rotation == 0.0
            and self.scale == (1.0, 1.0)
            and self.shear == (0.0, 0.0)
            and self.translation == (0.0, 0.0)
            and not self.flip_x
            and not self.flip_y
        )


# Per-component polynomial coefficient order: (i, j, i*j, i^2, j^2).
_COEFF_ORDER = ("i", "j", "ij", "ii", "jj")


@dataclass(frozen=True)
class DeformCoeffs:
    """Quadratic deformation coefficients, one 5-tuple per displacement axis.

    ``row`` feeds the row displacement, ``col`` the column displacement;
    each holds coefficients in the order (i, j, i*j, i^2, j^2). All
    coefficients must lie in [-epsilon, +epsilon]; epsilon == 0 forces the
    deformation to be exactly zero.
    """

    row: tuple[float, float, float, float, float] = (0.0, 0.0, 0.0, 0.0, 0.0)
    col: tuple[float, float, float, float, float] = (0.0, 0.0, 0.0, 0.0, 0.0)
    epsilon: float = 0.0

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if len(self.row) != 5 or len(self.col) != 5:
            raise ValueError("row and col must each hold 5 coefficients")
        for name, coeffs in (("row", self.row), ("col", self.col)):
            for tag, a in zip(_COEFF_ORDER, coeffs):
                if abs(a) > self.epsilon:
                    raise ValueError(
                        f"coefficient {name}.{tag}={a} exceeds epsilon={self.epsilon}"
                    )
        object.__setattr__(self, "row", tuple(float(a) for a in self.row))
        object.__setattr__(self, "col", tuple(float(a) for a in self.col))

    def is_zero(self) -> bool:
        return all(a == 0.0 for a in self.row + self.col)


@dataclass(frozen=True)
class AugmentSpec:
    """Fully determined parameters of one sample's warp."""

    affine: AffineParams = AffineParams()
    deform: DeformCoeffs = DeformCoeffs()
    seed: int = 0
    sample_index: int = 0


@dataclass(frozen=True)
class AugmentConfig:
    """Sampling ranges for random augmentation parameters.

    ``epsilon`` bounds every deformation coefficient. Affine ranges are
    symmetric except ``scale_range`` which is an explicit (lo, hi)
    interval. Defaults keep rotation unrestricted and the remaining
    transforms mild; all are overridable.
    """

    epsilon: float = 0.2
    rotation_range: float = math.pi
    scale_range: tuple[float, float] = (0.9, 1.1)
    shear_range: float = 0.1
    translation_range: float = 0.1
    flip_prob_x: float = 0.5
    flip_prob_y: float = 0.5

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.rotation_range < 0 or self.shear_range < 0 or self.translation_range < 0:
            raise ValueError("symmetric ranges must be >= 0")
        lo, hi = self.scale_range
        if not (0 < lo <= hi):
            raise ValueError(f"scale_range must satisfy 0 < lo <= hi, got ({lo}, {hi})")
        for p in (self.flip_prob_x, self.flip_prob_y):
            if not 0.0 <= p <= 1.0:
                raise ValueError("flip probabilities must lie in [0, 1]")


_CONFIG_KEYS = {
    "epsilon",
    "rotation_range",
    "scale_min",
    "scale_max",
    "shear_range",
    "translation_range",
    "flip_prob_x",
    "flip_prob_y",
    "seed",
}


def config_from_mapping(raw, source: str = "config") -> tuple[AugmentConfig, int]:
    """Build an AugmentConfig (plus seed) from a key-value mapping.

    Recognized keys: epsilon, rotation_range, scale_min, scale_max,
    shear_range, translation_range, flip_prob_x, flip_prob_y, seed.
    Missing keys fall back to defaults; unknown keys are rejected.
    ``source`` names the mapping's origin in error messages.
    """
    if not isinstance(raw, dict):
        raise ValueError(f"{source}: config must be a mapping")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"{source}: unknown config keys {sorted(unknown)}")
    defaults = AugmentConfig()
    lo = float(raw.get("scale_min", defaults.scale_range[0]))
    hi = float(raw.get("scale_max", defaults.scale_range[1]))
    config = AugmentConfig(
        epsilon=float(raw.get("epsilon", defaults.epsilon)),
        rotation_range=float(raw.get("rotation_range", defaults.rotation_range)),
        scale_range=(lo, hi),
        shear_range=float(raw.get("shear_range", defaults.shear_range)),
        translation_range=float(raw.get("translation_range", defaults.translation_range)),
        flip_prob_x=float(raw.get("flip_prob_x", defaults.flip_prob_x)),
        flip_prob_y=float(raw.get("flip_prob_y", defaults.flip_prob_y)),
    )
    return config, int(raw.get("seed", DEFAULT_SEED))


def load_augment_config(path) -> tuple[AugmentConfig, int]:
    """Read an AugmentConfig (plus seed) from a JSON file.

    See config_from_mapping for the recognized keys.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return config_from_mapping(raw, source=str(path))


def eval_deformation(coeffs: DeformCoeffs, p: tuple[ArrayLike, ArrayLike]) -> tuple[ArrayLike, ArrayLike]:
    """Evaluate the quadratic displacement polynomials at normalized point(s).

    Accepts scalars or broadcastable arrays; returns (row, col)
    displacements in normalized units. Total function: there is no
    constant term, so the origin is always fixed.
    """
    i, j = p
    out = []
    for a in (coeffs.row, coeffs.col):
        out.append(a[0] * i + a[1] * j + a[2] * (i * j) + a[3] * (i * i) + a[4] * (j * j))
    return out[0], out[1]


def _norm_axis(idx: ArrayLike, n: int) -> ArrayLike:
    if n == 1:
        return np.zeros_like(np.asarray(idx, dtype=np.float64))
    return (2.0 * np.asarray(idx, dtype=np.float64) - (n - 1)) / (n - 1)


def _denorm_axis(x: ArrayLike, n: int) -> ArrayLike:
    if n == 1:
        return np.zeros_like(np.asarray(x, dtype=np.float64))
    return (np.asarray(x) + 1.0) * ((n - 1) / 2.0)


def _snap(x: np.ndarray) -> np.ndarray:
    r = np.rint(x)
    return np.where(np.abs(x - r) <= _SNAP_EPS, r, x)


def _source_grid(spec: AugmentSpec, h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Backward map of the full output grid -> fractional source (rows, cols)."""
    m = spec.affine.matrix()
    det = np.linalg.det(m)
    if abs(det) <= _DET_EPS:
        raise ValueError("affine linear part is not invertible")
    minv = np.linalg.inv(m)
    tx, ty = spec.affine.translation

    i = _norm_axis(np.arange(h), h)[:, None]
    j = _norm_axis(np.arange(w), w)[None, :]
    qi = minv[0, 0] * (i - tx) + minv[0, 1] * (j - ty)
    qj = minv[1, 0] * (i - tx) + minv[1, 1] * (j - ty)

    if not spec.deform.is_zero():
        di, dj = eval_deformation(spec.deform, (qi, qj))
        qi = qi + di
        qj = qj + dj

    rows = _snap(np.broadcast_to(_denorm_axis(qi, h), (h, w)).copy())
    cols = _snap(np.broadcast_to(_denorm_axis(qj, w), (h, w)).copy())
    return rows, cols


def backward_map(
    spec: AugmentSpec, out_pixel: tuple[float, float], dims: tuple[int, int]
) -> tuple[float, float]:
    """Map one output pixel (row, col) to its fractional source position.

    ``dims`` is (h, w) of the image being warped. Raises ValueError for a
    non-invertible affine.
    """
    h, w = dims
    if h < 1 or w < 1:
        raise ValueError("dims must be >= 1x1")
    m = spec.affine.matrix()
    det = np.linalg.det(m)
    if abs(det) <= _DET_EPS:
        raise ValueError("affine linear part is not invertible")
    minv = np.linalg.inv(m)
    tx, ty = spec.affine.translation

    i = _norm_axis(np.float64(out_pixel[0]), h)
    j = _norm_axis(np.float64(out_pixel[1]), w)
    qi = minv[0, 0] * (i - tx) + minv[0, 1] * (j - ty)
    qj = minv[1, 0] * (i - tx) + minv[1, 1] * (j - ty)
    di, dj = eval_deformation(spec.deform, (qi, qj))
    row = _snap(np.asarray(_denorm_axis(qi + di, h)))
    col = _snap(np.asarray(_denorm_axis(qj + dj, w)))
    return float(row), float(col)


def _is_identity(spec: AugmentSpec) -> bool:
    return spec.affine.is_identity() and spec.deform.is_zero()


def warp_image(img: Image2D, spec: AugmentSpec) -> Image2D:
    """Backward-warp an image, sampling bilinearly with fill value 0."""
    if _is_identity(spec):
        return img
    h, w = img.height, img.width
    rows, cols = _source_grid(spec, h, w)

    valid = (rows >= 0) & (rows <= h - 1) & (cols >= 0) & (cols <= w - 1)
    r = np.clip(rows, 0.0, float(h - 1))
    c = np.clip(cols, 0.0, float(w - 1))
    r0 = np.clip(np.floor(r).astype(np.intp), 0, max(h - 2, 0))
    c0 = np.clip(np.floor(c).astype(np.intp), 0, max(w - 2, 0))
    fr = r - r0
    fc = c - c0
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)

    px = img.pixels
    val = (
        px[r0, c0] * (1 - fr) * (1 - fc)
        + px[r0, c1] * (1 - fr) * fc
        + px[r1, c0] * fr * (1 - fc)
        + px[r1, c1] * fr * fc
    )
    out = np.where(valid, val, 0.0)
    return Image2D(out, img.pixel_spacing)


def warp_mask(mask: LabelMask, spec: AugmentSpec) -> LabelMask:
    """Backward-warp a label mask with nearest-neighbor sampling.

    Out-of-bounds sources become background (0); the output label set is
    always a subset of the input's plus background.
    """
    if _is_identity(spec):
        return mask
    h, w = mask.height, mask.width
    rows, cols = _source_grid(spec, h, w)

    ri = np.floor(rows + 0.5).astype(np.intp)
    ci = np.floor(cols + 0.5).astype(np.intp)
    valid = (ri >= 0) & (ri <= h - 1) & (ci >= 0) & (ci <= w - 1)
    ri = np.clip(ri, 0, h - 1)
    ci = np.clip(ci, 0, w - 1)
    out = np.where(valid, mask.labels[ri, ci], np.uint8(0))
    return LabelMask(out, mask.pixel_spacing)


def sample_spec(config: AugmentConfig, seed: int, sample_index: int) -> AugmentSpec:
    """Draw one AugmentSpec from the counter-based stream for (seed, index).

    The draw order is fixed (rotation, scale x/y, shear x/y, translation
    x/y, flip uniforms, then the 10 deformation coefficients), so the same
    (config, seed, sample_index) always yields an identical spec,
    independent of caller thread or invocation order.
    """
    if seed < 0 or sample_index < 0:
        raise ValueError("seed and sample_index must be non-negative")
    key = (int(seed) << 64) | (int(sample_index) & ((1 << 64) - 1))
    gen = np.random.Generator(np.random.Philox(key=key))

    rr = config.rotation_range
    rotation = float(gen.uniform(-rr, rr))
    lo, hi = config.scale_range
    scale = (float(gen.uniform(lo, hi)), float(gen.uniform(lo, hi)))
    sr = config.shear_range
    shear = (float(gen.uniform(-sr, sr)), float(gen.uniform(-sr, sr)))
    tr = config.translation_range
    translation = (float(gen.uniform(-tr, tr)), float(gen.uniform(-tr, tr)))
    flip_x = bool(gen.uniform() < config.flip_prob_x)
    flip_y = bool(gen.uniform() < config.flip_prob_y)

    eps = config.epsilon
    row = tuple(float(a) for a in gen.uniform(-eps, eps, 5))
    col = tuple(float(a) for a in gen.uniform(-eps, eps, 5))

    return AugmentSpec(
        affine=AffineParams(
            rotation=rotation,
            scale=scale,
            shear=shear,
            translation=translation,
            flip_x=flip_x,
            flip_y=flip_y,
        ),
        deform=DeformCoeffs(row=row, col=col, epsilon=eps),
        seed=int(seed),
        sample_index=int(sample_index),
    )
