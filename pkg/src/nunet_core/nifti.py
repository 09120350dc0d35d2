"""Minimal bit-exact NIfTI-1 single-file I/O and volume-table ingestion.

Covers exactly what cardiac cine stacks need: little-endian ``.nii``
files with magic ``n+1``, 3D or 4D payloads in uint8, int16, or float32,
axis order (columns, rows, slices, frames) with the first axis fastest,
and spacings taken from pixdim. Intensity files honor scl_slope and
scl_inter (a zero slope reads as 1); mask files must carry an integer
datatype, identity scaling, and label codes 0..4.

Every failure mode is a distinct exception carrying the byte offset of
the offending field, so malformed exports are diagnosable rather than
fatal: wrong magic, truncation (header or payload), unsupported
datatype, inconsistent dimensions, and big-endian headers (detected via
the dim[0] range heuristic and explicitly unsupported).

Orientation fields (qform/sform) are preserved as zeros on write and
ignored on read — volumes depend on spacing only, not on patient
orientation.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .imaging import CineStack, Image2D, LabelMask, MaskCine

__all__ = [
    "NiftiError",
    "BadMagicError",
    "TruncatedFileError",
    "UnsupportedDatatypeError",
    "InconsistentDimsError",
    "UnsupportedEndiannessError",
    "read_nifti",
    "write_nifti",
    "VolumeTableRow",
    "read_volume_table",
]

HEADER_SIZE = 348
VOX_OFFSET = 352  # header + 4-byte extension stub

# Field byte offsets within the 348-byte header.
_OFF_SIZEOF_HDR = 0
_OFF_DIM = 40
_OFF_DATATYPE = 70
_OFF_BITPIX = 72
_OFF_PIXDIM = 76
_OFF_VOX_OFFSET = 108
_OFF_SCL_SLOPE = 112
_OFF_SCL_INTER = 116
_OFF_MAGIC = 344

# datatype code -> (numpy little-endian dtype, bitpix)
_DATATYPES = {
    2: (np.dtype("<u1"), 8),  # uint8
    4: (np.dtype("<i2"), 16),  # int16
    16: (np.dtype("<f4"), 32),  # float32
}
_DATATYPE_NAMES = {"uint8": 2, "int16": 4, "float32": 16}
_INTEGER_CODES = (2, 4)


class NiftiError(ValueError):
    """Base for malformed or unsupported files; carries a byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class BadMagicError(NiftiError):
    """The magic field is not the single-file form ``n+1``."""


class TruncatedFileError(NiftiError):
    """The file ends before the declared header or payload does."""


class UnsupportedDatatypeError(NiftiError):
    """The datatype code is outside the supported {uint8, int16, float32}."""


class InconsistentDimsError(NiftiError):
    """Dimension, spacing, or layout fields contradict each other."""


class UnsupportedEndiannessError(NiftiError):
    """The header was written big-endian; only little-endian is read."""


def _classify_header(buf: bytes) -> None:
    """Raise the precise error for a header that cannot be used."""
    if len(buf) < HEADER_SIZE:
        raise TruncatedFileError(
            f"file holds {len(buf)} bytes, header needs {HEADER_SIZE}", offset=len(buf)
        )
    magic = buf[_OFF_MAGIC : _OFF_MAGIC + 4]
    if magic != b"n+1\x00":
        if magic == b"ni1\x00":
            raise BadMagicError(
                "two-file (.hdr/.img) form 'ni1' is unsupported; use single-file 'n+1'",
                offset=_OFF_MAGIC,
            )
        raise BadMagicError(f"magic {magic!r} is not 'n+1\\x00'", offset=_OFF_MAGIC)

    (dim0,) = struct.unpack_from("<h", buf, _OFF_DIM)
    if not 1 <= dim0 <= 7:
        (swapped,) = struct.unpack_from(">h", buf, _OFF_DIM)
        if 1 <= swapped <= 7:
            raise UnsupportedEndiannessError(
                "header is big-endian; only little-endian files are supported",
                offset=_OFF_DIM,
            )
        raise InconsistentDimsError(f"dim[0] = {dim0} outside 1..7", offset=_OFF_DIM)

    (sizeof_hdr,) = struct.unpack_from("<i", buf, _OFF_SIZEOF_HDR)
    if sizeof_hdr != HEADER_SIZE:
        raise InconsistentDimsError(
            f"sizeof_hdr = {sizeof_hdr}, must be {HEADER_SIZE}", offset=_OFF_SIZEOF_HDR
        )


def _read_layout(buf: bytes) -> tuple[tuple[int, int, int, int], tuple[float, ...], int, float, float, int]:
    """Validated (cols, rows, slices, frames), pixdim, datatype, slope, inter, offset."""
    dim = struct.unpack_from("<8h", buf, _OFF_DIM)
    if dim[0] not in (3, 4):
        raise InconsistentDimsError(
            f"dim[0] = {dim[0]}; only 3D/4D stacks are supported", offset=_OFF_DIM
        )
    cols, rows, slices = dim[1], dim[2], dim[3]
    frames = dim[4] if dim[0] == 4 else 1
    for axis, extent in enumerate((cols, rows, slices, frames), start=1):
        if extent < 1:
            raise InconsistentDimsError(
                f"dim[{axis}] = {extent} must be >= 1", offset=_OFF_DIM + 2 * axis
            )

    (datatype,) = struct.unpack_from("<h", buf, _OFF_DATATYPE)
    if datatype not in _DATATYPES:
        raise UnsupportedDatatypeError(
            f"datatype code {datatype}; supported codes are {sorted(_DATATYPES)}",
            offset=_OFF_DATATYPE,
        )
    (bitpix,) = struct.unpack_from("<h", buf, _OFF_BITPIX)
    if bitpix != _DATATYPES[datatype][1]:
        raise InconsistentDimsError(
            f"bitpix {bitpix} does not match datatype code {datatype}", offset=_OFF_BITPIX
        )

    pixdim = struct.unpack_from("<8f", buf, _OFF_PIXDIM)
    for axis in (1, 2, 3):
        if not pixdim[axis] > 0:
            raise InconsistentDimsError(
                f"pixdim[{axis}] = {pixdim[axis]} must be > 0",
                offset=_OFF_PIXDIM + 4 * axis,
            )

    (vox_offset,) = struct.unpack_from("<f", buf, _OFF_VOX_OFFSET)
    vox_offset_i = int(vox_offset)
    if vox_offset != vox_offset_i or vox_offset_i < HEADER_SIZE:
        raise InconsistentDimsError(
            f"vox_offset = {vox_offset} must be an integer >= {HEADER_SIZE}",
            offset=_OFF_VOX_OFFSET,
        )
    slope, inter = struct.unpack_from("<2f", buf, _OFF_SCL_SLOPE)
    return (cols, rows, slices, frames), pixdim, datatype, slope, inter, vox_offset_i


def read_nifti(path, *, as_mask: bool = False) -> Union[CineStack, MaskCine]:
    """Read a 3D/4D single-file NIfTI-1 volume.

    Returns a CineStack of float64 intensities (with scl_slope/scl_inter
    applied; slope 0 reads as 1), or with ``as_mask=True`` a MaskCine of
    uint8 label codes — mask files must use an integer datatype, carry
    no rescaling, and hold codes 0..4 only.
    """
    buf = Path(path).read_bytes()
    _classify_header(buf)
    (cols, rows, slices, frames), pixdim, datatype, slope, inter, vox_offset = _read_layout(buf)

    dtype, bitpix = _DATATYPES[datatype]
    n_voxels = cols * rows * slices * frames
    payload_bytes = n_voxels * (bitpix // 8)
    if len(buf) < vox_offset + payload_bytes:
        raise TruncatedFileError(
            f"payload needs {payload_bytes} bytes at offset {vox_offset}, "
            f"file holds {len(buf)}",
            offset=len(buf),
        )

    flat = np.frombuffer(buf, dtype=dtype, count=n_voxels, offset=vox_offset)
    grid_arr = flat.reshape(frames, slices, rows, cols)  # dim[1] varies fastest
    spacing_xy = (float(pixdim[1]), float(pixdim[2]))
    dz = float(pixdim[3])

    if as_mask:
        if datatype not in _INTEGER_CODES:
            raise UnsupportedDatatypeError(
                f"mask files need an integer datatype, got code {datatype}",
                offset=_OFF_DATATYPE,
            )
        if slope not in (0.0, 1.0) or inter != 0.0:
            raise InconsistentDimsError(
                f"mask files must not be rescaled (slope={slope}, inter={inter})",
                offset=_OFF_SCL_SLOPE,
            )
        grid = [
            [LabelMask(grid_arr[f, s].astype(np.uint8), spacing_xy) for f in range(frames)]
            for s in range(slices)
        ]
        return MaskCine(masks=grid, slice_thickness=dz, slice_gap=0.0)

    scale = slope if slope != 0.0 else 1.0
    grid = [
        [
            Image2D(grid_arr[f, s].astype(np.float64) * scale + inter, spacing_xy)
            for f in range(frames)
        ]
        for s in range(slices)
    ]
    return CineStack(images=grid, slice_thickness=dz, slice_gap=0.0)


def _grid_of(stack: Union[CineStack, MaskCine]):
    return stack.masks if isinstance(stack, MaskCine) else stack.images


def _stack_payload(stack: Union[CineStack, MaskCine]) -> np.ndarray:
    """(frames, slices, rows, cols) float64/uint8 array from a stack."""
    grid = _grid_of(stack)
    as_mask = isinstance(stack, MaskCine)
    planes = []
    for f in range(stack.n_frames):
        cells = [row[f] for row in grid]
        planes.append(np.stack([c.labels if as_mask else c.pixels for c in cells]))
    return np.stack(planes)


def write_nifti(stack: Union[CineStack, MaskCine], path, datatype: str | int | None = None) -> None:
    """Write a stack as a little-endian single-file NIfTI-1 volume.

    ``datatype`` is a code (2, 4, 16) or name ('uint8', 'int16',
    'float32'); masks default to uint8 and images to float32. Integer
    datatypes require exactly representable values — out-of-range or
    fractional intensities are an error, never silently quantized.
    """
    if datatype is None:
        code = 2 if isinstance(stack, MaskCine) else 16
    elif isinstance(datatype, str):
        if datatype not in _DATATYPE_NAMES:
            raise UnsupportedDatatypeError(
                f"datatype {datatype!r}; supported names are {sorted(_DATATYPE_NAMES)}"
            )
        code = _DATATYPE_NAMES[datatype]
    else:
        if datatype not in _DATATYPES:
            raise UnsupportedDatatypeError(
                f"datatype code {datatype}; supported codes are {sorted(_DATATYPES)}"
            )
        code = datatype
    dtype, bitpix = _DATATYPES[code]

    data = _stack_payload(stack)
    if code in _INTEGER_CODES:
        info = np.iinfo(dtype)
        if np.any(data != np.rint(data)):
            raise ValueError(f"values are not integral; cannot store as {dtype.name}")
        if data.min() < info.min or data.max() > info.max:
            raise ValueError(
                f"values span [{data.min()}, {data.max()}], outside {dtype.name} range"
            )
    payload = np.ascontiguousarray(data, dtype=dtype).tobytes()

    frames, slices, rows, cols = data.shape
    sample = _grid_of(stack)[0][0]
    dx, dy = sample.pixel_spacing
    dz = stack.slice_thickness + stack.slice_gap

    hdr = bytearray(HEADER_SIZE)
    struct.pack_into("<i", hdr, _OFF_SIZEOF_HDR, HEADER_SIZE)
    struct.pack_into("<8h", hdr, _OFF_DIM, 4, cols, rows, slices, frames, 1, 1, 1)
    struct.pack_into("<2h", hdr, _OFF_DATATYPE, code, bitpix)
    struct.pack_into("<8f", hdr, _OFF_PIXDIM, 0.0, dx, dy, dz, float(frames), 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, _OFF_VOX_OFFSET, float(VOX_OFFSET))
    struct.pack_into("<2f", hdr, _OFF_SCL_SLOPE, 1.0, 0.0)
    hdr[_OFF_MAGIC : _OFF_MAGIC + 4] = b"n+1\x00"

    with open(path, "wb") as fh:
        fh.write(bytes(hdr))
        fh.write(b"\x00\x00\x00\x00")  # empty extension stub
        fh.write(payload)


@dataclass(frozen=True)
class VolumeTableRow:
    """Ground-truth LV volumes for one case, in ml."""

    case_id: str
    systolic_ml: float
    diastolic_ml: float

    def __post_init__(self) -> None:
        if self.systolic_ml < 0 or self.diastolic_ml < 0:
            raise ValueError(f"{self.case_id}: volumes must be non-negative")


def read_volume_table(path) -> list[VolumeTableRow]:
    """Read a case volume table: header ``case_id,systolic_ml,diastolic_ml``.

    Rejects duplicate case ids and malformed or negative rows, naming
    the offending line.
    """
    rows: list[VolumeTableRow] = []
    seen: set[str] = set()
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["case_id", "systolic_ml", "diastolic_ml"]
        if header is None or [h.strip() for h in header] != expected:
            raise ValueError(f"{path}: expected header {','.join(expected)!r}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            case_id = row[0].strip()
            if case_id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate case_id {case_id!r}")
            seen.add(case_id)
            try:
                sys_ml, dia_ml = float(row[1]), float(row[2])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric volume") from exc
            try:
                rows.append(VolumeTableRow(case_id, sys_ml, dia_ml))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return rows
