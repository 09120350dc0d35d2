"""Bit-exact NIfTI-1 I/O: write a cine stack, read it back, break it.

The reader refuses anything it cannot interpret exactly — wrong magic,
truncation, big-endian headers — with typed errors naming the byte
offset, instead of guessing.
"""

import struct
import tempfile
from pathlib import Path

import numpy as np

from nunet_core import CineStack, Image2D, read_nifti, write_nifti
from nunet_core.nifti import BadMagicError, TruncatedFileError


def main():
    rng = np.random.default_rng(3)
    grid = [
        [Image2D(rng.normal(size=(16, 12)).astype(np.float32).astype(np.float64),
                 (1.25, 1.5)) for _ in range(4)]
        for _ in range(3)
    ]
    stack = CineStack(images=grid, slice_thickness=8.0, slice_gap=2.0)

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "cine.nii"
        write_nifti(stack, path)
        n_voxels = 3 * 4 * 16 * 12
        print(f"wrote {path.stat().st_size} bytes "
              f"(352-byte header+stub + {n_voxels} float32 voxels)")

        back = read_nifti(path)
        same = all(
            np.array_equal(back.images[s][f].pixels, grid[s][f].pixels)
            for s in range(3) for f in range(4)
        )
        print(f"payload identical after round trip: {same}")
        print(f"spacing read back: in-plane {back.images[0][0].pixel_spacing}, "
              f"dz {back.slice_thickness} (thickness+gap collapse into one step)")

        blob = bytearray(path.read_bytes())

        broken = Path(tmp) / "broken.nii"
        blob[344:348] = b"ni1\x00"  # the two-file variant is refused by name
        broken.write_bytes(bytes(blob))
        try:
            read_nifti(broken)
        except BadMagicError as exc:
            print(f"two-file magic -> BadMagicError: {exc}")

        broken.write_bytes(path.read_bytes()[:500])
        try:
            read_nifti(broken)
        except TruncatedFileError as exc:
            print(f"truncated payload -> TruncatedFileError: {exc}")

        (dim0,) = struct.unpack_from("<h", path.read_bytes(), 40)
        print(f"header sanity: dim[0] = {dim0} (4-D stack)")


if __name__ == "__main__":
    main()
