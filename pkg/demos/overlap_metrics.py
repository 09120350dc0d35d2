"""Segmentation overlap metrics: dice, jaccard, and confusion counts.

Two slightly different segmentations of the same shape illustrate the
metrics and the exact algebraic tie between them: J = D / (2 - D) for
any single pair of voxel sets.
"""

import numpy as np

from nunet_core import LabelMask, Region, VoxelSet, confusion, dice, overlap
from nunet_core.seg_metrics import mean_std


def square_mask(n, lo, hi, code=1):
    labels = np.zeros((n, n), dtype=np.uint8)
    labels[lo:hi, lo:hi] = code
    return LabelMask(labels, (1.0, 1.0))


def main():
    truth = VoxelSet(masks=(square_mask(32, 8, 24),), region=Region.LV_ENDO)
    pred = VoxelSet(masks=(square_mask(32, 9, 25),), region=Region.LV_ENDO)

    d = dice(pred, truth)
    j = overlap(pred, truth)
    print(f"dice    = {d:.4f}")
    print(f"jaccard = {j:.4f}")
    print(f"identity J = D/(2-D): {j:.12f} vs {d / (2 - d):.12f}")

    counts = confusion(pred, truth)
    print(
        f"confusion: tp={counts.tp} fp={counts.fp} fn={counts.fn} tn={counts.tn}  "
        f"accuracy={counts.accuracy:.4f} precision={counts.precision:.4f} "
        f"recall={counts.recall:.4f} specificity={counts.specificity:.4f}"
    )

    # dice degrades smoothly as the prediction drifts off target
    print("\ndice vs prediction offset:")
    scores = []
    for shift in range(0, 9, 2):
        shifted = VoxelSet(masks=(square_mask(32, 8 + shift, 24 + shift),),
                           region=Region.LV_ENDO)
        scores.append(dice(shifted, truth))
        print(f"  shift {shift:2d} px -> dice {scores[-1]:.4f}")
    mean, std = mean_std(scores)
    print(f"  mean {mean:.4f} +/- {std:.4f}")


if __name__ == "__main__":
    main()
