import numpy as np
import pytest

from nunet_core.imaging import LabelMask
from nunet_core.seg_metrics import (
    BothEmptyWarning,
    ConfusionCounts,
    MetricRow,
    VoxelSet,
    confusion,
    dice,
    mean_std,
    overlap,
    write_metrics_csv,
)
from nunet_core.volumetrics import Region


def _set(arrs, region=Region.LV_ENDO):
    masks = tuple(LabelMask(np.asarray(a, dtype=np.uint8), (1.0, 1.0)) for a in arrs)
    return VoxelSet(masks=masks, region=region)


def _random_pair(rng, shape=(4, 16, 16)):
    x = _set(rng.integers(0, 2, size=shape))
    y = _set(rng.integers(0, 2, size=shape))
    return x, y


class TestDice:
    def test_identical_nonempty(self):
        x = _set([np.eye(4)])
        assert dice(x, x) == 1.0

    def test_disjoint(self):
        a = np.zeros((1, 4, 4))
        a[0, 0] = 1
        b = np.zeros((1, 4, 4))
        b[0, 2] = 1
        assert dice(_set(a), _set(b)) == 0.0

    def test_half_overlap(self):
        a = np.zeros((1, 2, 4))
        a[0, 0, :] = 1  # |X| = 4
        b = np.zeros((1, 2, 4))
        b[0, 0, 2:] = 1
        b[0, 1, :2] = 1  # |Y| = 4, |X n Y| = 2
        assert dice(_set(a), _set(b)) == 0.5

    def test_both_empty_is_one_with_warning(self):
        e = _set([np.zeros((3, 3))])
        with pytest.warns(BothEmptyWarning):
            assert dice(e, e) == 1.0

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(30)
        for _ in range(50):
            x, y = _random_pair(rng)
            d = dice(x, y)
            assert d == dice(y, x)
            assert 0.0 <= d <= 1.0

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            dice(_set([np.zeros((3, 3))]), _set([np.zeros((4, 4))]))

    def test_matches_bruteforce_counting(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            x, y = _random_pair(rng, shape=(2, 8, 8))
            mx, my = x.members(), y.members()
            inter = sum(
                1
                for s in range(2)
                for r in range(8)
                for c in range(8)
                if mx[s, r, c] and my[s, r, c]
            )
            nx, ny = mx.sum(), my.sum()
            assert dice(x, y) == pytest.approx(2 * inter / (nx + ny))


class TestOverlap:
    def test_identical(self):
        x = _set([np.eye(4)])
        assert overlap(x, x) == 1.0

    def test_jaccard_dice_identity(self):
        rng = np.random.default_rng(32)
        for _ in range(100):
            x, y = _random_pair(rng)
            d, j = dice(x, y), overlap(x, y)
            assert abs(j - d / (2.0 - d)) <= 1e-12

    def test_reported_pair_consistency(self):
        # published mean dice 91.5% and mean overlap 84.6% should satisfy
        # J = D/(2-D) within a band, since means of ratios do not commute
        implied = 0.915 / (2.0 - 0.915)
        assert implied == pytest.approx(0.846, abs=0.015)


class TestConfusion:
    def test_identical_perfect_scores(self):
        x = _set([np.eye(5)])
        counts = confusion(x, x)
        assert counts.precision == 1.0
        assert counts.recall == 1.0
        assert counts.fp == counts.fn == 0

    def test_empty_prediction_has_no_precision(self):
        empty = _set([np.zeros((3, 3))])
        full = _set([np.ones((3, 3))])
        counts = confusion(empty, full)
        assert counts.precision is None
        assert counts.recall == 0.0
        assert counts.specificity is None  # no true negatives exist either

    def test_empty_truth_has_no_recall(self):
        empty = _set([np.zeros((3, 3))])
        pred = _set([np.eye(3)])
        counts = confusion(pred, empty)
        assert counts.recall is None
        assert counts.specificity == pytest.approx(6 / 9)

    def test_matches_bruteforce_counting(self):
        rng = np.random.default_rng(33)
        for _ in range(20):
            x, y = _random_pair(rng, shape=(4, 16, 16))
            mx, my = x.members(), y.members()
            tp = fp = fn = tn = 0
            for a, b in zip(mx.flat, my.flat):
                if a and b:
                    tp += 1
                elif a:
                    fp += 1
                elif b:
                    fn += 1
                else:
                    tn += 1
            assert confusion(x, y) == ConfusionCounts(tp, fp, fn, tn)

    def test_f1_equals_dice(self):
        rng = np.random.default_rng(34)
        for _ in range(50):
            x, y = _random_pair(rng)
            counts = confusion(x, y)
            if counts.precision in (None, 0.0) or counts.recall in (None, 0.0):
                continue
            f1 = 2 * counts.precision * counts.recall / (counts.precision + counts.recall)
            assert abs(f1 - dice(x, y)) <= 1e-12

    def test_total_voxels_extends_universe(self):
        x = _set([np.eye(3)])
        counts = confusion(x, x, total_voxels=100)
        assert counts.tn == 100 - 3
        with pytest.raises(ValueError):
            confusion(x, x, total_voxels=2)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(35)
        x, y = _random_pair(rng, shape=(1, 6, 6))
        perm = rng.permutation(36)
        xp = _set([x.members()[0].flatten()[perm].reshape(6, 6).astype(np.uint8)])
        yp = _set([y.members()[0].flatten()[perm].reshape(6, 6).astype(np.uint8)])
        assert dice(xp, yp) == dice(x, y)
        assert confusion(xp, yp) == confusion(x, y)


class TestCsvAndAggregation:
    def test_csv_layout(self, tmp_path):
        row = MetricRow(
            case_id="c1",
            phase="ES",
            region=Region.LV_ENDO,
            dice=0.9,
            overlap=0.8,
            accuracy=0.99,
            precision=None,
            recall=1.0,
            specificity=0.5,
        )
        path = tmp_path / "m.csv"
        write_metrics_csv([row], path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "case_id,phase,region,dice,overlap,accuracy,precision,recall,specificity"
        assert lines[1].split(",")[:3] == ["c1", "ES", "lv_endo"]
        assert lines[1].split(",")[6] == ""  # undefined precision stays empty

    def test_mean_std_skips_undefined(self):
        mean, std = mean_std([1.0, None, 3.0])
        assert mean == 2.0
        assert std == 1.0

    def test_mean_std_empty_rejected(self):
        with pytest.raises(ValueError):
            mean_std([None])
