import json
import math

import numpy as np
import pytest

from nunet_core.augment import (
    AffineParams,
    AugmentConfig,
    AugmentSpec,
    DeformCoeffs,
    backward_map,
    eval_deformation,
    load_augment_config,
    sample_spec,
    warp_image,
    warp_mask,
)
from nunet_core.imaging import Image2D, LabelMask
from nunet_core.seg_metrics import VoxelSet, dice
from nunet_core.volumetrics import Region


def _img(arr):
    return Image2D(np.asarray(arr, dtype=np.float64), (1.0, 1.0))


def _mask(arr):
    return LabelMask(np.asarray(arr, dtype=np.uint8), (1.0, 1.0))


def _horner_eval(coeffs, i, j):
    """Independent evaluator: factor each polynomial by variable."""
    ai, aj, aij, aii, ajj = coeffs
    return i * (ai + aij * j + aii * i) + j * (aj + ajj * j)


class TestDeformation:
    def test_zero_coeffs_everywhere_zero(self):
        c = DeformCoeffs()
        for p in [(0.0, 0.0), (1.0, -1.0), (0.3, 0.7)]:
            assert eval_deformation(c, p) == (0.0, 0.0)

    def test_origin_always_fixed(self):
        c = DeformCoeffs(row=(0.1,) * 5, col=(-0.1,) * 5, epsilon=0.1)
        assert eval_deformation(c, (0.0, 0.0)) == (0.0, 0.0)

    def test_hand_worked_values(self):
        c = DeformCoeffs(row=(0.1, 0, 0, 0, 0), col=(0, 0, 0, 0, 0.2), epsilon=0.2)
        di, dj = eval_deformation(c, (0.5, -1.0))
        assert di == pytest.approx(0.05)
        assert dj == pytest.approx(0.2)

    def test_against_horner_oracle(self):
        rng = np.random.default_rng(10)
        worst = 0.0
        for _ in range(10_000):
            eps = rng.uniform(0.01, 0.5)
            row = tuple(rng.uniform(-eps, eps, 5))
            col = tuple(rng.uniform(-eps, eps, 5))
            c = DeformCoeffs(row=row, col=col, epsilon=eps)
            i, j = rng.uniform(-1.5, 1.5, 2)
            di, dj = eval_deformation(c, (i, j))
            worst = max(worst, abs(di - _horner_eval(row, i, j)), abs(dj - _horner_eval(col, i, j)))
        assert worst <= 1e-12

    def test_coefficient_bound_enforced(self):
        with pytest.raises(ValueError):
            DeformCoeffs(row=(0.3, 0, 0, 0, 0), col=(0,) * 5, epsilon=0.2)

    def test_epsilon_zero_forces_zero(self):
        with pytest.raises(ValueError):
            DeformCoeffs(row=(1e-9, 0, 0, 0, 0), col=(0,) * 5, epsilon=0.0)


class TestAffine:
    def test_scale_must_be_positive(self):
        with pytest.raises(ValueError):
            AffineParams(scale=(0.0, 1.0))

    def test_degenerate_shear_not_invertible(self):
        with pytest.raises(ValueError):
            AffineParams(shear=(1.0, 1.0))

    def test_flip_matrix_determinant(self):
        assert np.linalg.det(AffineParams(flip_x=True).matrix()) == pytest.approx(-1.0)


class TestBackwardMap:
    def test_identity_fixes_every_pixel(self):
        spec = AugmentSpec()
        for p in [(0, 0), (13, 200), (255, 255)]:
            assert backward_map(spec, p, (256, 256)) == (float(p[0]), float(p[1]))

    def test_flip_x_maps_top_row_to_bottom(self):
        spec = AugmentSpec(affine=AffineParams(flip_x=True))
        assert backward_map(spec, (0, 10), (256, 256)) == (255.0, 10.0)

    def test_quarter_rotation_fixes_center(self):
        spec = AugmentSpec(affine=AffineParams(rotation=math.pi / 2))
        assert backward_map(spec, (128, 128), (257, 257)) == (128.0, 128.0)

    def test_quarter_rotation_is_exact_permutation(self):
        spec = AugmentSpec(affine=AffineParams(rotation=math.pi / 2))
        r, c = backward_map(spec, (0, 0), (257, 257))
        assert r == int(r) and c == int(c)


class TestWarpImage:
    def test_identity_returns_same_buffer(self):
        img = _img(np.random.default_rng(0).normal(size=(16, 16)))
        assert warp_image(img, AugmentSpec()).pixels is img.pixels

    def test_bilinear_midpoint(self):
        # backward map sampling at column 0.5 of [0, 10] must yield 5
        img = _img([[0.0, 10.0]])
        # one normalized unit is half the extent: ty=1 shifts the source
        # lookup of output column 1 onto source column 0.5
        spec = AugmentSpec(affine=AffineParams(translation=(0.0, 1.0)))
        out = warp_image(img, spec)
        assert out.pixels[0, 1] == pytest.approx(5.0)
        assert out.pixels[0, 0] == 0.0  # source column -0.5 is outside

    def test_integer_shift_matches_shift_oracle(self):
        rng = np.random.default_rng(11)
        img = _img(rng.normal(size=(9, 9)))
        # translation of +2 normalized by (h-1)/2=4 units/pixel: 2/4 = 0.5
        spec = AugmentSpec(affine=AffineParams(translation=(0.5, 0.0)))
        out = warp_image(img, spec)
        want = np.zeros_like(img.pixels)
        want[2:, :] = img.pixels[:-2, :]  # out(r) = in(r - 2), zero fill
        assert np.array_equal(out.pixels, want)

    def test_flip_is_exact_row_reversal(self):
        rng = np.random.default_rng(12)
        img = _img(rng.normal(size=(10, 8)))
        out = warp_image(img, AugmentSpec(affine=AffineParams(flip_x=True)))
        assert np.array_equal(out.pixels, img.pixels[::-1, :])

    def test_flip_inverse_recovers_exactly(self):
        rng = np.random.default_rng(13)
        img = _img(rng.normal(size=(12, 12)))
        spec = AugmentSpec(affine=AffineParams(flip_x=True, flip_y=True))
        assert np.array_equal(warp_image(warp_image(img, spec), spec).pixels, img.pixels)

    def test_quarter_rotations_compose_to_identity(self):
        rng = np.random.default_rng(14)
        img = _img(rng.normal(size=(15, 15)))
        spec = AugmentSpec(affine=AffineParams(rotation=math.pi / 2))
        out = img
        for _ in range(4):
            out = warp_image(out, spec)
        assert np.array_equal(out.pixels, img.pixels)

    def test_out_of_bounds_fills_zero(self):
        img = _img(np.ones((5, 5)))
        spec = AugmentSpec(affine=AffineParams(translation=(1.0, 0.0)))  # shift by 2 px
        out = warp_image(img, spec)
        assert np.all(out.pixels[:2, :] == 0.0)
        assert np.all(out.pixels[2:, :] == 1.0)


class TestWarpMask:
    def test_identity_returns_same_buffer(self):
        m = _mask(np.eye(6))
        assert warp_mask(m, AugmentSpec()).labels is m.labels

    def test_flip_is_exact_row_reversal(self):
        rng = np.random.default_rng(15)
        m = _mask(rng.integers(0, 5, size=(11, 7)))
        out = warp_mask(m, AugmentSpec(affine=AffineParams(flip_x=True)))
        assert np.array_equal(out.labels, m.labels[::-1, :])

    def test_random_specs_never_invent_codes(self):
        rng = np.random.default_rng(16)
        base = _mask(rng.integers(0, 3, size=(16, 16)))
        config = AugmentConfig()
        for k in range(200):
            spec = sample_spec(config, seed=1, sample_index=k)
            out = warp_mask(base, spec)
            assert out.codes_present() <= base.codes_present() | {0}

    def test_dice_invariant_under_lossless_transform(self):
        rng = np.random.default_rng(17)
        a = _mask(rng.integers(0, 2, size=(12, 12)))
        b = _mask(rng.integers(0, 2, size=(12, 12)))
        spec = AugmentSpec(affine=AffineParams(flip_x=True))
        before = dice(
            VoxelSet(masks=(a,), region=Region.LV_ENDO),
            VoxelSet(masks=(b,), region=Region.LV_ENDO),
        )
        after = dice(
            VoxelSet(masks=(warp_mask(a, spec),), region=Region.LV_ENDO),
            VoxelSet(masks=(warp_mask(b, spec),), region=Region.LV_ENDO),
        )
        assert after == before


class TestSampleSpec:
    def test_identical_key_identical_spec(self):
        config = AugmentConfig()
        assert sample_spec(config, 42, 7) == sample_spec(config, 42, 7)

    def test_degenerate_config_yields_identity(self):
        config = AugmentConfig(
            epsilon=0.0,
            rotation_range=0.0,
            scale_range=(1.0, 1.0),
            shear_range=0.0,
            translation_range=0.0,
            flip_prob_x=0.0,
            flip_prob_y=0.0,
        )
        spec = sample_spec(config, 9, 3)
        assert spec.affine.is_identity()
        assert spec.deform.is_zero()

    def test_uniform_law_of_coefficients(self):
        config = AugmentConfig(epsilon=0.2)
        n = 100_000
        draws = np.empty((n, 10))
        for k in range(n):
            spec = sample_spec(config, 0, k)
            draws[k] = spec.deform.row + spec.deform.col
        assert np.all(np.abs(draws) <= 0.2)
        assert np.all(np.abs(draws.mean(axis=0)) < 0.01)

    def test_streams_differ_across_indices(self):
        config = AugmentConfig()
        assert sample_spec(config, 0, 1) != sample_spec(config, 0, 2)
        assert sample_spec(config, 1, 0) != sample_spec(config, 2, 0)

    def test_negative_key_rejected(self):
        with pytest.raises(ValueError):
            sample_spec(AugmentConfig(), -1, 0)


class TestConfigFile:
    def test_load_with_all_keys(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(
            json.dumps(
                {
                    "epsilon": 0.1,
                    "rotation_range": 0.5,
                    "scale_min": 0.95,
                    "scale_max": 1.05,
                    "shear_range": 0.05,
                    "translation_range": 0.02,
                    "flip_prob_x": 0.25,
                    "flip_prob_y": 0.0,
                    "seed": 11,
                }
            )
        )
        config, seed = load_augment_config(path)
        assert config == AugmentConfig(
            epsilon=0.1,
            rotation_range=0.5,
            scale_range=(0.95, 1.05),
            shear_range=0.05,
            translation_range=0.02,
            flip_prob_x=0.25,
            flip_prob_y=0.0,
        )
        assert seed == 11

    def test_missing_keys_fall_back_to_defaults(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"epsilon": 0.3}))
        config, seed = load_augment_config(path)
        assert config.epsilon == 0.3
        assert config.scale_range == AugmentConfig().scale_range
        assert seed == 0

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"epsilonn": 0.3}))
        with pytest.raises(ValueError, match="unknown"):
            load_augment_config(path)
