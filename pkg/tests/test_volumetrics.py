import numpy as np
import pytest

from nunet_core.imaging import LabelMask, MaskCine, Spacing
from nunet_core.volumetrics import (
    DegenerateCurveWarning,
    PhaseOrderWarning,
    Region,
    VolumeCurve,
    VolumeReport,
    detect_phases,
    ejection_fraction,
    full_report,
    region_pixels,
    simpson_volume,
    ventricular_mass,
    write_report_csv,
)


def _mask(arr):
    return LabelMask(np.asarray(arr, dtype=np.uint8), (1.0, 1.0))


def _disk_mask(size, radius, code=1, spacing=(1.0, 1.0)):
    """Filled circle of `code` centered in a size x size plane."""
    c = (size - 1) / 2.0
    rr, cc = np.mgrid[0:size, 0:size]
    labels = np.where((rr - c) ** 2 + (cc - c) ** 2 <= radius**2, code, 0)
    return LabelMask(labels.astype(np.uint8), spacing)


class TestRegionPixels:
    def test_background_only(self):
        m = _mask(np.zeros((8, 8)))
        assert all(region_pixels(m, r) == 0 for r in Region)

    def test_epi_is_pool_plus_myocardium(self):
        labels = np.zeros((10, 10), dtype=np.uint8)
        labels.flat[:30] = 1  # LV pool
        labels.flat[30:50] = 2  # LV myocardium
        m = _mask(labels)
        assert region_pixels(m, Region.LV_ENDO) == 30
        assert region_pixels(m, Region.LV_EPI) == 50

    def test_matches_bruteforce_count(self):
        rng = np.random.default_rng(20)
        codes = {
            Region.LV_ENDO: {1},
            Region.LV_EPI: {1, 2},
            Region.RV_ENDO: {3},
            Region.RV_EPI: {3, 4},
        }
        for _ in range(20):
            m = _mask(rng.integers(0, 5, size=(9, 13)))
            for region, wanted in codes.items():
                brute = sum(1 for v in m.labels.flat if int(v) in wanted)
                assert region_pixels(m, region) == brute


class TestSimpsonVolume:
    def test_mhh_style_arithmetic(self):
        # 3 slices x 100 px x 1.4 x 1.4 x 8 mm3 = 4704 mm3 = 4.704 ml
        labels = np.zeros((10, 10), dtype=np.uint8)
        labels[0:10, 0:10] = 1
        m = LabelMask(labels, (1.4, 1.4))
        spacing = Spacing(1.4, 1.4, 8.0)
        assert simpson_volume([m, m, m], Region.LV_ENDO, spacing) == pytest.approx(4.704)

    def test_gapped_acquisition_spacing(self):
        # 8 mm slices with an 8 mm gap represent 16 mm each
        m = _mask(np.ones((5, 5)))
        v_nogap = simpson_volume([m], Region.LV_ENDO, Spacing(1.0, 1.0, 8.0))
        v_gap = simpson_volume([m], Region.LV_ENDO, Spacing(1.0, 1.0, 16.0))
        assert v_gap == pytest.approx(2 * v_nogap)

    def test_empty_masks_zero(self):
        m = _mask(np.zeros((4, 4)))
        assert simpson_volume([m, m], Region.RV_EPI, Spacing(1.0, 1.0, 8.0)) == 0.0

    def test_additive_over_slices(self):
        rng = np.random.default_rng(21)
        slices = [_mask(rng.integers(0, 5, size=(6, 6))) for _ in range(4)]
        spacing = Spacing(1.4, 1.4, 10.0)
        total = simpson_volume(slices, Region.LV_EPI, spacing)
        parts = sum(simpson_volume([s], Region.LV_EPI, spacing) for s in slices)
        assert total == pytest.approx(parts)

    def test_inconsistent_slice_dims_rejected(self):
        with pytest.raises(ValueError, match="dimensions"):
            simpson_volume(
                [_mask(np.zeros((4, 4))), _mask(np.zeros((5, 4)))],
                Region.LV_ENDO,
                Spacing(1.0, 1.0, 8.0),
            )

    def test_no_slices_rejected(self):
        with pytest.raises(ValueError):
            simpson_volume([], Region.LV_ENDO, Spacing(1.0, 1.0, 8.0))


class TestDetectPhases:
    def test_argmin_argmax(self):
        res = detect_phases(VolumeCurve(Region.LV_ENDO, (100.0, 60.0, 80.0)))
        assert (res.es_frame, res.ed_frame, res.degenerate) == (1, 0, False)

    def test_ties_break_earliest(self):
        res = detect_phases(VolumeCurve(Region.LV_ENDO, (50.0, 40.0, 40.0, 50.0)))
        assert (res.es_frame, res.ed_frame) == (1, 0)

    def test_constant_curve_flagged(self):
        with pytest.warns(DegenerateCurveWarning):
            res = detect_phases(VolumeCurve(Region.LV_ENDO, (50.0, 50.0, 50.0)))
        assert res == (0, 0, True)

    def test_sinusoid_hits_analytic_extrema(self):
        frames = np.arange(30)
        vols = 100.0 + 40.0 * np.sin(2 * np.pi * frames / 30.0)
        res = detect_phases(VolumeCurve(Region.LV_ENDO, tuple(vols)))
        assert res.es_frame == int(np.argmin(vols))
        assert res.ed_frame == int(np.argmax(vols))
        # quarter-period extrema of sin over 30 frames
        assert res.ed_frame == 7 if vols[7] >= vols[8] else 8

    def test_single_frame_rejected(self):
        with pytest.raises(ValueError):
            detect_phases(VolumeCurve(Region.LV_ENDO, (10.0,)))

    def test_negative_volume_rejected(self):
        with pytest.raises(ValueError):
            VolumeCurve(Region.LV_ENDO, (10.0, -1.0))


class TestClinicalIndices:
    def test_ef_reference_values(self):
        assert ejection_fraction(291.4, 127.0) == pytest.approx(56.42, abs=0.01)
        assert ejection_fraction(198.0, 64.5) == pytest.approx(67.42, abs=0.01)

    def test_ef_zero_when_no_ejection(self):
        assert ejection_fraction(100.0, 100.0) == 0.0

    def test_ef_scale_invariant(self):
        assert ejection_fraction(3 * 291.4, 3 * 127.0) == pytest.approx(
            ejection_fraction(291.4, 127.0)
        )

    def test_ef_rejects_nonpositive_edv(self):
        with pytest.raises(ValueError):
            ejection_fraction(0.0, 0.0)

    def test_ef_warns_when_esv_exceeds_edv(self):
        with pytest.warns(PhaseOrderWarning):
            assert ejection_fraction(100.0, 110.0) == pytest.approx(-10.0)

    def test_mass_reference_value(self):
        assert ventricular_mass(100.0, 60.0) == 42.0

    def test_mass_zero_wall(self):
        assert ventricular_mass(75.0, 75.0) == 0.0

    def test_density_factors_out(self):
        assert ventricular_mass(2.0, 1.0) / 1.05 == pytest.approx(1.0)

    def test_mass_shift_invariant(self):
        assert ventricular_mass(130.0, 90.0) == pytest.approx(ventricular_mass(70.0, 30.0))

    def test_mass_rejects_cavity_exceeding_envelope(self):
        with pytest.raises(ValueError):
            ventricular_mass(50.0, 60.0)


def _phantom_stack(endo_radii, epi_extra=2, size=32, slices=3, code_endo=1, code_myo=2):
    """Cine of concentric disks; endocardial radius varies per frame."""
    grid = []
    for _ in range(slices):
        row = []
        for r in endo_radii:
            epi = _disk_mask(size, r + epi_extra, code_myo).labels.copy()
            endo = _disk_mask(size, r, code_endo).labels
            epi[endo > 0] = code_endo
            row.append(LabelMask(epi, (1.0, 1.0)))
        grid.append(row)
    return MaskCine(masks=grid, slice_thickness=8.0)


class TestFullReport:
    def test_cylinder_phantom_exact_ef(self):
        radii = (10, 6, 8)  # ED at frame 0, ES at frame 1
        stack = _phantom_stack(radii)
        report = full_report(stack, case_id="phantom")
        px = [np.count_nonzero(_disk_mask(32, r).labels) for r in radii]
        want_ef = 100.0 * (px[0] - px[1]) / px[0]
        assert report.lv is not None
        assert report.lv.es_frame == 1 and report.lv.ed_frame == 0
        assert report.lv.ef_percent == pytest.approx(want_ef, abs=1e-9)
        # simpson arithmetic: pixel count x 1 x 1 x 8 mm3 over 3 slices
        assert report.lv.edv_ml == pytest.approx(3 * px[0] * 8.0 / 1000.0)

    def test_mass_taken_at_end_diastole(self):
        stack = _phantom_stack((10, 6))
        report = full_report(stack)
        endo = report.curve(Region.LV_ENDO).volumes_ml
        epi = report.curve(Region.LV_EPI).volumes_ml
        ed = report.lv.ed_frame
        assert report.lv.mass_g == pytest.approx(1.05 * (epi[ed] - endo[ed]))

    def test_absent_ventricle_reported_none(self):
        stack = _phantom_stack((10, 6))  # LV codes only
        report = full_report(stack)
        assert report.rv is None
        assert report.lv is not None

    def test_all_background_both_absent(self):
        m = _mask(np.zeros((8, 8)))
        stack = MaskCine(masks=[[m, m]], slice_thickness=8.0)
        report = full_report(stack)
        assert report.lv is None and report.rv is None

    def test_esv_never_exceeds_edv(self):
        rng = np.random.default_rng(22)
        for trial in range(10):
            grid = [
                [_mask(rng.integers(0, 5, size=(8, 8))) for _ in range(5)]
                for _ in range(2)
            ]
            report = full_report(MaskCine(masks=grid, slice_thickness=8.0))
            for v in (report.lv, report.rv):
                if v is not None:
                    assert v.esv_ml <= v.edv_ml


class TestReportCsv:
    def test_row_layout(self, tmp_path):
        stack = _phantom_stack((10, 6))
        report = full_report(stack, case_id="c1")
        path = tmp_path / "vols.csv"
        write_report_csv([report], path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == (
            "case_id,lv_esv,lv_edv,lv_ef,lv_sv,lv_vm,"
            "rv_esv,rv_edv,rv_ef,rv_sv,rv_vm,es_frame,ed_frame"
        )
        cells = lines[1].split(",")
        assert cells[0] == "c1"
        assert cells[6:11] == [""] * 5  # RV absent
        assert cells[11:] == ["1", "0"]
