"""Ventricular volumes, phase detection, and derived clinical indices.

Volumes use Simpson's summation: each short-axis slice contributes its
in-plane cross-section area times the slice-to-slice spacing (slice
thickness plus inter-slice gap), and slices sum to the cavity volume.
Areas come straight from label counts, so a region's volume is simply
``pixel_count * dx * dy * dz``, reported in milliliters
(1 ml = 1000 mm^3).

Phases are read off a ventricle's endocardial (blood pool) volume curve
across the cine frames: end-diastole is the frame of maximum volume,
end-systole the frame of minimum. Detection runs per ventricle, so LV
and RV phase skew cannot corrupt either ventricle's numbers. Ties
resolve to the earliest frame; a constant curve is flagged degenerate.

Derived indices: stroke volume SV = EDV - ESV, ejection fraction
EF = 100 * SV / EDV (percent), and myocardial mass
mass = 1.05 g/ml * (V_epi - V_endo) where V_epi is the volume enclosed
by the epicardial contour (cavity plus myocardium) and V_endo the
cavity alone. Mass is quoted at end-diastole.
"""

from __future__ import annotations

import csv
import enum
import warnings
from contextlib import nullcontext
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .imaging import LV_MYO, LV_POOL, RV_MYO, RV_POOL, MaskCine, Spacing

__all__ = [
    "Region",
    "region_codes",
    "MYOCARDIUM_DENSITY_G_PER_ML",
    "DegenerateCurveWarning",
    "PhaseOrderWarning",
    "region_pixels",
    "simpson_volume",
    "VolumeCurve",
    "PhaseResult",
    "detect_phases",
    "ejection_fraction",
    "ventricular_mass",
    "VentricleReport",
    "VolumeReport",
    "full_report",
    "write_report_csv",
    "format_report_text",
]

# Assumed myocardial tissue density, grams per milliliter.
MYOCARDIUM_DENSITY_G_PER_ML = 1.05


class DegenerateCurveWarning(UserWarning):
    """A volume curve is constant; detected phases carry no meaning."""


class PhaseOrderWarning(UserWarning):
    """ESV exceeded EDV; the phases were probably misdetected."""


class Region(enum.Enum):
    """Anatomical regions measurable from a label mask.

    ENDO regions are the blood cavities; EPI regions are the full area
    enclosed by the epicardial border, i.e. cavity plus myocardium.
    """

    LV_ENDO = "lv_endo"
    LV_EPI = "lv_epi"
    RV_ENDO = "rv_endo"
    RV_EPI = "rv_epi"


_REGION_CODES: dict[Region, tuple[int, ...]] = {
    Region.LV_ENDO: (LV_POOL,),
    Region.LV_EPI: (LV_POOL, LV_MYO),
    Region.RV_ENDO: (RV_POOL,),
    Region.RV_EPI: (RV_POOL, RV_MYO),
}


def region_codes(region: Region) -> tuple[int, ...]:
    """Label codes making up ``region``."""
    return _REGION_CODES[region]


def region_pixels(mask, region: Region) -> int:
    """Count the pixels of ``mask`` belonging to ``region``."""
    codes = _REGION_CODES[region]
    labels = mask.labels
    hit = labels == codes[0]
    for code in codes[1:]:
        hit |= labels == code
    return int(np.count_nonzero(hit))


def simpson_volume(masks: Sequence, region: Region, spacing: Spacing) -> float:
    """Simpson's-rule volume of ``region`` over a stack of slices, in ml.

    ``masks`` holds one label mask per short-axis slice at a single time
    point; ``spacing`` supplies the in-plane pixel size and the
    slice-to-slice distance dz. Slices must share dimensions.
    """
    if len(masks) == 0:
        raise ValueError("need at least one slice")
    dims = {(m.height, m.width) for m in masks}
    if len(dims) > 1:
        raise ValueError(f"slices disagree on dimensions: {sorted(dims)}")
    total_px = sum(region_pixels(m, region) for m in masks)
    return total_px * spacing.voxel_volume_mm3 / 1000.0


@dataclass(frozen=True)
class VolumeCurve:
    """Volume of one region per cine frame, in ml."""

    region: Region
    volumes_ml: tuple[float, ...]

    def __post_init__(self) -> None:
        vols = tuple(float(v) for v in self.volumes_ml)
        if len(vols) < 1:
            raise ValueError("a volume curve needs at least one frame")
        if any(v < 0 for v in vols):
            raise ValueError("volumes must be non-negative")
        object.__setattr__(self, "volumes_ml", vols)

    @property
    def n_frames(self) -> int:
        return len(self.volumes_ml)


class PhaseResult(NamedTuple):
    """Frames of minimum (end-systole) and maximum (end-diastole) volume.

    ``degenerate`` is True for a constant curve, where the (0, 0) result
    carries no physiological meaning.
    """

    es_frame: int
    ed_frame: int
    degenerate: bool


def detect_phases(curve: VolumeCurve) -> PhaseResult:
    """Locate end-systole and end-diastole on a volume curve.

    Requires at least two frames. Ties resolve to the earliest frame; a
    constant curve yields (0, 0) flagged degenerate, with a
    DegenerateCurveWarning.
    """
    if curve.n_frames < 2:
        raise ValueError("phase detection needs at least two frames")
    arr = np.asarray(curve.volumes_ml)
    es = int(np.argmin(arr))
    ed = int(np.argmax(arr))
    degenerate = bool(arr[es] == arr[ed])
    if degenerate:
        warnings.warn(
            f"volume curve for {curve.region.value} is constant; phases are meaningless",
            DegenerateCurveWarning,
            stacklevel=2,
        )
    return PhaseResult(es_frame=es, ed_frame=ed, degenerate=degenerate)


def ejection_fraction(edv_ml: float, esv_ml: float) -> float:
    """EF in percent: 100 * (EDV - ESV) / EDV.

    Requires EDV > 0 and ESV >= 0. ESV > EDV is not an error — it returns
    a negative EF with a PhaseOrderWarning, since it usually means the
    phases were swapped or misdetected.
    """
    if edv_ml <= 0:
        raise ValueError(f"end-diastolic volume must be positive, got {edv_ml}")
    if esv_ml < 0:
        raise ValueError(f"end-systolic volume must be non-negative, got {esv_ml}")
    if esv_ml > edv_ml:
        warnings.warn(
            f"ESV {esv_ml} exceeds EDV {edv_ml}; EF is negative",
            PhaseOrderWarning,
            stacklevel=2,
        )
    return 100.0 * (edv_ml - esv_ml) / edv_ml


def ventricular_mass(v_epi_ml: float, v_endo_ml: float) -> float:
    """Myocardial mass in grams from epicardial and cavity volumes in ml.

    Requires v_epi >= v_endo >= 0 (the cavity cannot exceed its envelope).
    """
    if v_endo_ml < 0 or v_epi_ml < v_endo_ml:
        raise ValueError(
            f"need v_epi >= v_endo >= 0, got v_epi={v_epi_ml}, v_endo={v_endo_ml}"
        )
    return MYOCARDIUM_DENSITY_G_PER_ML * (v_epi_ml - v_endo_ml)


@dataclass(frozen=True)
class VentricleReport:
    """Phase volumes and derived indices for one ventricle."""

    esv_ml: float
    edv_ml: float
    ef_percent: float
    sv_ml: float
    mass_g: float
    es_frame: int
    ed_frame: int
    degenerate: bool


@dataclass(frozen=True)
class VolumeReport:
    """Full volumetric work-up of one cine case.

    A ventricle whose blood pool never appears in any frame is reported
    as None (absent). All four per-region volume curves are retained for
    inspection.
    """

    case_id: str
    lv: Optional[VentricleReport]
    rv: Optional[VentricleReport]
    curves: tuple[VolumeCurve, ...]

    def curve(self, region: Region) -> VolumeCurve:
        for c in self.curves:
            if c.region is region:
                return c
        raise KeyError(region)


def _measure_ventricle(endo: VolumeCurve, epi: VolumeCurve) -> Optional[VentricleReport]:
    if max(endo.volumes_ml) == 0.0:
        return None
    phases = detect_phases(endo)
    esv = endo.volumes_ml[phases.es_frame]
    edv = endo.volumes_ml[phases.ed_frame]
    ef = ejection_fraction(edv, esv)
    mass = ventricular_mass(epi.volumes_ml[phases.ed_frame], edv)
    return VentricleReport(
        esv_ml=esv,
        edv_ml=edv,
        ef_percent=ef,
        sv_ml=edv - esv,
        mass_g=mass,
        es_frame=phases.es_frame,
        ed_frame=phases.ed_frame,
        degenerate=phases.degenerate,
    )


def full_report(stack: MaskCine, spacing: Spacing | None = None, case_id: str = "case") -> VolumeReport:
    """Measure one cine case end to end.

    Builds per-frame Simpson volumes for all four regions, then detects
    phases and derives ESV/EDV/EF/SV/mass per ventricle on its own
    endocardial curve. ``spacing`` defaults to the stack's own.
    """
    if spacing is None:
        spacing = stack.spacing()
    curves = {}
    for region in Region:
        vols = [simpson_volume(stack.frame(f), region, spacing) for f in range(stack.n_frames)]
        curves[region] = VolumeCurve(region=region, volumes_ml=tuple(vols))

    lv = _measure_ventricle(curves[Region.LV_ENDO], curves[Region.LV_EPI])
    rv = _measure_ventricle(curves[Region.RV_ENDO], curves[Region.RV_EPI])
    return VolumeReport(case_id=case_id, lv=lv, rv=rv, curves=tuple(curves.values()))


CSV_FIELDS = (
    "case_id",
    "lv_esv",
    "lv_edv",
    "lv_ef",
    "lv_sv",
    "lv_vm",
    "rv_esv",
    "rv_edv",
    "rv_ef",
    "rv_sv",
    "rv_vm",
    "es_frame",
    "ed_frame",
)


def _ventricle_cells(v: Optional[VentricleReport]) -> list[str]:
    if v is None:
        return [""] * 5
    return [f"{x:.4f}" for x in (v.esv_ml, v.edv_ml, v.ef_percent, v.sv_ml, v.mass_g)]


def write_report_csv(reports: Sequence[VolumeReport], path) -> None:
    """Write one CSV row per case; volumes in ml, EF in percent, mass in g.

    Absent ventricles leave their cells empty. The single es/ed frame
    pair is the left ventricle's (the right's when only it is present).
    ``path`` may also be an open text stream.
    """
    sink = nullcontext(path) if hasattr(path, "write") else open(
        path, "w", newline="", encoding="utf-8"
    )
    with sink as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for r in reports:
            lead = r.lv if r.lv is not None else r.rv
            frames = ["", ""] if lead is None else [lead.es_frame, lead.ed_frame]
            writer.writerow([r.case_id] + _ventricle_cells(r.lv) + _ventricle_cells(r.rv) + frames)


def format_report_text(report: VolumeReport) -> str:
    """Human-readable one-case summary."""
    lines = [f"case {report.case_id}:"]
    for name, v in (("LV", report.lv), ("RV", report.rv)):
        if v is None:
            lines.append(f"  {name}: absent (no blood-pool pixels in any frame)")
            continue
        tag = " [degenerate curve]" if v.degenerate else ""
        lines.append(
            f"  {name}: ESV {v.esv_ml:.1f} ml (frame {v.es_frame}), "
            f"EDV {v.edv_ml:.1f} ml (frame {v.ed_frame}), SV {v.sv_ml:.1f} ml, "
            f"EF {v.ef_percent:.1f}%, mass {v.mass_g:.1f} g{tag}"
        )
    return "\n".join(lines)
