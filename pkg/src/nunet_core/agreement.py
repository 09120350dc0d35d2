"""Case-level agreement between predicted and true clinical parameters.

Statistics operate on a paired series (one truth and one prediction per
case for a named parameter): Spearman rank correlation, RMSD, MAPE,
mean error (bias), and ICC(2,1) — two-way random effects, absolute
agreement, single measurement, with truth and prediction as the two
raters. Ratios or correlations whose defining variance vanishes are
returned as None (undefined), never silently as 0.

Systematic scale differences between segmentation styles (e.g.
papillary-muscle conventions at different sites) are compensated by a
least-squares line through the origin: slope = Σ(pred·truth)/Σ(pred²),
applied as adjusted = slope · pred. Omitting the intercept keeps a zero
prediction at zero volume.

Contest-style scoring follows the public 600-bin convention: each
submitted volume becomes a step cumulative distribution on the integer
grid v ∈ {0..599}, scored as the mean squared difference against the
true volume's step function, averaged over bins and then over cases.
"""

from __future__ import annotations

import csv
import math
import warnings
from contextlib import nullcontext
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "PairedSeries",
    "AgreementReport",
    "StyleAdjustment",
    "VolumeRangeWarning",
    "spearman_rho",
    "error_stats",
    "ErrorStats",
    "icc",
    "fit_no_intercept",
    "apply_adjustment",
    "crps_case",
    "crps_score",
    "CRPS_BINS",
    "compute_report",
    "read_paired_csv",
    "write_scatter_csv",
    "format_agreement_text",
]

# Integer volume grid of the contest convention: v = 0..599 ml.
CRPS_BINS = 600


class VolumeRangeWarning(UserWarning):
    """A volume fell outside the scoring grid and was clamped."""


@dataclass(frozen=True)
class PairedSeries:
    """Truth/prediction pairs for one clinical parameter.

    Length 1 is permitted (single-case error stats are meaningful);
    individual statistics impose their own minimum lengths.
    """

    truth: tuple[float, ...]
    pred: tuple[float, ...]
    parameter_name: str = ""

    def __post_init__(self) -> None:
        t = tuple(float(v) for v in self.truth)
        p = tuple(float(v) for v in self.pred)
        if len(t) != len(p):
            raise ValueError(f"length mismatch: {len(t)} truth vs {len(p)} pred")
        if len(t) < 1:
            raise ValueError("series must hold at least one pair")
        if not all(map(math.isfinite, t + p)):
            raise ValueError("series values must be finite")
        object.__setattr__(self, "truth", t)
        object.__setattr__(self, "pred", p)

    @property
    def n(self) -> int:
        return len(self.truth)


def spearman_rho(s: PairedSeries) -> Optional[float]:
    """Spearman rank correlation: Pearson correlation of average ranks.

    Needs n >= 2; a constant series has no rank ordering and yields None.
    """
    if s.n < 2:
        raise ValueError("spearman needs at least two pairs")
    rt = rankdata(s.truth)
    rp = rankdata(s.pred)
    st, sp = rt.std(), rp.std()
    if st == 0.0 or sp == 0.0:
        return None
    cov = ((rt - rt.mean()) * (rp - rp.mean())).mean()
    return float(cov / (st * sp))


class ErrorStats(NamedTuple):
    """Root-mean-square deviation, mean |percent| error, mean error (bias)."""

    rmsd: float
    mape: Optional[float]
    me: float


def error_stats(s: PairedSeries) -> ErrorStats:
    """RMSD, MAPE (percent), and mean error of pred against truth.

    MAPE is None when any truth value is 0; the other two are always
    computed. A single pair is allowed.
    """
    t = np.asarray(s.truth)
    p = np.asarray(s.pred)
    diff = p - t
    rmsd = float(np.sqrt(np.mean(diff**2)))
    me = float(np.mean(diff))
    if np.any(t == 0.0):
        mape: Optional[float] = None
    else:
        mape = float(100.0 * np.mean(np.abs(diff) / np.abs(t)))
    return ErrorStats(rmsd=rmsd, mape=mape, me=me)


def icc(s: PairedSeries) -> Optional[float]:
    """ICC(2,1): two-way random effects, absolute agreement, single rater.

    Cases are rows, the two raters (truth, prediction) are columns:

        (MS_R - MS_E) / (MS_R + (k-1)·MS_E + (k/n)·(MS_C - MS_E)),  k = 2.

    Needs n >= 3. Zero between-case variance (or a vanishing
    denominator) yields None.
    """
    if s.n < 3:
        raise ValueError("icc needs at least three pairs")
    data = np.column_stack([s.truth, s.pred])
    n, k = data.shape
    grand = data.mean()
    row_means = data.mean(axis=1)
    col_means = data.mean(axis=0)

    ss_rows = k * np.sum((row_means - grand) ** 2)
    ss_cols = n * np.sum((col_means - grand) ** 2)
    resid = data - row_means[:, None] - col_means[None, :] + grand
    ss_err = np.sum(resid**2)

    ms_r = ss_rows / (n - 1)
    ms_c = ss_cols / (k - 1)
    ms_e = ss_err / ((n - 1) * (k - 1))

    if ms_r == 0.0:
        return None
    denom = ms_r + (k - 1) * ms_e + (k / n) * (ms_c - ms_e)
    if denom == 0.0:
        return None
    return float((ms_r - ms_e) / denom)


@dataclass(frozen=True)
class StyleAdjustment:
    """Through-the-origin conversion factor between segmentation styles."""

    slope: float
    fit_n: int
    fit_parameter: str = ""

    def __post_init__(self) -> None:
        if not math.isfinite(self.slope):
            raise ValueError("slope must be finite")
        if self.fit_n < 2:
            raise ValueError("fit needs at least two pairs")


def fit_no_intercept(train: PairedSeries) -> StyleAdjustment:
    """Least squares line through the origin, prediction as regressor.

    slope = Σ(pred·truth) / Σ(pred²). Requires at least two pairs and a
    not-all-zero prediction vector.
    """
    if train.n < 2:
        raise ValueError("fit needs at least two pairs")
    p = np.asarray(train.pred)
    t = np.asarray(train.truth)
    denom = float(np.sum(p * p))
    if denom == 0.0:
        raise ValueError("cannot fit a slope against all-zero predictions")
    return StyleAdjustment(
        slope=float(np.sum(p * t) / denom), fit_n=train.n, fit_parameter=train.parameter_name
    )


def apply_adjustment(adj: StyleAdjustment, pred: float) -> float:
    """Convert one predicted value into the fitted target style."""
    return adj.slope * float(pred)


def _step_cdf_counts(pred: float, truth: float) -> int:
    """Number of grid points where the two step CDFs disagree."""
    # P(v) = 1 for v >= pred; H(v) = 1 for v >= truth. They differ on the
    # integers between the two thresholds.
    lo, hi = sorted((pred, truth))
    first = math.ceil(lo)  # first integer at or above the lower threshold
    last = math.ceil(hi) - 1  # last integer strictly below the upper one
    first = max(first, 0)
    last = min(last, CRPS_BINS - 1)
    return max(last - first + 1, 0)


def _clamped(value: float, what: str) -> float:
    if 0.0 <= value <= CRPS_BINS - 1:
        return value
    clamped = min(max(value, 0.0), float(CRPS_BINS - 1))
    warnings.warn(
        f"{what} volume {value} outside [0, {CRPS_BINS - 1}]; clamped to {clamped}",
        VolumeRangeWarning,
        stacklevel=3,
    )
    return clamped


def crps_case(pred_ml: float, true_ml: float) -> float:
    """One case's score: mean squared step-CDF difference over 600 bins."""
    pred = _clamped(float(pred_ml), "predicted")
    truth = _clamped(float(true_ml), "true")
    return _step_cdf_counts(pred, truth) / CRPS_BINS


def crps_score(cases: Sequence[tuple[float, float]]) -> float:
    """Mean of crps_case over (predicted_ml, true_ml) pairs.

    Submissions list each case twice (once per cardiac phase); passing
    both pairs here reproduces the contest's average over phases.
    """
    if len(cases) == 0:
        raise ValueError("need at least one case")
    return float(np.mean([crps_case(p, t) for p, t in cases]))


@dataclass(frozen=True)
class AgreementReport:
    """All agreement statistics of one paired series."""

    parameter_name: str
    n: int
    rho: Optional[float]
    rmsd: float
    mape: Optional[float]
    me: float
    icc: Optional[float]


def compute_report(s: PairedSeries) -> AgreementReport:
    """Evaluate every agreement statistic its length permits.

    Statistics below their minimum n (rho: 2, icc: 3) come back None.
    """
    rho = spearman_rho(s) if s.n >= 2 else None
    stats = error_stats(s)
    icc_val = icc(s) if s.n >= 3 else None
    return AgreementReport(
        parameter_name=s.parameter_name,
        n=s.n,
        rho=rho,
        rmsd=stats.rmsd,
        mape=stats.mape,
        me=stats.me,
        icc=icc_val,
    )


def read_paired_csv(path, parameter_name: str = "") -> tuple[tuple[str, ...], PairedSeries]:
    """Read (case_id, truth, pred) rows; returns case ids and the series."""
    case_ids: list[str] = []
    truth: list[float] = []
    pred: list[float] = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["case_id", "truth", "pred"]:
            raise ValueError(f"{path}: expected header 'case_id,truth,pred', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            case_ids.append(row[0])
            try:
                truth.append(float(row[1]))
                pred.append(float(row[2]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric value") from exc
    if not case_ids:
        raise ValueError(f"{path}: no data rows")
    series = PairedSeries(truth=tuple(truth), pred=tuple(pred), parameter_name=parameter_name)
    return tuple(case_ids), series


def write_scatter_csv(s: PairedSeries, adj: Optional[StyleAdjustment], path) -> None:
    """Plot-ready scatter: truth, pred, and the fitted line's value at pred.

    With no adjustment the fitted column is just pred (slope 1).
    ``path`` may also be an open text stream.
    """
    slope = 1.0 if adj is None else adj.slope
    sink = nullcontext(path) if hasattr(path, "write") else open(
        path, "w", newline="", encoding="utf-8"
    )
    with sink as fh:
        writer = csv.writer(fh)
        writer.writerow(["truth", "pred", "fitted"])
        for t, p in zip(s.truth, s.pred):
            writer.writerow([f"{t:.6f}", f"{p:.6f}", f"{slope * p:.6f}"])


def _fmt(v: Optional[float], unit: str = "") -> str:
    return "undefined" if v is None else f"{v:.4f}{unit}"


def format_agreement_text(report: AgreementReport, adj: Optional[StyleAdjustment] = None) -> str:
    """Human-readable agreement summary, one statistic per line."""
    name = report.parameter_name or "parameter"
    lines = [
        f"{name}: n={report.n}",
        f"  spearman rho: {_fmt(report.rho)}",
        f"  rmsd:         {_fmt(report.rmsd)}",
        f"  mape:         {_fmt(report.mape, ' %')}",
        f"  mean error:   {_fmt(report.me)}",
        f"  icc(2,1):     {_fmt(report.icc)}",
    ]
    if adj is not None:
        lines.append(f"  style slope:  {adj.slope:.6f} (fit on n={adj.fit_n})")
    return "\n".join(lines)
