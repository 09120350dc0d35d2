"""Command-line batch workflows over the library.

Subcommands map one-to-one onto capabilities: ``augment`` (parallel
deterministic augmentation of NIfTI image/mask pairs), ``volumes``
(Simpson volumetrics CSV from mask stacks), ``metrics`` (per-case
overlap/classification CSV between predicted and true masks), ``agree``
(agreement statistics with optional no-intercept style adjustment),
``crps`` (600-bin step-CDF contest scoring of paired volumes), and
``topology`` (layer table, parameter count, training-recipe manifest).

Every run is deterministic given its inputs, flags, and seed; the seed
defaults to a fixed constant. Data goes to files or standard output,
diagnostics to standard error, and the exit code is 0 exactly when no
error occurred.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import agreement, seg_metrics, volumetrics
from .augment import DEFAULT_SEED, AugmentConfig, load_augment_config
from .imaging import CineStack, MaskCine, Spacing
from .nifti import read_nifti, write_nifti
from .pipeline import BatchRequest, run_pipeline
from .topology import (
    TopologyConfig,
    TrainingRecipe,
    build_topology,
    export_recipe,
    format_layer_table,
)

__all__ = ["main"]


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _nii_files(directory: Path) -> list[Path]:
    files = sorted(p for p in directory.iterdir() if p.suffix == ".nii")
    if not files:
        raise FileNotFoundError(f"no .nii files in {directory}")
    return files


def _matched_pairs(a_dir: Path, b_dir: Path) -> list[tuple[str, Path, Path]]:
    """(stem, a_path, b_path) for files present in both directories."""
    pairs = []
    for a_path in _nii_files(a_dir):
        b_path = b_dir / a_path.name
        if not b_path.exists():
            raise FileNotFoundError(f"{b_path} missing for {a_path.name}")
        pairs.append((a_path.stem, a_path, b_path))
    return pairs


# ---------------------------------------------------------------- augment


def _augment_args(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser(
        "augment",
        help="augment NIfTI image/mask pairs into deterministic variants",
    )
    p.add_argument("images_dir", type=Path, help="directory of image .nii files")
    p.add_argument("masks_dir", type=Path, help="directory of mask .nii files (same names)")
    p.add_argument("--config", type=Path, help="JSON augmentation config")
    p.add_argument("--n-per-sample", type=int, default=1, help="variants per input case")
    p.add_argument("--seed", type=int, default=None, help="random stream seed")
    p.add_argument("--epsilon", type=float, default=None, help="deformation bound override")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--queue-depth", type=int, default=2)
    p.add_argument("--out", type=Path, required=True, help="output directory")


def _cmd_augment(args: argparse.Namespace) -> int:
    if args.config is not None:
        config, seed = load_augment_config(args.config)
    else:
        config, seed = AugmentConfig(), DEFAULT_SEED
    if args.epsilon is not None:
        config = AugmentConfig(
            epsilon=args.epsilon,
            rotation_range=config.rotation_range,
            scale_range=config.scale_range,
            shear_range=config.shear_range,
            translation_range=config.translation_range,
            flip_prob_x=config.flip_prob_x,
            flip_prob_y=config.flip_prob_y,
        )
    if args.seed is not None:
        seed = args.seed
    if args.n_per_sample < 1:
        return _fail("--n-per-sample must be >= 1")

    pairs = _matched_pairs(args.images_dir, args.masks_dir)
    cases = []
    dataset = []
    for stem, img_path, mask_path in pairs:
        images = read_nifti(img_path)
        masks = read_nifti(mask_path, as_mask=True)
        if (masks.n_slices, masks.n_frames) != (images.n_slices, images.n_frames):
            return _fail(f"{stem}: image and mask grids disagree")
        first = len(dataset)
        for s in range(images.n_slices):
            for f in range(images.n_frames):
                dataset.append((images.images[s][f], masks.masks[s][f]))
        cases.append((stem, images, masks, first))

    requests = []
    batch_meta = []  # (stem, copy, n_slices, n_frames, thickness, gap)
    counter = 0
    for stem, images, masks, first in cases:
        n_cells = images.n_slices * images.n_frames
        for copy in range(args.n_per_sample):
            requests.append(
                BatchRequest(
                    dataset_indices=tuple(range(first, first + n_cells)),
                    sample_indices=tuple(range(counter, counter + n_cells)),
                    seed=seed,
                )
            )
            counter += n_cells
            batch_meta.append(
                (stem, copy, images.n_slices, images.n_frames,
                 images.slice_thickness, images.slice_gap)
            )

    img_out = args.out / "images"
    mask_out = args.out / "masks"
    img_out.mkdir(parents=True, exist_ok=True)
    mask_out.mkdir(parents=True, exist_ok=True)

    def consume(batch) -> None:
        stem, copy, n_slices, n_frames, thickness, gap = batch_meta[batch.batch_index]
        img_grid = [
            [batch.samples[s * n_frames + f].image for f in range(n_frames)]
            for s in range(n_slices)
        ]
        mask_grid = [
            [batch.samples[s * n_frames + f].mask for f in range(n_frames)]
            for s in range(n_slices)
        ]
        name = f"{stem}_a{copy}.nii"
        write_nifti(
            CineStack(images=img_grid, slice_thickness=thickness, slice_gap=gap),
            img_out / name,
            "float32",
        )
        write_nifti(
            MaskCine(masks=mask_grid, slice_thickness=thickness, slice_gap=gap),
            mask_out / name,
            "uint8",
        )

    stats = run_pipeline(
        dataset,
        requests,
        config=config,
        workers=args.workers,
        queue_depth=args.queue_depth,
        consumer=consume,
    )
    print(
        f"batches produced:   {stats.batches_produced}\n"
        f"producer busy time: {stats.producer_busy_time:.3f} s\n"
        f"consumer wait time: {stats.consumer_wait_time:.3f} s\n"
        f"wall time:          {stats.wall_time:.3f} s"
    )
    return 0


# ---------------------------------------------------------------- volumes


def _volumes_args(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("volumes", help="Simpson volumetrics CSV from mask stacks")
    p.add_argument("masks_dir", type=Path, help="directory of mask .nii files")
    p.add_argument("--dx", type=float, default=None, help="override pixel spacing dx (mm)")
    p.add_argument("--dy", type=float, default=None, help="override pixel spacing dy (mm)")
    p.add_argument("--dz", type=float, default=None, help="override slice spacing dz (mm)")
    p.add_argument("--out", type=Path, default=None, help="CSV path (default: stdout)")


def _cmd_volumes(args: argparse.Namespace) -> int:
    reports = []
    for path in _nii_files(args.masks_dir):
        stack = read_nifti(path, as_mask=True)
        spacing = stack.spacing()
        spacing = Spacing(
            dx=args.dx if args.dx is not None else spacing.dx,
            dy=args.dy if args.dy is not None else spacing.dy,
            dz=args.dz if args.dz is not None else spacing.dz,
            dt=spacing.dt,
        )
        reports.append(volumetrics.full_report(stack, spacing, case_id=path.stem))
    volumetrics.write_report_csv(reports, args.out if args.out else sys.stdout)
    for report in reports:
        print(volumetrics.format_report_text(report), file=sys.stderr)
    return 0


# ---------------------------------------------------------------- metrics


def _metrics_args(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("metrics", help="overlap metrics between predicted and true masks")
    p.add_argument("pred_dir", type=Path, help="directory of predicted mask .nii files")
    p.add_argument("truth_dir", type=Path, help="directory of true mask .nii files")
    p.add_argument("--out", type=Path, default=None, help="CSV path (default: stdout)")


def _phase_frames(truth: MaskCine) -> list[tuple[str, int]]:
    """(phase label, frame) pairs to evaluate: ES/ED when detectable."""
    if truth.n_frames < 2:
        return [("all", 0)]
    report = volumetrics.full_report(truth)
    lead = report.lv if report.lv is not None else report.rv
    if lead is None or lead.degenerate:
        return [("all", 0)]
    return [("ES", lead.es_frame), ("ED", lead.ed_frame)]


def _cmd_metrics(args: argparse.Namespace) -> int:
    rows = []
    for stem, pred_path, truth_path in _matched_pairs(args.pred_dir, args.truth_dir):
        pred = read_nifti(pred_path, as_mask=True)
        truth = read_nifti(truth_path, as_mask=True)
        if (pred.n_slices, pred.n_frames) != (truth.n_slices, truth.n_frames):
            return _fail(f"{stem}: predicted and true grids disagree")
        for phase, frame in _phase_frames(truth):
            for region in volumetrics.Region:
                x = seg_metrics.VoxelSet(masks=pred.frame(frame), region=region)
                y = seg_metrics.VoxelSet(masks=truth.frame(frame), region=region)
                counts = seg_metrics.confusion(x, y)
                rows.append(
                    seg_metrics.MetricRow(
                        case_id=stem,
                        phase=phase,
                        region=region,
                        dice=seg_metrics.dice(x, y),
                        overlap=seg_metrics.overlap(x, y),
                        accuracy=counts.accuracy,
                        precision=counts.precision,
                        recall=counts.recall,
                        specificity=counts.specificity,
                    )
                )
    seg_metrics.write_metrics_csv(rows, args.out if args.out else sys.stdout)
    return 0


# ---------------------------------------------------------------- agree


def _agree_args(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("agree", help="agreement statistics for a paired CSV")
    p.add_argument("paired_csv", type=Path, help="CSV with header case_id,truth,pred")
    p.add_argument(
        "--fit",
        type=Path,
        default=None,
        help="paired CSV to fit the no-intercept style adjustment on",
    )
    p.add_argument("--name", default="parameter", help="parameter tag for the report")
    p.add_argument("--out", type=Path, default=None, help="scatter CSV path (default: stdout)")


def _cmd_agree(args: argparse.Namespace) -> int:
    _, series = agreement.read_paired_csv(args.paired_csv, parameter_name=args.name)
    adj = None
    if args.fit is not None:
        _, fit_series = agreement.read_paired_csv(args.fit, parameter_name=args.name)
        adj = agreement.fit_no_intercept(fit_series)
        series = agreement.PairedSeries(
            truth=series.truth,
            pred=tuple(agreement.apply_adjustment(adj, p) for p in series.pred),
            parameter_name=series.parameter_name,
        )
    report = agreement.compute_report(series)
    print(agreement.format_agreement_text(report, adj))
    agreement.write_scatter_csv(series, None, args.out if args.out else sys.stdout)
    return 0


# ---------------------------------------------------------------- crps


def _crps_args(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("crps", help="600-bin step-CDF score for paired volumes")
    p.add_argument("paired_csv", type=Path, help="CSV with header case_id,truth,pred")
    p.add_argument("--out", type=Path, default=None, help="per-case CSV path")


def _cmd_crps(args: argparse.Namespace) -> int:
    case_ids, series = agreement.read_paired_csv(args.paired_csv)
    per_case = [
        (cid, agreement.crps_case(p, t))
        for cid, t, p in zip(case_ids, series.truth, series.pred)
    ]
    score = agreement.crps_score(list(zip(series.pred, series.truth)))
    if args.out is not None:
        import csv as _csv

        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["case_id", "crps"])
            for cid, value in per_case:
                writer.writerow([cid, f"{value:.6f}"])
    else:
        for cid, value in per_case:
            print(f"{cid}: {value:.6f}")
    print(f"score: {score:.6f}")
    return 0


# ---------------------------------------------------------------- topology


def _topology_args(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("topology", help="layer table, parameter count, recipe manifest")
    p.add_argument("--config", type=Path, default=None, help="JSON topology config")
    p.add_argument("--out", type=Path, default=None, help="write the training recipe manifest here")


def _load_topology_config(path: Path | None) -> TopologyConfig:
    if path is None:
        return TopologyConfig()
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    defaults = TopologyConfig()
    known = {
        "input_size",
        "depth",
        "base_channels",
        "channel_growth",
        "in_channels",
        "out_channels",
    }
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    size = raw.get("input_size", list(defaults.input_size))
    return TopologyConfig(
        input_size=(int(size[0]), int(size[1])),
        depth=int(raw.get("depth", defaults.depth)),
        base_channels=int(raw.get("base_channels", defaults.base_channels)),
        channel_growth=int(raw.get("channel_growth", defaults.channel_growth)),
        in_channels=int(raw.get("in_channels", defaults.in_channels)),
        out_channels=int(raw.get("out_channels", defaults.out_channels)),
    )


def _cmd_topology(args: argparse.Namespace) -> int:
    config = _load_topology_config(args.config)
    graph = build_topology(config)
    print(format_layer_table(graph))
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(export_recipe(TrainingRecipe()))
    return 0


# ---------------------------------------------------------------- entry


_COMMANDS = {
    "augment": _cmd_augment,
    "volumes": _cmd_volumes,
    "metrics": _cmd_metrics,
    "agree": _cmd_agree,
    "crps": _cmd_crps,
    "topology": _cmd_topology,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nunet",
        description="cardiac cine-MRI toolkit: augmentation, volumetrics, metrics, agreement",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _augment_args(sub)
    _volumes_args(sub)
    _metrics_args(sub)
    _agree_args(sub)
    _crps_args(sub)
    _topology_args(sub)

    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
