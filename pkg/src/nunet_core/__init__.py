"""Cardiac cine-MRI toolkit.

Deterministic image augmentation with a parallel producer-consumer
pipeline, Simpson's-method ventricular volumetrics and clinical indices,
segmentation overlap and agreement statistics, an analyzable
encoder-decoder topology model, and bit-exact NIfTI-1 I/O.
"""

from .imaging import (
    BACKGROUND,
    LV_MYO,
    LV_POOL,
    RV_MYO,
    RV_POOL,
    CineStack,
    Image2D,
    LabelMask,
    MaskCine,
    Spacing,
    resize_mask_to,
    resize_to,
)
from .augment import (
    AffineParams,
    AugmentConfig,
    AugmentSpec,
    DeformCoeffs,
    backward_map,
    config_from_mapping,
    eval_deformation,
    load_augment_config,
    sample_spec,
    warp_image,
    warp_mask,
)
from .pipeline import (
    AugmentedBatch,
    AugmentedSample,
    BatchRequest,
    PipelineError,
    PipelineStats,
    run_pipeline,
)
from .volumetrics import (
    MYOCARDIUM_DENSITY_G_PER_ML,
    Region,
    VolumeCurve,
    VolumeReport,
    detect_phases,
    ejection_fraction,
    full_report,
    region_pixels,
    simpson_volume,
    ventricular_mass,
)
from .seg_metrics import ConfusionCounts, VoxelSet, confusion, dice, overlap
from .agreement import (
    AgreementReport,
    PairedSeries,
    StyleAdjustment,
    apply_adjustment,
    compute_report,
    crps_case,
    crps_score,
    error_stats,
    fit_no_intercept,
    icc,
    spearman_rho,
)
from .topology import (
    LayerSpec,
    Topology,
    TopologyConfig,
    TrainingRecipe,
    build_topology,
    count_params,
    export_recipe,
    infer_shapes,
    parse_recipe,
)
from .nifti import (
    BadMagicError,
    InconsistentDimsError,
    NiftiError,
    TruncatedFileError,
    UnsupportedDatatypeError,
    UnsupportedEndiannessError,
    read_nifti,
    read_volume_table,
    write_nifti,
)

__version__ = "0.1.0"
