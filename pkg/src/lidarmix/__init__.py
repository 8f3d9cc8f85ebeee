"""lidarmix: multi-dataset LiDAR detection data tooling.

Harmonizes heterogeneous LiDAR object-detection datasets into one
canonical frame and coarse label set, builds balanced multi-dataset
training epochs, performs cross-dataset instance injection, and evaluates
detections with unified 3D IoU / AP@40 / mAP metrics.
"""

from .augment import (
    ClassStats,
    GlobalAugmentParams,
    InjectionPolicy,
    global_augment,
    inject,
    injection_quota,
    instance_augment,
    split_quota,
)
from .bank import InstanceBank, InstanceRecord, build_bank, load_bank, save_bank
from .dataio import (
    Box3D,
    DatasetDescriptor,
    DatasetManifest,
    KittiConversion,
    Scan,
    load_manifest,
    load_scan,
    parse_kitti_label_line,
    save_manifest,
    save_scan,
)
from .errors import ConfigError, DataError, MalformedRecordError, UnmappedClassError
from .evaluation import (
    Detection,
    EvalConfig,
    EvalReport,
    ap40,
    evaluate,
    match_class,
)
from .geometry import (
    bev_corners,
    bev_intersection_area,
    iou3d,
    point_in_box,
    points_in_box,
)
from .harmonize import (
    VolumeClustering,
    crop_front_view,
    fit_volume_clusters,
    harmonize_dataset,
    map_label,
    to_canonical,
)
from .labels import VEHICLE_BY_VOLUME, CoarseLabel
from .rng import derive_rng
from .sampler import EpochPlan, plan_epoch, subsample_eval
from .stats import DatasetStatsReport, compute_stats, volume_histogram
from .synthetic import SyntheticClassSpec, SyntheticSpec, generate_synthetic_dataset

__version__ = "0.1.0"

__all__ = [
    "Box3D",
    "ClassStats",
    "CoarseLabel",
    "ConfigError",
    "DataError",
    "DatasetDescriptor",
    "DatasetManifest",
    "DatasetStatsReport",
    "Detection",
    "EpochPlan",
    "EvalConfig",
    "EvalReport",
    "GlobalAugmentParams",
    "InjectionPolicy",
    "InstanceBank",
    "InstanceRecord",
    "KittiConversion",
    "MalformedRecordError",
    "Scan",
    "SyntheticClassSpec",
    "SyntheticSpec",
    "UnmappedClassError",
    "VEHICLE_BY_VOLUME",
    "VolumeClustering",
    "ap40",
    "bev_corners",
    "bev_intersection_area",
    "build_bank",
    "compute_stats",
    "crop_front_view",
    "derive_rng",
    "evaluate",
    "fit_volume_clusters",
    "generate_synthetic_dataset",
    "global_augment",
    "harmonize_dataset",
    "inject",
    "injection_quota",
    "instance_augment",
    "iou3d",
    "load_bank",
    "load_manifest",
    "load_scan",
    "map_label",
    "match_class",
    "parse_kitti_label_line",
    "plan_epoch",
    "point_in_box",
    "points_in_box",
    "save_bank",
    "save_manifest",
    "save_scan",
    "split_quota",
    "subsample_eval",
    "to_canonical",
    "volume_histogram",
]
