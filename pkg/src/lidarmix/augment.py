"""Whole-scan augmentations and cross-dataset instance injection.

Injection tops every scan up toward a per-class target count: the quota
for class c on a scan from dataset i is the target (by default the highest
per-scan mean among the training datasets) minus dataset i's own mean,
split evenly across all training banks. Drawn instances are re-posed with
instance-level augmentations and accepted only if they overlap nothing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bank import InstanceBank, InstanceRecord, globalize_points
from .dataio import Scan
from .errors import ConfigError, DataError
from .geometry import Box3D, iou3d
from .labels import ALL_LABELS, CoarseLabel
from .stats import DatasetStatsReport


@dataclass
class ClassStats:
    """Per-dataset mean instances per scan, keyed by coarse label."""

    dataset_id: str
    mean_per_scan: dict[CoarseLabel, float] = field(default_factory=dict)

    def get(self, label: CoarseLabel) -> float:
        return self.mean_per_scan.get(label, 0.0)

    @classmethod
    def from_report(cls, report: DatasetStatsReport) -> "ClassStats":
        return cls(
            dataset_id=report.dataset_id,
            mean_per_scan={
                label: entry.mean_instances_per_scan
                for label, entry in report.classes.items()
            },
        )


@dataclass
class InjectionPolicy:
    """Targets, instance-augmentation ranges, and placement rules.

    target_per_class overrides the auto-derived targets (max of the
    per-dataset means) for the listed classes. All jitter ranges are
    half-widths of symmetric closed intervals.
    """

    target_per_class: dict[CoarseLabel, float] = field(default_factory=dict)
    local_yaw_jitter: float = math.pi / 18.0
    xy_jitter: float = 0.5
    range_jitter: float = 2.0
    ego_rotation: float = math.pi
    scale_range: tuple[float, float] = (0.95, 1.05)
    collision_iou: float = 0.0
    max_attempts: int = 20
    scan_range: float = 100.0
    ground_z: float = 0.0  # injected boxes rest their bottom face here

    def __post_init__(self):
        lo, hi = self.scale_range
        if not (0.0 < lo <= hi):
            raise ConfigError(f"scale range must satisfy 0 < lo <= hi, got {self.scale_range}")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be >= 1")


@dataclass
class GlobalAugmentParams:
    """Whole-scan rigid augmentation: yaw, translation, and mirrors."""

    scan_yaw_range: float = math.pi / 4.0
    translation_range: float = 0.2
    flip_x_prob: float = 0.5
    flip_y_prob: float = 0.5

    def __post_init__(self):
        for p in (self.flip_x_prob, self.flip_y_prob):
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"flip probability {p} outside [0, 1]")


@dataclass
class InjectionReport:
    injected: dict[CoarseLabel, int] = field(default_factory=dict)
    shortfall: dict[CoarseLabel, int] = field(default_factory=dict)

    def total_injected(self) -> int:
        return sum(self.injected.values())

    def total_shortfall(self) -> int:
        return sum(self.shortfall.values())


def target_count(
    label: CoarseLabel, stats: list[ClassStats], policy: InjectionPolicy
) -> float:
    """Desired instances per scan: explicit override or max of dataset means."""
    if label in policy.target_per_class:
        return policy.target_per_class[label]
    if not stats:
        raise DataError("target_count needs at least one dataset's stats")
    return max(s.get(label) for s in stats)


def injection_quota(
    label: CoarseLabel,
    dataset_id: str,
    stats: list[ClassStats],
    policy: InjectionPolicy,
) -> int:
    """Instances of a class to add to one scan of the given dataset.

    Rounded half away from zero and clamped at 0, so the dataset attaining
    the per-class maximum mean gets exactly 0 under auto-derived targets.
    """
    own = next((s for s in stats if s.dataset_id == dataset_id), None)
    if own is None:
        raise DataError(f"no class stats for dataset '{dataset_id}'")
    diff = target_count(label, stats, policy) - own.get(label)
    if diff <= 0.0:
        return 0
    return int(math.floor(diff + 0.5))


def split_quota(quota: int, n_sources: int) -> list[int]:
    """Split a quota into n near-equal parts; earlier sources get the rest."""
    if quota < 0:
        raise ValueError(f"quota must be >= 0, got {quota}")
    if n_sources < 1:
        raise ValueError(f"n_sources must be >= 1, got {n_sources}")
    base, rem = divmod(quota, n_sources)
    return [base + 1 if i < rem else base for i in range(n_sources)]


def instance_augment(
    rec: InstanceRecord, rng: np.random.Generator, policy: InjectionPolicy
) -> tuple[np.ndarray, Box3D]:
    """Pose one bank record in the canonical frame with jittered transforms.

    The record stores only its BEV range and yaw, so the starting pose puts
    the box on the +x axis at that range with its bottom at ground level;
    the transforms are then, in order: scale, local yaw jitter, radial
    translation along the ego ray, rotation around the ego origin, and xy
    jitter. Points stay inside the box throughout.
    """
    scale_lo, scale_hi = policy.scale_range
    scale = rng.uniform(scale_lo, scale_hi)
    yaw_jit = rng.uniform(-policy.local_yaw_jitter, policy.local_yaw_jitter)
    radial = rng.uniform(-policy.range_jitter, policy.range_jitter)
    ego_angle = rng.uniform(-policy.ego_rotation, policy.ego_rotation)
    dx = rng.uniform(-policy.xy_jitter, policy.xy_jitter)
    dy = rng.uniform(-policy.xy_jitter, policy.xy_jitter)

    l, w, h = (d * scale for d in rec.dims)
    local = rec.local_points.astype(np.float64) * scale

    yaw = rec.yaw + yaw_jit
    r = max(rec.range_bev + radial, 0.0)
    cx, cy = r, 0.0
    cz = policy.ground_z + 0.5 * h

    c, s = math.cos(ego_angle), math.sin(ego_angle)
    cx, cy = c * cx - s * cy, s * cx + c * cy
    yaw += ego_angle

    cx += dx
    cy += dy

    box = Box3D(label=rec.label.value, yaw=yaw, center=(cx, cy, cz), dims=(l, w, h))
    points = globalize_points(local, box.center, box.yaw)
    return points, box


def inject(
    scan: Scan,
    banks: list[InstanceBank],
    stats: list[ClassStats],
    policy: InjectionPolicy,
    rng: np.random.Generator,
) -> tuple[Scan, InjectionReport]:
    """Top the scan up toward the per-class targets from all banks.

    A candidate is accepted only if its box has zero 3D IoU against every
    box already in the scan (ground truth and earlier injections) and its
    BEV center lies within the configured scan range. Each requested
    instance gets up to max_attempts draw+pose tries; the rest is reported
    as shortfall, never raised.
    """
    report = InjectionReport()
    boxes = list(scan.boxes)
    point_chunks = [np.asarray(scan.points, dtype=np.float64).reshape(-1, 3)]

    for label in ALL_LABELS:
        quota = injection_quota(label, scan.dataset_id, stats, policy)
        if quota == 0:
            continue
        parts = split_quota(quota, len(banks))
        for bank, part in zip(banks, parts):
            for _ in range(part):
                placed = False
                for _ in range(policy.max_attempts):
                    records, shortfall = bank.draw(label, 1, rng)
                    if shortfall:
                        break
                    points, box = instance_augment(records[0], rng, policy)
                    if math.hypot(box.center[0], box.center[1]) > policy.scan_range:
                        continue
                    if any(iou3d(box, other) > policy.collision_iou for other in boxes):
                        continue
                    boxes.append(box)
                    point_chunks.append(points)
                    report.injected[label] = report.injected.get(label, 0) + 1
                    placed = True
                    break
                if not placed:
                    report.shortfall[label] = report.shortfall.get(label, 0) + 1

    out = scan.replace(points=np.concatenate(point_chunks, axis=0), boxes=boxes)
    return out, report


def load_policy(path) -> tuple[InjectionPolicy, GlobalAugmentParams]:
    """Read injection-policy and whole-scan ranges from one key/value file.

    Unset keys keep their defaults; ``target <CoarseLabel> <count>`` lines
    pin explicit per-class targets.
    """
    path = Path(path)
    policy_kw: dict = {}
    params_kw: dict = {}
    targets: dict[CoarseLabel, float] = {}
    scale_lo, scale_hi = InjectionPolicy().scale_range
    policy_float_keys = {
        "local_yaw_jitter",
        "xy_jitter",
        "range_jitter",
        "ego_rotation",
        "collision_iou",
        "scan_range",
        "ground_z",
    }
    params_float_keys = {
        "scan_yaw_range",
        "translation_range",
        "flip_x_prob",
        "flip_y_prob",
    }
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            key = tokens[0]
            try:
                if key == "target" and len(tokens) == 3:
                    targets[CoarseLabel(tokens[1])] = float(tokens[2])
                elif key == "scale_min" and len(tokens) == 2:
                    scale_lo = float(tokens[1])
                elif key == "scale_max" and len(tokens) == 2:
                    scale_hi = float(tokens[1])
                elif key == "max_attempts" and len(tokens) == 2:
                    policy_kw["max_attempts"] = int(tokens[1])
                elif key in policy_float_keys and len(tokens) == 2:
                    policy_kw[key] = float(tokens[1])
                elif key in params_float_keys and len(tokens) == 2:
                    params_kw[key] = float(tokens[1])
                else:
                    raise ConfigError(
                        f"{path}:{line_no}: unrecognized policy line {line!r}"
                    )
            except ValueError as exc:
                raise ConfigError(f"{path}:{line_no}: {exc}") from exc
    policy = InjectionPolicy(
        target_per_class=targets, scale_range=(scale_lo, scale_hi), **policy_kw
    )
    return policy, GlobalAugmentParams(**params_kw)


def _rotate_z(points: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    out = np.array(points, dtype=np.float64)
    x = out[:, 0].copy()
    y = out[:, 1].copy()
    out[:, 0] = c * x - s * y
    out[:, 1] = s * x + c * y
    return out


def global_augment(
    scan: Scan, params: GlobalAugmentParams, rng: np.random.Generator
) -> Scan:
    """One scan-level rigid yaw rotation, xy translation, and x/y mirrors.

    Mirrors negate the coordinate and reflect headings: an x mirror maps
    yaw to pi - yaw, a y mirror to -yaw. All five random values are drawn
    unconditionally so the stream stays aligned whatever gets applied.
    """
    angle = rng.uniform(-params.scan_yaw_range, params.scan_yaw_range)
    tx = rng.uniform(-params.translation_range, params.translation_range)
    ty = rng.uniform(-params.translation_range, params.translation_range)
    flip_x = rng.random() < params.flip_x_prob
    flip_y = rng.random() < params.flip_y_prob

    points = np.array(scan.points, dtype=np.float64).reshape(-1, 3)
    if points.size:
        points = _rotate_z(points, angle)
        points[:, 0] += tx
        points[:, 1] += ty
        if flip_x:
            points[:, 0] = -points[:, 0]
        if flip_y:
            points[:, 1] = -points[:, 1]

    boxes = []
    for box in scan.boxes:
        cx, cy, cz = box.center
        yaw = box.yaw + angle
        c, s = math.cos(angle), math.sin(angle)
        cx, cy = c * cx - s * cy, s * cx + c * cy
        cx += tx
        cy += ty
        if flip_x:
            cx = -cx
            yaw = math.pi - yaw
        if flip_y:
            cy = -cy
            yaw = -yaw
        boxes.append(Box3D(label=box.label, yaw=yaw, center=(cx, cy, cz), dims=box.dims))
    return scan.replace(points=points, boxes=boxes)
