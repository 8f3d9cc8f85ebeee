"""Seeded synthetic LiDAR datasets: desk-scale stand-ins for real corpora.

Each generated dataset writes canonical point/label files, a descriptor
matching its own label usage, and a manifest. Output is a pure function of
(spec, seed): per-scan streams are derived by name, so regeneration is
byte-identical regardless of order or worker count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import (
    DatasetDescriptor,
    DatasetManifest,
    ManifestEntry,
    Scan,
    save_descriptor,
    save_manifest,
    save_scan,
)
from .errors import ConfigError
from .geometry import Box3D
from .labels import VEHICLE_BY_VOLUME, is_coarse
from .rng import derive_rng


@dataclass
class SyntheticClassSpec:
    """One population of objects: a raw class with one size mode.

    The same raw_label may appear in several components (e.g. a single
    'Vehicle' class with car/truck/bus size modes); all components of a
    raw label must map to the same coarse target.
    """

    raw_label: str
    coarse_target: str  # coarse label name or VEHICLE_BY_VOLUME
    mean_per_scan: float
    mean_dims: tuple[float, float, float]
    dims_sigma: float = 0.05
    points_per_instance: float = 60.0


@dataclass
class SyntheticSpec:
    dataset_id: str
    n_scans: int
    classes: list[SyntheticClassSpec] = field(default_factory=list)
    background_points: int = 1500
    xy_range: float = 40.0
    z_offset: float = 0.0  # descriptor value; raw ground sits at -z_offset
    annotation_fov: float | None = None

    def __post_init__(self):
        if self.n_scans < 1:
            raise ConfigError("synthetic spec needs n_scans >= 1")
        targets: dict[str, str] = {}
        for cls in self.classes:
            if cls.coarse_target != VEHICLE_BY_VOLUME and not is_coarse(
                cls.coarse_target
            ):
                raise ConfigError(
                    f"synthetic class '{cls.raw_label}' maps to unknown target "
                    f"'{cls.coarse_target}'"
                )
            previous = targets.setdefault(cls.raw_label, cls.coarse_target)
            if previous != cls.coarse_target:
                raise ConfigError(
                    f"raw label '{cls.raw_label}' maps to both '{previous}' and "
                    f"'{cls.coarse_target}'"
                )

    def label_map(self) -> dict[str, str]:
        return {cls.raw_label: cls.coarse_target for cls in self.classes}


def _sample_instance(cls: SyntheticClassSpec, spec: SyntheticSpec, rng):
    """One box plus its interior points, in the raw (pre-offset) frame."""
    dims = np.maximum(
        rng.normal(loc=cls.mean_dims, scale=cls.dims_sigma, size=3),
        0.2 * np.asarray(cls.mean_dims),
    )
    l, w, h = (float(v) for v in dims)
    if spec.annotation_fov is not None:
        azimuth = rng.uniform(-0.5 * spec.annotation_fov, 0.5 * spec.annotation_fov)
    else:
        azimuth = rng.uniform(-math.pi, math.pi)
    radius = rng.uniform(4.0, 0.95 * spec.xy_range)
    ground = -spec.z_offset
    center = (
        radius * math.cos(azimuth),
        radius * math.sin(azimuth),
        ground + 0.5 * h,
    )
    yaw = rng.uniform(-math.pi, math.pi)
    box = Box3D(label=cls.raw_label, yaw=yaw, center=center, dims=(l, w, h))

    count = int(rng.poisson(cls.points_per_instance))
    local = rng.uniform(-0.5, 0.5, size=(count, 3)) * np.array([l, w, h])
    c, s = math.cos(yaw), math.sin(yaw)
    points = np.empty_like(local)
    points[:, 0] = c * local[:, 0] - s * local[:, 1] + center[0]
    points[:, 1] = s * local[:, 0] + c * local[:, 1] + center[1]
    points[:, 2] = local[:, 2] + center[2]
    return box, points


def _generate_scan(spec: SyntheticSpec, scan_index: int, seed: int) -> Scan:
    rng = derive_rng(seed, "synth", spec.dataset_id, scan_index)
    ground = -spec.z_offset

    chunks = []
    n_bg = spec.background_points
    if n_bg > 0:
        bg = np.empty((n_bg, 3))
        bg[:, 0] = rng.uniform(-spec.xy_range, spec.xy_range, size=n_bg)
        bg[:, 1] = rng.uniform(-spec.xy_range, spec.xy_range, size=n_bg)
        # mostly road surface, some clutter above it
        clutter = rng.random(n_bg) < 0.2
        bg[:, 2] = ground + rng.uniform(0.0, 0.05, size=n_bg)
        bg[clutter, 2] = ground + rng.uniform(0.3, 3.0, size=int(clutter.sum()))
        chunks.append(bg)

    boxes = []
    for cls in spec.classes:
        count = int(rng.poisson(cls.mean_per_scan))
        for _ in range(count):
            box, points = _sample_instance(cls, spec, rng)
            boxes.append(box)
            if points.size:
                chunks.append(points)

    points = np.concatenate(chunks, axis=0) if chunks else np.zeros((0, 3))
    return Scan(
        points=points,
        boxes=boxes,
        dataset_id=spec.dataset_id,
        scan_id=f"{scan_index:06d}",
    )


def generate_synthetic_dataset(
    spec: SyntheticSpec, out_dir, seed: int
) -> DatasetManifest:
    """Write a synthetic dataset under out_dir and return its manifest."""
    out_dir = Path(out_dir)
    entries = []
    for scan_index in range(spec.n_scans):
        scan = _generate_scan(spec, scan_index, seed)
        point_path = out_dir / "points" / f"{scan.scan_id}.pts"
        label_path = out_dir / "labels" / f"{scan.scan_id}.lbl"
        save_scan(scan, point_path, label_path)
        entries.append(
            ManifestEntry(
                scan_id=scan.scan_id, point_path=point_path, label_path=label_path
            )
        )

    descriptor = DatasetDescriptor(
        dataset_id=spec.dataset_id,
        label_map=spec.label_map(),
        z_offset=spec.z_offset,
        annotation_fov=spec.annotation_fov,
    )
    descriptor_path = out_dir / "descriptor.txt"
    save_descriptor(descriptor, descriptor_path)
    manifest = DatasetManifest(
        dataset_id=spec.dataset_id, entries=entries, descriptor_path=descriptor_path
    )
    save_manifest(manifest, out_dir / "manifest.txt")
    return manifest


# ---------------------------------------------------------------------------
# spec files
#
#   dataset_id kitti_synth
#   scans 10
#   background_points 1500
#   xy_range 40.0
#   z_offset -0.3
#   annotation_fov 1.5707963267948966
#   class Car SmallVehicle 3.8 3.9 1.6 1.5 0.05 80


def load_synthetic_spec(path) -> SyntheticSpec:
    path = Path(path)
    fields: dict = {"classes": []}
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            key = tokens[0]
            try:
                if key == "dataset_id" and len(tokens) == 2:
                    fields["dataset_id"] = tokens[1]
                elif key == "scans" and len(tokens) == 2:
                    fields["n_scans"] = int(tokens[1])
                elif key == "background_points" and len(tokens) == 2:
                    fields["background_points"] = int(tokens[1])
                elif key == "xy_range" and len(tokens) == 2:
                    fields["xy_range"] = float(tokens[1])
                elif key == "z_offset" and len(tokens) == 2:
                    fields["z_offset"] = float(tokens[1])
                elif key == "annotation_fov" and len(tokens) == 2:
                    fields["annotation_fov"] = float(tokens[1])
                elif key == "class" and len(tokens) == 9:
                    fields["classes"].append(
                        SyntheticClassSpec(
                            raw_label=tokens[1],
                            coarse_target=tokens[2],
                            mean_per_scan=float(tokens[3]),
                            mean_dims=(
                                float(tokens[4]),
                                float(tokens[5]),
                                float(tokens[6]),
                            ),
                            dims_sigma=float(tokens[7]),
                            points_per_instance=float(tokens[8]),
                        )
                    )
                else:
                    raise ConfigError(
                        f"{path}:{line_no}: unrecognized synthetic spec line {line!r}"
                    )
            except ValueError as exc:
                raise ConfigError(f"{path}:{line_no}: {exc}") from exc
    if "dataset_id" not in fields or "n_scans" not in fields:
        raise ConfigError(f"{path}: synthetic spec needs dataset_id and scans lines")
    return SyntheticSpec(**fields)
