"""Canonical on-disk formats and the KITTI-style label ingestion path.

Formats (all little-endian / UTF-8):

* ``<scan_id>.pts``  — float32 records of (x, y, z), no header, no intensity.
* ``<scan_id>.lbl``  — one box per line: ``class yaw cx cy cz l w h``.
* ``manifest``       — ``dataset_id <id>``, ``descriptor <path>``, then one
                       ``scan <scan_id> <point_path> <label_path>`` per scan.
* ``descriptor``     — ``dataset_id``, ``z_offset``, optional
                       ``annotation_fov``, ``map <raw> <coarse|VEHICLE_BY_VOLUME>``
                       lines, optional ``stat <coarse> <mean_per_scan>`` cache.

Paths inside manifests are relative to the manifest file. Floats in text
files are written with full repr so they round-trip exactly.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError, MalformedRecordError
from .geometry import Box3D
from .labels import VEHICLE_BY_VOLUME, is_coarse

POINT_RECORD_BYTES = 12  # 3 * float32


@dataclass
class Scan:
    """A point cloud with its boxes and provenance."""

    points: np.ndarray  # (N, 3) float64 in memory; float32 on disk
    boxes: list[Box3D]
    dataset_id: str
    scan_id: str

    def replace(self, **kw) -> "Scan":
        return replace(self, **kw)


@dataclass
class DatasetDescriptor:
    """Per-dataset harmonization config.

    label_map values are coarse label names or the VEHICLE_BY_VOLUME
    sentinel; class_stats caches mean instances per scan once the stats
    stage has run.
    """

    dataset_id: str
    label_map: dict[str, str]
    z_offset: float = 0.0
    annotation_fov: float | None = None
    class_stats: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.z_offset):
            raise DataError(f"descriptor {self.dataset_id}: non-finite z_offset")
        for raw, coarse in self.label_map.items():
            if coarse != VEHICLE_BY_VOLUME and not is_coarse(coarse):
                raise DataError(
                    f"descriptor {self.dataset_id}: '{raw}' maps to unknown "
                    f"target '{coarse}'"
                )


@dataclass
class ManifestEntry:
    scan_id: str
    point_path: Path
    label_path: Path


@dataclass
class DatasetManifest:
    """Scan index of one dataset; point data is never loaded eagerly."""

    dataset_id: str
    entries: list[ManifestEntry]
    descriptor_path: Path

    def __post_init__(self):
        if not self.entries:
            raise DataError(f"manifest {self.dataset_id}: no scan entries")
        seen = set()
        for entry in self.entries:
            if entry.scan_id in seen:
                raise DataError(
                    f"manifest {self.dataset_id}: duplicate scan_id "
                    f"{entry.scan_id}"
                )
            seen.add(entry.scan_id)

    def __len__(self) -> int:
        return len(self.entries)

    def scan_ids(self) -> list[str]:
        return [entry.scan_id for entry in self.entries]

    def load(self, entry: ManifestEntry) -> Scan:
        return load_scan(
            entry.point_path, entry.label_path, self.dataset_id, entry.scan_id
        )


# ---------------------------------------------------------------------------
# point / label files


def load_points(path) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) % POINT_RECORD_BYTES != 0:
        raise MalformedRecordError(
            f"{path}: {len(raw)} bytes is not a whole number of "
            f"{POINT_RECORD_BYTES}-byte point records"
        )
    pts = np.frombuffer(raw, dtype="<f4").reshape(-1, 3)
    return pts.astype(np.float64)


def save_points(path, points: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    path.write_bytes(arr.astype("<f4").tobytes())


def format_label_line(box: Box3D) -> str:
    if not box.label or any(ch.isspace() for ch in box.label):
        raise DataError(f"box label {box.label!r} is empty or contains whitespace")
    cx, cy, cz = box.center
    l, w, h = box.dims
    fields = [box.label] + [repr(float(v)) for v in (box.yaw, cx, cy, cz, l, w, h)]
    return " ".join(fields)


def parse_label_line(line: str, source: str = "<line>", line_no: int = 0) -> Box3D:
    tokens = line.split()
    if len(tokens) != 8:
        raise MalformedRecordError(
            f"{source}:{line_no}: expected 8 fields (class yaw cx cy cz l w h), "
            f"got {len(tokens)}"
        )
    try:
        yaw, cx, cy, cz, l, w, h = (float(t) for t in tokens[1:])
    except ValueError as exc:
        raise MalformedRecordError(f"{source}:{line_no}: {exc}") from exc
    try:
        return Box3D(label=tokens[0], yaw=yaw, center=(cx, cy, cz), dims=(l, w, h))
    except ValueError as exc:
        raise MalformedRecordError(f"{source}:{line_no}: {exc}") from exc


def load_labels(path) -> list[Box3D]:
    path = Path(path)
    boxes = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            boxes.append(parse_label_line(line, source=str(path), line_no=line_no))
    return boxes


def save_labels(path, boxes: list[Box3D]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = "".join(format_label_line(box) + "\n" for box in boxes)
    path.write_text(text, encoding="utf-8")


def load_scan(point_path, label_path, dataset_id: str, scan_id: str | None = None) -> Scan:
    point_path = Path(point_path)
    if scan_id is None:
        scan_id = point_path.stem
    return Scan(
        points=load_points(point_path),
        boxes=load_labels(label_path),
        dataset_id=dataset_id,
        scan_id=scan_id,
    )


def save_scan(scan: Scan, point_path, label_path) -> None:
    save_points(point_path, scan.points)
    save_labels(label_path, scan.boxes)


# ---------------------------------------------------------------------------
# descriptor files


def load_descriptor(path) -> DatasetDescriptor:
    path = Path(path)
    dataset_id = None
    z_offset = 0.0
    fov = None
    label_map: dict[str, str] = {}
    stats: dict[str, float] = {}
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            key = tokens[0]
            try:
                if key == "dataset_id" and len(tokens) == 2:
                    dataset_id = tokens[1]
                elif key == "z_offset" and len(tokens) == 2:
                    z_offset = float(tokens[1])
                elif key == "annotation_fov" and len(tokens) == 2:
                    fov = float(tokens[1])
                elif key == "map" and len(tokens) == 3:
                    label_map[tokens[1]] = tokens[2]
                elif key == "stat" and len(tokens) == 3:
                    stats[tokens[1]] = float(tokens[2])
                else:
                    raise MalformedRecordError(
                        f"{path}:{line_no}: unrecognized descriptor line {line!r}"
                    )
            except ValueError as exc:
                raise MalformedRecordError(f"{path}:{line_no}: {exc}") from exc
    if dataset_id is None:
        raise MalformedRecordError(f"{path}: missing dataset_id line")
    return DatasetDescriptor(
        dataset_id=dataset_id,
        label_map=label_map,
        z_offset=z_offset,
        annotation_fov=fov,
        class_stats=stats,
    )


def save_descriptor(descriptor: DatasetDescriptor, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"dataset_id {descriptor.dataset_id}"]
    lines.append(f"z_offset {repr(float(descriptor.z_offset))}")
    if descriptor.annotation_fov is not None:
        lines.append(f"annotation_fov {repr(float(descriptor.annotation_fov))}")
    for raw in sorted(descriptor.label_map):
        lines.append(f"map {raw} {descriptor.label_map[raw]}")
    for coarse in sorted(descriptor.class_stats):
        lines.append(f"stat {coarse} {repr(float(descriptor.class_stats[coarse]))}")
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


# ---------------------------------------------------------------------------
# manifest files


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    root = path.parent
    dataset_id = None
    descriptor_path = None
    entries: list[ManifestEntry] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if tokens[0] == "dataset_id" and len(tokens) == 2:
                dataset_id = tokens[1]
            elif tokens[0] == "descriptor" and len(tokens) == 2:
                descriptor_path = root / tokens[1]
            elif tokens[0] == "scan" and len(tokens) == 4:
                entries.append(
                    ManifestEntry(
                        scan_id=tokens[1],
                        point_path=root / tokens[2],
                        label_path=root / tokens[3],
                    )
                )
            else:
                raise MalformedRecordError(
                    f"{path}:{line_no}: unrecognized manifest line {line!r}"
                )
    if dataset_id is None:
        raise MalformedRecordError(f"{path}: missing dataset_id line")
    if descriptor_path is None:
        raise MalformedRecordError(f"{path}: missing descriptor line")
    return DatasetManifest(
        dataset_id=dataset_id, entries=entries, descriptor_path=descriptor_path
    )


def save_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    root = path.parent

    def rel(p: Path) -> str:
        return os.path.relpath(p, root)

    lines = [f"dataset_id {manifest.dataset_id}"]
    lines.append(f"descriptor {rel(manifest.descriptor_path)}")
    for entry in manifest.entries:
        lines.append(
            f"scan {entry.scan_id} {rel(entry.point_path)} {rel(entry.label_path)}"
        )
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


# ---------------------------------------------------------------------------
# KITTI label ingestion

KITTI_FIELD_COUNT = 15


@dataclass(frozen=True)
class KittiConversion:
    """Camera-frame to canonical-frame convention.

    axis_map gives the canonical (x, y, z) as signed camera axes; the
    default sends camera z (forward) to x, -x (right) to y, -y (down) to z.
    KITTI locations are bottom-face centers, so the canonical z is lifted
    by h/2 when bottom_to_center is set. Canonical yaw is
    yaw_sign * rotation_y + yaw_offset.
    """

    axis_map: tuple[str, str, str] = ("z", "-x", "-y")
    bottom_to_center: bool = True
    yaw_sign: float = -1.0
    yaw_offset: float = -math.pi / 2.0


_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


def _remap_axes(vec, axis_map):
    out = []
    for token in axis_map:
        sign = -1.0 if token.startswith("-") else 1.0
        out.append(sign * vec[_AXIS_INDEX[token.lstrip("-")]])
    return out


def parse_kitti_label_line(
    line: str,
    conversion: KittiConversion = KittiConversion(),
    source: str = "<line>",
    line_no: int = 0,
) -> tuple[str, Box3D] | None:
    """Parse one KITTI object label into the canonical frame.

    Returns None for DontCare entries (a skip, not an error).
    """
    tokens = line.split()
    if len(tokens) != KITTI_FIELD_COUNT:
        raise MalformedRecordError(
            f"{source}:{line_no}: expected {KITTI_FIELD_COUNT} KITTI fields, "
            f"got {len(tokens)}"
        )
    raw_class = tokens[0]
    if raw_class == "DontCare":
        return None
    try:
        values = [float(t) for t in tokens[1:]]
    except ValueError as exc:
        raise MalformedRecordError(f"{source}:{line_no}: {exc}") from exc
    h, w, l = values[7], values[8], values[9]
    cam_xyz = values[10:13]
    rotation_y = values[13]
    cx, cy, cz = _remap_axes(cam_xyz, conversion.axis_map)
    if conversion.bottom_to_center:
        cz += 0.5 * h
    yaw = conversion.yaw_sign * rotation_y + conversion.yaw_offset
    try:
        box = Box3D(label=raw_class, yaw=yaw, center=(cx, cy, cz), dims=(l, w, h))
    except ValueError as exc:
        raise MalformedRecordError(f"{source}:{line_no}: {exc}") from exc
    return raw_class, box
