"""Canonical-frame conversion and coarse relabeling of raw datasets.

Harmonization shifts every scan by the dataset's z offset, optionally
crops to the annotated front-view wedge, and replaces raw class strings
with coarse labels. Datasets with an undifferentiated vehicle class get
their vehicles split by a 1-D volume clustering fit once per dataset.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import (
    DatasetDescriptor,
    DatasetManifest,
    ManifestEntry,
    Scan,
    load_labels,
    save_descriptor,
    save_manifest,
    save_scan,
)
from .errors import DataError, UnmappedClassError
from .geometry import TWO_PI, Box3D
from .labels import VEHICLE_BY_VOLUME, VEHICLE_LABELS, CoarseLabel
from .parallel import parallel_map

KMEANS_MAX_ITER = 100
KMEANS_TOL = 1e-9


@dataclass(frozen=True)
class VolumeClustering:
    """1-D k-means result over box volumes; centers ascending."""

    centers: np.ndarray

    @property
    def k(self) -> int:
        return len(self.centers)

    def assign(self, volume: float) -> int:
        """Index of the nearest center (ties go to the smaller center)."""
        return int(np.argmin(np.abs(self.centers - volume)))

    def coarse_label(self, volume: float) -> CoarseLabel:
        if self.k != len(VEHICLE_LABELS):
            raise DataError(
                f"volume clustering has k={self.k}, need k={len(VEHICLE_LABELS)} "
                "to name vehicle classes"
            )
        return VEHICLE_LABELS[self.assign(volume)]


def _lloyd(vols: np.ndarray, centers: np.ndarray, k: int) -> np.ndarray:
    """Lloyd iteration with empty-cluster repair; returns sorted centers."""
    centers = np.array(centers, dtype=np.float64)
    for _ in range(KMEANS_MAX_ITER):
        assign = np.argmin(np.abs(vols[:, None] - centers[None, :]), axis=1)
        # Repair empty clusters before the update step: the largest cluster
        # donates its farthest member.
        for empty in range(k):
            if np.any(assign == empty):
                continue
            counts = np.bincount(assign, minlength=k)
            donor = int(np.argmax(counts))
            members = np.flatnonzero(assign == donor)
            dist = np.abs(vols[members] - centers[donor])
            assign[members[int(np.argmax(dist))]] = empty
        new_centers = np.array([vols[assign == j].mean() for j in range(k)])
        shift = np.max(np.abs(new_centers - centers))
        centers = new_centers
        if shift < KMEANS_TOL:
            break
    return np.sort(centers)


def _initial_centers(vols: np.ndarray, k: int):
    """Three deterministic starts: quantile, farthest-point, equal-range.

    The quantile start alone sticks in local minima when one mode holds
    most of the mass (both low quantiles land inside it); taking the best
    converged result of the three keeps determinism while staying optimal
    on mode-separated volume data.
    """
    yield np.quantile(np.sort(vols), (2.0 * np.arange(k) + 1.0) / (2.0 * k))
    picked = [float(np.sort(vols)[vols.size // 2])]
    for _ in range(k - 1):
        dist = np.min(np.abs(vols[:, None] - np.array(picked)[None, :]), axis=1)
        picked.append(float(vols[int(np.argmax(dist))]))
    yield np.sort(picked)
    lo, hi = float(vols.min()), float(vols.max())
    yield lo + (np.arange(k) + 0.5) / k * (hi - lo)


def fit_volume_clusters(volumes, k: int = 3, seed: int = 0) -> VolumeClustering:
    """1-D Lloyd's k-means over volumes, deterministic given (volumes, k).

    Runs Lloyd from each deterministic start and keeps the lowest
    within-cluster sum of squares; iteration stops when no center moves
    more than 1e-9. The seed argument is part of the signature for
    alternative initializations but unused by the deterministic ones.
    """
    del seed
    vols = np.asarray(list(volumes), dtype=np.float64)
    if vols.size == 0:
        raise DataError("cannot cluster an empty volume list")
    if np.any(vols <= 0.0) or not np.all(np.isfinite(vols)):
        raise DataError("volumes must be finite and positive")
    distinct = np.unique(vols).size
    if k < 1 or k > distinct:
        raise DataError(f"k={k} not in [1, distinct volume count {distinct}]")

    best_centers = None
    best_cost = np.inf
    for init in _initial_centers(vols, k):
        centers = _lloyd(vols, init, k)
        assign = np.argmin(np.abs(vols[:, None] - centers[None, :]), axis=1)
        cost = float(np.sum((vols - centers[assign]) ** 2))
        if cost < best_cost:
            best_cost = cost
            best_centers = centers
    return VolumeClustering(centers=best_centers)


def to_canonical(scan: Scan, descriptor: DatasetDescriptor) -> Scan:
    """Shift all z coordinates by the dataset's offset; x, y, yaw untouched."""
    offset = descriptor.z_offset
    points = np.array(scan.points, dtype=np.float64)
    if points.size:
        points[:, 2] += offset
    boxes = [
        Box3D(
            label=b.label,
            yaw=b.yaw,
            center=(b.center[0], b.center[1], b.center[2] + offset),
            dims=b.dims,
        )
        for b in scan.boxes
    ]
    return scan.replace(points=points, boxes=boxes)


def _in_wedge(x, y, half_fov):
    return (x > 0.0) & (np.abs(np.arctan2(y, x)) <= half_fov)


def crop_front_view(scan: Scan, fov: float) -> Scan:
    """Keep points and box centers inside the horizontal wedge |az| <= fov/2.

    Requires 0 < fov <= 2*pi. A full-circle fov is the identity; otherwise
    x > 0 is required as well (per the annotated-front-view contract), and
    boundary azimuths are kept.
    """
    if not 0.0 < fov <= TWO_PI:
        raise DataError(f"fov must be in (0, 2*pi], got {fov}")
    if fov == TWO_PI:
        return scan
    half = 0.5 * fov
    points = scan.points
    if points.size:
        mask = _in_wedge(points[:, 0], points[:, 1], half)
        points = points[mask]
    boxes = [b for b in scan.boxes if _in_wedge(b.center[0], b.center[1], half)]
    return scan.replace(points=points, boxes=boxes)


def map_label(
    raw: str,
    box: Box3D,
    descriptor: DatasetDescriptor,
    clustering: VolumeClustering | None = None,
) -> CoarseLabel:
    """Coarse label for one raw-labeled box.

    Unmapped classes raise (silent drops would corrupt every downstream
    statistic); the by-volume sentinel requires a fitted clustering.
    """
    try:
        target = descriptor.label_map[raw]
    except KeyError:
        raise UnmappedClassError(
            f"class '{raw}' has no label-map entry in dataset "
            f"'{descriptor.dataset_id}'"
        ) from None
    if target == VEHICLE_BY_VOLUME:
        if clustering is None:
            raise DataError(
                f"class '{raw}' in dataset '{descriptor.dataset_id}' needs a "
                "volume clustering"
            )
        return clustering.coarse_label(box.volume())
    return CoarseLabel(target)


def _relabel(scan: Scan, descriptor, clustering) -> Scan:
    boxes = [
        Box3D(
            label=map_label(b.label, b, descriptor, clustering).value,
            yaw=b.yaw,
            center=b.center,
            dims=b.dims,
        )
        for b in scan.boxes
    ]
    return scan.replace(boxes=boxes)


def harmonize_scan(scan: Scan, descriptor, clustering=None) -> Scan:
    """Canonical shift + optional front-view crop + coarse relabeling."""
    out = to_canonical(scan, descriptor)
    if descriptor.annotation_fov is not None:
        out = crop_front_view(out, descriptor.annotation_fov)
    return _relabel(out, descriptor, clustering)


def harmonize_dataset(
    manifest: DatasetManifest,
    descriptor: DatasetDescriptor,
    out_dir,
    seed: int = 0,
    workers: int = 1,
) -> DatasetManifest:
    """Write the harmonized copy of a dataset and return its manifest.

    Two passes: the first validates that every raw class is mapped and fits
    the volume clustering over all sentinel-mapped boxes (so a bad label
    map fails before any file is written); the second converts scans in
    parallel. The output manifest is written last, marking completion.
    """
    out_dir = Path(out_dir)

    volumes: list[float] = []
    needs_clustering = VEHICLE_BY_VOLUME in descriptor.label_map.values()
    for entry in manifest.entries:
        for box in load_labels(entry.label_path):
            if box.label not in descriptor.label_map:
                raise UnmappedClassError(
                    f"class '{box.label}' has no label-map entry in dataset "
                    f"'{descriptor.dataset_id}' (scan {entry.scan_id})"
                )
            if descriptor.label_map[box.label] == VEHICLE_BY_VOLUME:
                volumes.append(box.volume())

    clustering = None
    if needs_clustering and volumes:
        clustering = fit_volume_clusters(volumes, k=len(VEHICLE_LABELS), seed=seed)

    def convert(entry: ManifestEntry) -> ManifestEntry:
        scan = harmonize_scan(manifest.load(entry), descriptor, clustering)
        point_path = out_dir / "points" / f"{entry.scan_id}.pts"
        label_path = out_dir / "labels" / f"{entry.scan_id}.lbl"
        save_scan(scan, point_path, label_path)
        return ManifestEntry(
            scan_id=entry.scan_id, point_path=point_path, label_path=label_path
        )

    entries = parallel_map(convert, manifest.entries, workers=workers)

    out_descriptor = DatasetDescriptor(
        dataset_id=manifest.dataset_id,
        label_map={label.value: label.value for label in CoarseLabel},
        z_offset=0.0,
        annotation_fov=descriptor.annotation_fov,
    )
    descriptor_path = out_dir / "descriptor.txt"
    save_descriptor(out_descriptor, descriptor_path)
    out_manifest = DatasetManifest(
        dataset_id=manifest.dataset_id,
        entries=entries,
        descriptor_path=descriptor_path,
    )
    save_manifest(out_manifest, out_dir / "manifest.txt")
    return out_manifest


def clustering_wcss(volumes, clustering: VolumeClustering) -> float:
    """Within-cluster sum of squares under nearest-center assignment."""
    vols = np.asarray(list(volumes), dtype=np.float64)
    idx = np.argmin(np.abs(vols[:, None] - clustering.centers[None, :]), axis=1)
    return float(np.sum((vols - clustering.centers[idx]) ** 2))
