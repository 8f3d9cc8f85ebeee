"""Per-dataset instance banks: cropped object point sets ready for injection.

A record keeps the points of one annotated object in the box-local frame
(center subtracted, yaw removed) together with the box size, the original
BEV range to the ego origin, and the original yaw. Banks persist as a text
index (``<stem>.idx``) plus a float32 point blob (``<stem>.pts``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import DatasetManifest
from .errors import DataError, MalformedRecordError
from .geometry import points_in_box
from .labels import CoarseLabel
from .parallel import parallel_map

DEFAULT_MIN_POINTS = 5


@dataclass
class InstanceRecord:
    label: CoarseLabel
    dataset_id: str
    scan_id: str
    dims: tuple[float, float, float]
    yaw: float
    range_bev: float  # meters from ego origin to box center, BEV
    local_points: np.ndarray  # (M, 3) float32, box frame


@dataclass
class BankBuildReport:
    kept: int = 0
    skipped_few_points: int = 0


@dataclass
class InstanceBank:
    dataset_id: str
    min_points: int
    records: dict[CoarseLabel, list[InstanceRecord]] = field(default_factory=dict)

    def size(self, label: CoarseLabel) -> int:
        return len(self.records.get(label, []))

    def draw(
        self, label: CoarseLabel, n: int, rng: np.random.Generator
    ) -> tuple[list[InstanceRecord], int]:
        """Uniform with-replacement sample of n records.

        An empty class list is not an error: the full request is returned
        as a shortfall count instead.
        """
        if n < 0:
            raise ValueError(f"cannot draw n={n} records")
        if n == 0:
            return [], 0
        pool = self.records.get(label, [])
        if not pool:
            return [], n
        idx = rng.integers(0, len(pool), size=n)
        return [pool[i] for i in idx], 0


def localize_points(points: np.ndarray, center, yaw: float) -> np.ndarray:
    """Express world points in the box frame (translate then rotate by -yaw)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    c, s = math.cos(yaw), math.sin(yaw)
    dx = pts[:, 0] - center[0]
    dy = pts[:, 1] - center[1]
    out = np.empty_like(pts)
    out[:, 0] = c * dx + s * dy
    out[:, 1] = -s * dx + c * dy
    out[:, 2] = pts[:, 2] - center[2]
    return out


def globalize_points(local_points: np.ndarray, center, yaw: float) -> np.ndarray:
    """Inverse of localize_points: rotate by yaw then translate."""
    pts = np.asarray(local_points, dtype=np.float64).reshape(-1, 3)
    c, s = math.cos(yaw), math.sin(yaw)
    out = np.empty_like(pts)
    out[:, 0] = c * pts[:, 0] - s * pts[:, 1] + center[0]
    out[:, 1] = s * pts[:, 0] + c * pts[:, 1] + center[1]
    out[:, 2] = pts[:, 2] + center[2]
    return out


def build_bank(
    manifest: DatasetManifest,
    min_points: int = DEFAULT_MIN_POINTS,
    workers: int = 1,
) -> tuple[InstanceBank, BankBuildReport]:
    """Crop every sufficiently-populated box of a harmonized dataset.

    Per-scan results merge in (scan_id, box index) order regardless of
    worker count, so the serialized bank is byte-identical for any
    parallelism.
    """

    def crop_scan(entry):
        scan = manifest.load(entry)
        records = []
        skipped = 0
        for box in scan.boxes:
            inside = scan.points[points_in_box(box, scan.points)]
            if inside.shape[0] < min_points:
                skipped += 1
                continue
            local = localize_points(inside, box.center, box.yaw)
            records.append(
                InstanceRecord(
                    label=CoarseLabel(box.label),
                    dataset_id=scan.dataset_id,
                    scan_id=scan.scan_id,
                    dims=box.dims,
                    yaw=box.yaw,
                    range_bev=math.hypot(box.center[0], box.center[1]),
                    local_points=local.astype(np.float32),
                )
            )
        return records, skipped

    results = parallel_map(crop_scan, manifest.entries, workers=workers)
    by_scan = sorted(zip(manifest.entries, results), key=lambda pair: pair[0].scan_id)

    bank = InstanceBank(dataset_id=manifest.dataset_id, min_points=min_points)
    report = BankBuildReport()
    for _, (records, skipped) in by_scan:
        report.skipped_few_points += skipped
        for record in records:
            bank.records.setdefault(record.label, []).append(record)
            report.kept += 1
    return bank, report


# ---------------------------------------------------------------------------
# persistence


def save_bank(bank: InstanceBank, stem) -> None:
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    index_lines = [
        f"dataset_id {bank.dataset_id}",
        f"min_points {bank.min_points}",
    ]
    blobs = []
    offset = 0
    for label in CoarseLabel:
        for rec in bank.records.get(label, []):
            count = rec.local_points.shape[0]
            l, w, h = rec.dims
            fields = [
                "record",
                rec.label.value,
                rec.dataset_id,
                rec.scan_id,
                repr(float(l)),
                repr(float(w)),
                repr(float(h)),
                repr(float(rec.yaw)),
                repr(float(rec.range_bev)),
                str(offset),
                str(count),
            ]
            index_lines.append(" ".join(fields))
            blobs.append(np.ascontiguousarray(rec.local_points, dtype="<f4"))
            offset += count
    stem.with_suffix(stem.suffix + ".idx").write_text(
        "".join(line + "\n" for line in index_lines), encoding="utf-8"
    )
    blob = b"".join(b.tobytes() for b in blobs)
    stem.with_suffix(stem.suffix + ".pts").write_bytes(blob)


def load_bank(stem) -> InstanceBank:
    stem = Path(stem)
    index_path = stem.with_suffix(stem.suffix + ".idx")
    blob_path = stem.with_suffix(stem.suffix + ".pts")
    raw = blob_path.read_bytes()
    if len(raw) % 12 != 0:
        raise MalformedRecordError(
            f"{blob_path}: {len(raw)} bytes is not a whole number of point records"
        )
    all_points = np.frombuffer(raw, dtype="<f4").reshape(-1, 3)

    dataset_id = None
    min_points = DEFAULT_MIN_POINTS
    bank = None
    with index_path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if tokens[0] == "dataset_id" and len(tokens) == 2:
                dataset_id = tokens[1]
            elif tokens[0] == "min_points" and len(tokens) == 2:
                min_points = int(tokens[1])
            elif tokens[0] == "record" and len(tokens) == 11:
                if bank is None:
                    if dataset_id is None:
                        raise MalformedRecordError(
                            f"{index_path}:{line_no}: record before dataset_id"
                        )
                    bank = InstanceBank(dataset_id=dataset_id, min_points=min_points)
                label = CoarseLabel(tokens[1])
                l, w, h, yaw, rng_bev = (float(t) for t in tokens[4:9])
                offset, count = int(tokens[9]), int(tokens[10])
                if offset + count > all_points.shape[0]:
                    raise MalformedRecordError(
                        f"{index_path}:{line_no}: record points [{offset}, "
                        f"{offset + count}) exceed blob size {all_points.shape[0]}"
                    )
                rec = InstanceRecord(
                    label=label,
                    dataset_id=tokens[2],
                    scan_id=tokens[3],
                    dims=(l, w, h),
                    yaw=yaw,
                    range_bev=rng_bev,
                    local_points=np.array(all_points[offset : offset + count]),
                )
                bank.records.setdefault(label, []).append(rec)
            else:
                raise MalformedRecordError(
                    f"{index_path}:{line_no}: unrecognized bank index line {line!r}"
                )
    if bank is None:
        if dataset_id is None:
            raise MalformedRecordError(f"{index_path}: missing dataset_id line")
        bank = InstanceBank(dataset_id=dataset_id, min_points=min_points)
    return bank


def validate_record(rec: InstanceRecord, atol: float = 1e-6) -> None:
    """Check the local-frame containment invariant of one record."""
    l, w, h = rec.dims
    pts = rec.local_points
    if pts.shape[0] < 1:
        raise DataError("instance record has no points")
    half = np.array([0.5 * l, 0.5 * w, 0.5 * h])
    if np.any(np.abs(pts) > half + atol):
        raise DataError("instance record has points outside its box")
