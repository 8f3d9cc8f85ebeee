"""Dataset statistics the pipeline consumes: per-class mean box size,
mean contained points, mean instances per scan, and volume histograms.

Classes absent from a dataset are reported as absent, not as zero. Means
are exact arithmetic means over the harmonized dataset; the per-scan
instance mean is the value later used as the injection baseline, bit for
bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import DatasetManifest
from .errors import MalformedRecordError
from .geometry import points_in_box
from .labels import CoarseLabel
from .parallel import parallel_map


@dataclass
class ClassStatsEntry:
    mean_dims: tuple[float, float, float]
    mean_points_per_box: float
    mean_instances_per_scan: float
    instance_count: int
    histogram: dict[int, int]  # bin index k -> count in [k*w, (k+1)*w)


@dataclass
class DatasetStatsReport:
    dataset_id: str
    scan_count: int
    bin_width: float
    classes: dict[CoarseLabel, ClassStatsEntry] = field(default_factory=dict)

    def mean_instances(self, label: CoarseLabel) -> float:
        """Mean instances per scan; 0.0 for classes absent from the dataset."""
        entry = self.classes.get(label)
        return entry.mean_instances_per_scan if entry is not None else 0.0


def volume_bin(volume: float, bin_width: float) -> int:
    return int(np.floor(volume / bin_width))


def compute_stats(
    manifest: DatasetManifest, bin_width: float = 10.0, workers: int = 1
) -> DatasetStatsReport:
    """One pass over a harmonized dataset, reduced in manifest order."""
    if bin_width <= 0.0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")

    def scan_stats(entry):
        scan = manifest.load(entry)
        per_class: dict[CoarseLabel, list] = {}
        for box in scan.boxes:
            label = CoarseLabel(box.label)
            contained = int(np.count_nonzero(points_in_box(box, scan.points)))
            per_class.setdefault(label, []).append((box.dims, contained, box.volume()))
        return per_class

    dims_sum: dict[CoarseLabel, np.ndarray] = {}
    points_sum: dict[CoarseLabel, int] = {}
    counts: dict[CoarseLabel, int] = {}
    hists: dict[CoarseLabel, dict[int, int]] = {}
    for per_class in parallel_map(scan_stats, manifest.entries, workers=workers):
        for label, rows in per_class.items():
            acc = dims_sum.setdefault(label, np.zeros(3))
            for dims, contained, volume in rows:
                acc += np.asarray(dims, dtype=np.float64)
                points_sum[label] = points_sum.get(label, 0) + contained
                counts[label] = counts.get(label, 0) + 1
                bin_idx = volume_bin(volume, bin_width)
                hist = hists.setdefault(label, {})
                hist[bin_idx] = hist.get(bin_idx, 0) + 1

    n_scans = len(manifest)
    report = DatasetStatsReport(
        dataset_id=manifest.dataset_id, scan_count=n_scans, bin_width=bin_width
    )
    for label in CoarseLabel:
        if label not in counts:
            continue
        n = counts[label]
        mean_dims = tuple(float(v) for v in dims_sum[label] / n)
        report.classes[label] = ClassStatsEntry(
            mean_dims=mean_dims,
            mean_points_per_box=points_sum[label] / n,
            mean_instances_per_scan=n / n_scans,
            instance_count=n,
            histogram=dict(sorted(hists[label].items())),
        )
    return report


def volume_histogram(
    manifest: DatasetManifest, label: CoarseLabel, bin_width: float
) -> dict[int, int]:
    """Histogram of box volumes for one class; empty dict for absent classes."""
    report = compute_stats(manifest, bin_width=bin_width)
    entry = report.classes.get(label)
    return dict(entry.histogram) if entry is not None else {}


# ---------------------------------------------------------------------------
# report files


def report_to_text(report: DatasetStatsReport) -> str:
    """Human-readable table; absent classes shown as '-'."""
    lines = [
        f"dataset: {report.dataset_id}",
        f"scans: {report.scan_count}",
        f"histogram bin width: {report.bin_width} m^3",
        "",
        f"{'class':<14} {'mean l*w*h (m)':<22} {'pts/box':>9} "
        f"{'inst/scan':>10} {'count':>7}",
    ]
    for label in CoarseLabel:
        entry = report.classes.get(label)
        if entry is None:
            lines.append(f"{label.value:<14} {'-':<22} {'-':>9} {'-':>10} {'-':>7}")
            continue
        l, w, h = entry.mean_dims
        lines.append(
            f"{label.value:<14} {f'{l:.2f}x{w:.2f}x{h:.2f}':<22} "
            f"{entry.mean_points_per_box:>9.1f} "
            f"{entry.mean_instances_per_scan:>10.2f} {entry.instance_count:>7d}"
        )
    return "".join(line + "\n" for line in lines)


def report_to_kv(report: DatasetStatsReport) -> str:
    """Machine-readable flat key=value form; floats keep full precision."""
    lines = [
        f"dataset_id={report.dataset_id}",
        f"scan_count={report.scan_count}",
        f"bin_width={repr(report.bin_width)}",
    ]
    for label in CoarseLabel:
        entry = report.classes.get(label)
        if entry is None:
            continue
        key = label.value
        l, w, h = entry.mean_dims
        lines.append(f"{key}.mean_l={repr(l)}")
        lines.append(f"{key}.mean_w={repr(w)}")
        lines.append(f"{key}.mean_h={repr(h)}")
        lines.append(f"{key}.mean_points_per_box={repr(entry.mean_points_per_box)}")
        lines.append(
            f"{key}.mean_instances_per_scan={repr(entry.mean_instances_per_scan)}"
        )
        lines.append(f"{key}.instance_count={entry.instance_count}")
        hist = ",".join(f"{k}:{v}" for k, v in entry.histogram.items())
        lines.append(f"{key}.histogram={hist}")
    return "".join(line + "\n" for line in lines)


def histogram_to_csv(report: DatasetStatsReport, label: CoarseLabel) -> str:
    """CSV of one class histogram: bin_low,bin_high,count."""
    entry = report.classes.get(label)
    lines = ["bin_low,bin_high,count"]
    if entry is not None:
        for k, count in entry.histogram.items():
            lines.append(f"{k * report.bin_width},{(k + 1) * report.bin_width},{count}")
    return "".join(line + "\n" for line in lines)


def save_report(report: DatasetStatsReport, path) -> None:
    """Write the text report plus its key=value twin (path + '.kv')."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report_to_text(report), encoding="utf-8")
    path.with_suffix(path.suffix + ".kv").write_text(
        report_to_kv(report), encoding="utf-8"
    )


def load_report_kv(path) -> DatasetStatsReport:
    """Read a key=value stats file back into a report."""
    path = Path(path)
    dataset_id = None
    scan_count = 0
    bin_width = 10.0
    raw: dict[str, dict[str, str]] = {}
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise MalformedRecordError(f"{path}:{line_no}: expected key=value")
            key, value = line.split("=", 1)
            if key == "dataset_id":
                dataset_id = value
            elif key == "scan_count":
                scan_count = int(value)
            elif key == "bin_width":
                bin_width = float(value)
            elif "." in key:
                class_name, attr = key.split(".", 1)
                raw.setdefault(class_name, {})[attr] = value
            else:
                raise MalformedRecordError(f"{path}:{line_no}: unknown key {key!r}")
    if dataset_id is None:
        raise MalformedRecordError(f"{path}: missing dataset_id")
    report = DatasetStatsReport(
        dataset_id=dataset_id, scan_count=scan_count, bin_width=bin_width
    )
    for class_name, attrs in raw.items():
        label = CoarseLabel(class_name)
        hist: dict[int, int] = {}
        if attrs.get("histogram"):
            for item in attrs["histogram"].split(","):
                k, v = item.split(":")
                hist[int(k)] = int(v)
        report.classes[label] = ClassStatsEntry(
            mean_dims=(
                float(attrs["mean_l"]),
                float(attrs["mean_w"]),
                float(attrs["mean_h"]),
            ),
            mean_points_per_box=float(attrs["mean_points_per_box"]),
            mean_instances_per_scan=float(attrs["mean_instances_per_scan"]),
            instance_count=int(attrs["instance_count"]),
            histogram=hist,
        )
    return report
