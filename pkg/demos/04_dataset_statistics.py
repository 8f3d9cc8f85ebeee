#!/usr/bin/env python3
"""Per-class dataset statistics: mean box size, points per box, instances
per scan, and volume histograms.

Run: python demos/04_dataset_statistics.py
"""
import tempfile
from pathlib import Path

from lidarmix import (
    CoarseLabel,
    SyntheticClassSpec,
    SyntheticSpec,
    compute_stats,
    generate_synthetic_dataset,
    harmonize_dataset,
)
from lidarmix.dataio import load_descriptor
from lidarmix.stats import histogram_to_csv, report_to_kv, report_to_text

work = Path(tempfile.mkdtemp(prefix="lidarmix_demo_"))
print("=== dataset statistics ===\n")

spec = SyntheticSpec(
    dataset_id="nusc_synth",
    n_scans=20,
    classes=[
        SyntheticClassSpec("Car", "SmallVehicle", 11.0, (4.6, 2.0, 1.7), 0.08, 60),
        SyntheticClassSpec("Truck", "MediumVehicle", 2.2, (7.3, 2.5, 3.0), 0.10, 110),
        SyntheticClassSpec("Bus", "LargeVehicle", 0.5, (10.7, 2.9, 3.4), 0.10, 170),
        SyntheticClassSpec("Pedestrian", "Pedestrian", 5.7, (0.7, 0.7, 1.8), 0.03, 12),
        SyntheticClassSpec("Cyclist", "TwoWheels", 0.3, (1.7, 0.6, 1.3), 0.04, 17),
    ],
    background_points=600,
    xy_range=40.0,
    z_offset=-0.4,
)
raw = generate_synthetic_dataset(spec, work / "raw", seed=8)
harmonized = harmonize_dataset(raw, load_descriptor(raw.descriptor_path), work / "harm")

report = compute_stats(harmonized, bin_width=10.0)
print(report_to_text(report))

# The per-scan means in this report are exactly the values the injection
# stage consumes as its per-dataset baselines.
small = report.classes[CoarseLabel.SMALL_VEHICLE]
print(f"SmallVehicle mean instances/scan: {small.mean_instances_per_scan!r}")
print(f"  (instance_count={small.instance_count} over {report.scan_count} scans)")

print("\nvolume histogram for SmallVehicle (bin -> count):")
print(f"  {small.histogram}")

print("\nCSV form for external plotting:")
for line in histogram_to_csv(report, CoarseLabel.SMALL_VEHICLE).splitlines()[:4]:
    print(f"  {line}")

print("\nmachine-readable key=value head:")
for line in report_to_kv(report).splitlines()[:6]:
    print(f"  {line}")
