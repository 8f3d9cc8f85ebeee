import hashlib
import math
from pathlib import Path

import numpy as np
import pytest

from lidarmix.errors import ConfigError
from lidarmix.geometry import points_in_box
from lidarmix.synthetic import (
    SyntheticClassSpec,
    SyntheticSpec,
    generate_synthetic_dataset,
    load_synthetic_spec,
)


def car_spec(dataset_id="kitti_synth", n_scans=10, **kw):
    defaults = dict(
        dataset_id=dataset_id,
        n_scans=n_scans,
        classes=[
            SyntheticClassSpec(
                raw_label="Car",
                coarse_target="SmallVehicle",
                mean_per_scan=3.8,
                mean_dims=(3.9, 1.6, 1.5),
                dims_sigma=0.05,
                points_per_instance=60.0,
            )
        ],
        background_points=300,
        xy_range=30.0,
    )
    defaults.update(kw)
    return SyntheticSpec(**defaults)


def tree_digest(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestGenerator:
    def test_same_seed_byte_identical(self, tmp_path):
        spec = car_spec()
        generate_synthetic_dataset(spec, tmp_path / "a", seed=7)
        generate_synthetic_dataset(spec, tmp_path / "b", seed=7)
        assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")

    def test_different_seed_differs(self, tmp_path):
        spec = car_spec()
        generate_synthetic_dataset(spec, tmp_path / "a", seed=7)
        generate_synthetic_dataset(spec, tmp_path / "b", seed=8)
        assert tree_digest(tmp_path / "a") != tree_digest(tmp_path / "b")

    def test_zero_classes_points_only(self, tmp_path):
        spec = car_spec(classes=[])
        manifest = generate_synthetic_dataset(spec, tmp_path / "d", seed=0)
        for entry in manifest.entries:
            scan = manifest.load(entry)
            assert scan.boxes == []
            assert scan.points.shape[0] > 0

    def test_satisfies_own_descriptor(self, tmp_path):
        from lidarmix.dataio import load_descriptor

        spec = car_spec()
        manifest = generate_synthetic_dataset(spec, tmp_path / "d", seed=1)
        descriptor = load_descriptor(manifest.descriptor_path)
        for entry in manifest.entries:
            for box in manifest.load(entry).boxes:
                assert box.label in descriptor.label_map

    def test_instance_points_inside_their_boxes(self, tmp_path):
        spec = car_spec(background_points=0, n_scans=4)
        manifest = generate_synthetic_dataset(spec, tmp_path / "d", seed=3)
        for entry in manifest.entries:
            scan = manifest.load(entry)
            if not scan.boxes:
                continue
            covered = np.zeros(scan.points.shape[0], dtype=bool)
            for box in scan.boxes:
                covered |= points_in_box(box, scan.points)
            # float32 quantization can push a uniform sample across the face
            assert covered.mean() > 0.999

    def test_stats_recover_generator_means(self, tmp_path):
        # mean 3.8 cars/scan with car dims around (3.9, 1.6, 1.5):
        # the stats stage should see those means at 2*sigma/sqrt(n) scale
        from lidarmix.harmonize import harmonize_dataset
        from lidarmix.dataio import load_descriptor
        from lidarmix.labels import CoarseLabel
        from lidarmix.stats import compute_stats

        spec = car_spec(n_scans=40, background_points=50)
        manifest = generate_synthetic_dataset(spec, tmp_path / "raw", seed=5)
        descriptor = load_descriptor(manifest.descriptor_path)
        harmonized = harmonize_dataset(manifest, descriptor, tmp_path / "harm")
        report = compute_stats(harmonized)
        entry = report.classes[CoarseLabel.SMALL_VEHICLE]
        n = entry.instance_count
        assert entry.mean_instances_per_scan == pytest.approx(
            3.8, abs=2 * math.sqrt(3.8 / 40)
        )
        for mean, expected in zip(entry.mean_dims, (3.9, 1.6, 1.5)):
            assert mean == pytest.approx(expected, abs=2 * 0.05 / math.sqrt(n))

    def test_fov_dataset_annotates_front_only(self, tmp_path):
        spec = car_spec(annotation_fov=math.pi / 2, n_scans=6)
        manifest = generate_synthetic_dataset(spec, tmp_path / "d", seed=9)
        for entry in manifest.entries:
            for box in manifest.load(entry).boxes:
                azimuth = math.atan2(box.center[1], box.center[0])
                assert abs(azimuth) <= math.pi / 4 + 1e-9


class TestSpecFile:
    def test_load(self, tmp_path):
        path = tmp_path / "synth.cfg"
        path.write_text(
            "dataset_id once_synth\n"
            "scans 12\n"
            "background_points 500\n"
            "xy_range 35.0\n"
            "z_offset -0.4\n"
            "class Car SmallVehicle 19.8 4.4 1.8 1.6 0.05 70\n"
            "class Bus LargeVehicle 0.6 10.7 2.9 3.3 0.1 200\n"
        )
        spec = load_synthetic_spec(path)
        assert spec.dataset_id == "once_synth"
        assert spec.n_scans == 12
        assert len(spec.classes) == 2
        assert spec.classes[1].mean_dims == (10.7, 2.9, 3.3)

    def test_conflicting_raw_label_targets_rejected(self):
        with pytest.raises(ConfigError, match="maps to both"):
            SyntheticSpec(
                dataset_id="x",
                n_scans=1,
                classes=[
                    SyntheticClassSpec("V", "SmallVehicle", 1.0, (4, 2, 1.5)),
                    SyntheticClassSpec("V", "LargeVehicle", 1.0, (10, 3, 3)),
                ],
            )

    def test_missing_required_lines(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("dataset_id x\n")
        with pytest.raises(ConfigError, match="needs dataset_id and scans"):
            load_synthetic_spec(path)
