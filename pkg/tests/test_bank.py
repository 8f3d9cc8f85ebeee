import hashlib
import math

import numpy as np
import pytest

from lidarmix.bank import (
    InstanceBank,
    InstanceRecord,
    build_bank,
    globalize_points,
    load_bank,
    localize_points,
    save_bank,
    validate_record,
)
from lidarmix.dataio import (
    DatasetDescriptor,
    DatasetManifest,
    ManifestEntry,
    Scan,
    save_descriptor,
    save_scan,
)
from lidarmix.geometry import Box3D, points_in_box
from lidarmix.labels import CoarseLabel
from lidarmix.rng import derive_rng


def harmonized_box(label="SmallVehicle", yaw=0.3, center=(8.0, 2.0, 0.75), dims=(3.9, 1.6, 1.5)):
    return Box3D(label=label, yaw=yaw, center=center, dims=dims)


def write_dataset(tmp_path, scans):
    """Materialize a list of Scan objects as a harmonized dataset."""
    entries = []
    for scan in scans:
        point_path = tmp_path / "points" / f"{scan.scan_id}.pts"
        label_path = tmp_path / "labels" / f"{scan.scan_id}.lbl"
        save_scan(scan, point_path, label_path)
        entries.append(
            ManifestEntry(scan_id=scan.scan_id, point_path=point_path, label_path=label_path)
        )
    descriptor = DatasetDescriptor(
        dataset_id=scans[0].dataset_id,
        label_map={label.value: label.value for label in CoarseLabel},
    )
    descriptor_path = tmp_path / "descriptor.txt"
    save_descriptor(descriptor, descriptor_path)
    return DatasetManifest(
        dataset_id=scans[0].dataset_id, entries=entries, descriptor_path=descriptor_path
    )


def scan_with_box(scan_id, box, n_inside, n_outside=20, dataset_id="d", seed=0):
    rng = np.random.default_rng(seed)
    local = rng.uniform(-0.5, 0.5, size=(n_inside, 3)) * np.array(box.dims)
    inside = globalize_points(local, box.center, box.yaw)
    outside = rng.uniform(30.0, 40.0, size=(n_outside, 3))
    return Scan(
        points=np.vstack([inside, outside]),
        boxes=[box],
        dataset_id=dataset_id,
        scan_id=scan_id,
    )


class TestLocalization:
    def test_round_trip(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(-5, 5, size=(100, 3))
        center, yaw = (3.0, -2.0, 0.5), 0.7
        back = globalize_points(localize_points(pts, center, yaw), center, yaw)
        np.testing.assert_allclose(back, pts, atol=1e-12)

    def test_local_points_satisfy_box_bounds(self, tmp_path):
        box = harmonized_box()
        manifest = write_dataset(tmp_path, [scan_with_box("a", box, 25)])
        bank, _ = build_bank(manifest, min_points=5)
        rec = bank.records[CoarseLabel.SMALL_VEHICLE][0]
        validate_record(rec)  # raises if any point leaves the box


class TestBuildBank:
    def test_single_box_ten_points(self, tmp_path):
        box = harmonized_box()
        manifest = write_dataset(tmp_path, [scan_with_box("a", box, 10)])
        bank, report = build_bank(manifest, min_points=5)
        assert report.kept == 1
        assert report.skipped_few_points == 0
        rec = bank.records[CoarseLabel.SMALL_VEHICLE][0]
        assert rec.local_points.shape == (10, 3)
        assert rec.dims == box.dims
        assert rec.yaw == pytest.approx(box.yaw)
        assert rec.range_bev == pytest.approx(math.hypot(8.0, 2.0))

    def test_below_min_points_skipped_and_counted(self, tmp_path):
        box = harmonized_box()
        manifest = write_dataset(tmp_path, [scan_with_box("a", box, 3)])
        bank, report = build_bank(manifest, min_points=5)
        assert report.kept == 0
        assert report.skipped_few_points == 1
        assert bank.size(CoarseLabel.SMALL_VEHICLE) == 0

    def test_scan_without_boxes_contributes_nothing(self, tmp_path):
        empty = Scan(
            points=np.zeros((4, 3)), boxes=[], dataset_id="d", scan_id="empty"
        )
        manifest = write_dataset(tmp_path, [empty])
        bank, report = build_bank(manifest)
        assert report.kept == 0
        assert all(len(v) == 0 for v in bank.records.values())

    def test_replacing_record_reproduces_contained_points(self, tmp_path):
        box = harmonized_box(yaw=1.1, center=(12.0, -4.0, 0.6))
        scan = scan_with_box("a", box, 40, seed=3)
        manifest = write_dataset(tmp_path, [scan])
        bank, _ = build_bank(manifest, min_points=5)
        rec = bank.records[CoarseLabel.SMALL_VEHICLE][0]
        replaced = globalize_points(
            rec.local_points.astype(np.float64), box.center, box.yaw
        )
        stored = manifest.load(manifest.entries[0])
        original = stored.points[points_in_box(box, stored.points)]
        np.testing.assert_allclose(
            np.sort(replaced, axis=0), np.sort(original, axis=0), atol=1e-4
        )

    def test_build_deterministic_and_parallel_stable(self, tmp_path):
        boxes = [
            harmonized_box(center=(10.0, 0.0, 0.75)),
            harmonized_box(label="Pedestrian", center=(5.0, 5.0, 0.9), dims=(0.8, 0.6, 1.8)),
        ]
        scans = [
            scan_with_box(f"s{i}", boxes[i % 2], 12 + i, seed=i, dataset_id="d")
            for i in range(6)
        ]
        manifest = write_dataset(tmp_path, scans)

        def digest(bank, stem):
            save_bank(bank, stem)
            index = stem.with_suffix(stem.suffix + ".idx").read_bytes()
            blob = stem.with_suffix(stem.suffix + ".pts").read_bytes()
            return hashlib.sha256(index + blob).hexdigest()

        b1, _ = build_bank(manifest, workers=1)
        b2, _ = build_bank(manifest, workers=8)
        assert digest(b1, tmp_path / "w1.bank") == digest(b2, tmp_path / "w8.bank")


class TestDraw:
    def make_bank(self, n_records):
        bank = InstanceBank(dataset_id="d", min_points=5)
        for i in range(n_records):
            bank.records.setdefault(CoarseLabel.SMALL_VEHICLE, []).append(
                InstanceRecord(
                    label=CoarseLabel.SMALL_VEHICLE,
                    dataset_id="d",
                    scan_id=f"s{i}",
                    dims=(4.0, 2.0, 1.5),
                    yaw=0.0,
                    range_bev=10.0,
                    local_points=np.zeros((6, 3), dtype=np.float32),
                )
            )
        return bank

    def test_n_zero(self):
        records, shortfall = self.make_bank(3).draw(
            CoarseLabel.SMALL_VEHICLE, 0, derive_rng(0)
        )
        assert records == [] and shortfall == 0

    def test_with_replacement_single_record(self):
        bank = self.make_bank(1)
        records, shortfall = bank.draw(CoarseLabel.SMALL_VEHICLE, 3, derive_rng(0))
        assert shortfall == 0
        assert len(records) == 3
        assert all(r.scan_id == "s0" for r in records)

    def test_empty_class_shortfall(self):
        bank = self.make_bank(2)
        records, shortfall = bank.draw(CoarseLabel.LARGE_VEHICLE, 2, derive_rng(0))
        assert records == [] and shortfall == 2

    def test_seeded_reproducibility(self):
        bank = self.make_bank(10)
        a, _ = bank.draw(CoarseLabel.SMALL_VEHICLE, 20, derive_rng(42, "draw"))
        b, _ = bank.draw(CoarseLabel.SMALL_VEHICLE, 20, derive_rng(42, "draw"))
        assert [r.scan_id for r in a] == [r.scan_id for r in b]


class TestBankFiles:
    def test_round_trip(self, tmp_path):
        box = harmonized_box()
        manifest = write_dataset(tmp_path, [scan_with_box("a", box, 15)])
        bank, _ = build_bank(manifest)
        stem = tmp_path / "d.bank"
        save_bank(bank, stem)
        loaded = load_bank(stem)
        assert loaded.dataset_id == bank.dataset_id
        assert loaded.min_points == bank.min_points
        orig = bank.records[CoarseLabel.SMALL_VEHICLE][0]
        back = loaded.records[CoarseLabel.SMALL_VEHICLE][0]
        assert back.dims == orig.dims
        assert back.yaw == orig.yaw
        assert back.range_bev == orig.range_bev
        np.testing.assert_array_equal(back.local_points, orig.local_points)

    def test_save_idempotent_bytes(self, tmp_path):
        box = harmonized_box()
        manifest = write_dataset(tmp_path, [scan_with_box("a", box, 15)])
        bank, _ = build_bank(manifest)
        save_bank(bank, tmp_path / "one.bank")
        save_bank(load_bank(tmp_path / "one.bank"), tmp_path / "two.bank")
        assert (tmp_path / "one.bank.idx").read_bytes() == (
            tmp_path / "two.bank.idx"
        ).read_bytes()
        assert (tmp_path / "one.bank.pts").read_bytes() == (
            tmp_path / "two.bank.pts"
        ).read_bytes()
