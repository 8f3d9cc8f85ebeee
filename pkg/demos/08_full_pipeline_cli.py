#!/usr/bin/env python3
"""The whole pipeline through the CLI, leave-one-out style: three synthetic
training datasets, one held-out target, ending in an evaluation report.

Run: python demos/08_full_pipeline_cli.py
"""
import tempfile
from pathlib import Path

from lidarmix.cli import main
from lidarmix.dataio import load_labels, load_manifest
from lidarmix.evaluation import Detection, save_detections

work = Path(tempfile.mkdtemp(prefix="lidarmix_demo_"))
print(f"=== full pipeline via the CLI (under {work}) ===\n")

SPEC = """\
dataset_id {ds}
scans {scans}
background_points 200
xy_range 32.0
z_offset {z}
class Car SmallVehicle {cars} {dims} 0.05 50
class Pedestrian Pedestrian 1.5 0.8 0.6 1.8 0.03 25
"""
DATASETS = {
    "kitti_synth": dict(scans=8, cars=3.8, dims="3.9 1.6 1.5", z=-0.2),
    "once_synth": dict(scans=10, cars=6.0, dims="4.4 1.8 1.6", z=0.3),
    "nusc_synth": dict(scans=12, cars=5.0, dims="4.6 2.0 1.7", z=-0.5),
    "waymo_synth": dict(scans=8, cars=4.0, dims="4.6 2.1 1.7", z=0.0),  # target
}
TRAINS = ["kitti_synth", "once_synth", "nusc_synth"]
TARGET = "waymo_synth"


def run(*argv):
    argv = [str(a) for a in argv]
    print(f"$ lidarmix {' '.join(argv)}")
    code = main(argv)
    assert code == 0, f"exit {code}"
    print()


for ds, cfg in DATASETS.items():
    (work / f"{ds}.cfg").write_text(SPEC.format(ds=ds, **cfg))
    run("synth", "--spec", work / f"{ds}.cfg", "--out", work / f"raw_{ds}", "--seed", 7)
    run("harmonize", "--manifest", work / f"raw_{ds}" / "manifest.txt", "--out", work / f"harm_{ds}")

for ds in TRAINS:
    run("stats", "--manifest", work / f"harm_{ds}" / "manifest.txt", "--out", work / f"{ds}.stats")
    run("bank", "--manifest", work / f"harm_{ds}" / "manifest.txt", "--out", work / f"{ds}.bank")

# the pipeline config ties training manifests, stats, and banks together;
# the held-out target may not appear in the training list
(work / "pipeline.cfg").write_text(
    f"target {TARGET}\n"
    + "".join(f"train {ds} harm_{ds}/manifest.txt stats={ds}.stats.kv bank={ds}.bank\n" for ds in TRAINS)
    + "seed 42\n"
)
run("epoch", "--config", work / "pipeline.cfg", "--epochs", 2, "--out", work / "plans")
run("augment", "--config", work / "pipeline.cfg", "--plan", work / "plans" / "plan_e000.txt",
    "--out", work / "aug_e000", "--workers", 2)

# a stand-in detector: echo the target's ground truth (a detector's output
# file has one 'scan_id class confidence yaw cx cy cz l w h' line per box)
target_manifest = load_manifest(work / f"harm_{TARGET}" / "manifest.txt")
dets = [
    Detection(scan_id=e.scan_id, box=b, confidence=1.0)
    for e in target_manifest.entries
    for b in load_labels(e.label_path)
]
save_detections(dets, work / "dets.txt")
(work / "eval.cfg").write_text("class SmallVehicle 0.7\nclass Pedestrian 0.5\n")
run("eval", "--detections", work / "dets.txt", "--manifest", work / f"harm_{TARGET}" / "manifest.txt",
    "--eval-config", work / "eval.cfg", "--out", work / "report.txt")

print("report written to", work / "report.txt")
print((work / "report.txt").read_text())
