"""Detection evaluation: greedy matching, 40-point interpolated AP, mAP.

Matching follows the KITTI convention: detections are visited in
confidence-descending order and each claims the unmatched same-scan
ground-truth box of highest IoU at or above the class threshold. AP
averages interpolated precision (max precision at any recall >= level)
over the 40 recall levels r/40, r = 1..40.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .dataio import DatasetManifest, load_labels
from .errors import DataError, MalformedRecordError
from .geometry import Box3D, iou3d
from .labels import CoarseLabel

N_RECALL_LEVELS = 40

DEFAULT_IOU_THRESHOLDS = {
    CoarseLabel.SMALL_VEHICLE: 0.7,
    CoarseLabel.MEDIUM_VEHICLE: 0.7,
    CoarseLabel.LARGE_VEHICLE: 0.7,
    CoarseLabel.TWO_WHEELS: 0.5,
    CoarseLabel.PEDESTRIAN: 0.5,
}


@dataclass
class Detection:
    scan_id: str
    box: Box3D  # label must be a coarse label name
    confidence: float


@dataclass
class EvalConfig:
    """Per-class IoU thresholds; the key set is the evaluated class subset."""

    thresholds: dict[CoarseLabel, float] = field(
        default_factory=lambda: dict(DEFAULT_IOU_THRESHOLDS)
    )

    def __post_init__(self):
        if not self.thresholds:
            raise DataError("eval config needs a non-empty class subset")
        for label, thresh in self.thresholds.items():
            if not 0.0 < thresh <= 1.0:
                raise DataError(f"IoU threshold for {label.value} outside (0, 1]")

    @property
    def subset(self) -> list[CoarseLabel]:
        return [label for label in CoarseLabel if label in self.thresholds]


@dataclass
class ClassEval:
    ap: float
    num_gt: int
    num_det: int
    num_tp: int
    num_fp: int
    undefined: bool  # no ground truth for this class


@dataclass
class EvalReport:
    per_class: dict[CoarseLabel, ClassEval]
    mean_ap: float


def match_class(
    detections: list[Detection],
    ground_truths: list[tuple[str, Box3D]],
    iou_thresh: float,
) -> tuple[list[bool], int]:
    """TP/FP flags in confidence-descending order, plus the gt count.

    All inputs must share one class; grouping by scan happens here. Ties in
    confidence keep input order; each gt box is claimed at most once.
    """
    order = sorted(range(len(detections)), key=lambda i: -detections[i].confidence)
    gt_by_scan: dict[str, list[Box3D]] = {}
    for scan_id, box in ground_truths:
        gt_by_scan.setdefault(scan_id, []).append(box)
    matched: dict[str, list[bool]] = {
        scan_id: [False] * len(boxes) for scan_id, boxes in gt_by_scan.items()
    }

    flags = []
    for i in order:
        det = detections[i]
        candidates = gt_by_scan.get(det.scan_id, [])
        best_iou = 0.0
        best_j = -1
        for j, gt_box in enumerate(candidates):
            if matched[det.scan_id][j]:
                continue
            overlap = iou3d(det.box, gt_box)
            if overlap >= iou_thresh and overlap > best_iou:
                best_iou = overlap
                best_j = j
        if best_j >= 0:
            matched[det.scan_id][best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags, len(ground_truths)


def ap40(flags: list[bool], num_gt: int) -> float:
    """Mean interpolated precision over the 40 recall levels r/40.

    Levels the recall never reaches contribute 0; with no ground truth the
    result is 0 (callers flag it as undefined).
    """
    if num_gt < 0:
        raise ValueError(f"num_gt must be >= 0, got {num_gt}")
    if num_gt == 0 or not flags:
        return 0.0
    precisions = []
    recalls = []
    tp = 0
    for i, flag in enumerate(flags, start=1):
        if flag:
            tp += 1
        precisions.append(tp / i)
        recalls.append(tp / num_gt)

    total = 0.0
    for r in range(1, N_RECALL_LEVELS + 1):
        level = r / N_RECALL_LEVELS
        best = 0.0
        for precision, recall in zip(precisions, recalls):
            if recall >= level and precision > best:
                best = precision
        total += best
    return total / N_RECALL_LEVELS


def evaluate(
    detections: list[Detection],
    manifest: DatasetManifest,
    config: EvalConfig | None = None,
) -> EvalReport:
    """Per-class AP over the configured subset plus their arithmetic mean.

    Detections for classes outside the subset are ignored entirely; a
    detection naming a scan_id absent from the manifest is an error.
    Ground-truth labels come from the manifest's label files only (no
    point data is read).
    """
    config = config or EvalConfig()
    known_scans = set(manifest.scan_ids())
    det_labels = []
    for det in detections:
        if det.scan_id not in known_scans:
            raise DataError(
                f"detection references unknown scan_id '{det.scan_id}' "
                f"(dataset {manifest.dataset_id})"
            )
        try:
            det_labels.append(CoarseLabel(det.box.label))
        except ValueError:
            raise DataError(
                f"detection label '{det.box.label}' is not a coarse label"
            ) from None

    gt_by_class: dict[CoarseLabel, list[tuple[str, Box3D]]] = {
        label: [] for label in config.subset
    }
    for entry in manifest.entries:
        for box in load_labels(entry.label_path):
            label = CoarseLabel(box.label)
            if label in gt_by_class:
                gt_by_class[label].append((entry.scan_id, box))

    per_class: dict[CoarseLabel, ClassEval] = {}
    for label in config.subset:
        dets = [d for d, dl in zip(detections, det_labels) if dl == label]
        flags, num_gt = match_class(dets, gt_by_class[label], config.thresholds[label])
        ap = ap40(flags, num_gt)
        num_tp = sum(flags)
        per_class[label] = ClassEval(
            ap=ap,
            num_gt=num_gt,
            num_det=len(dets),
            num_tp=num_tp,
            num_fp=len(flags) - num_tp,
            undefined=num_gt == 0,
        )
    mean_ap = sum(c.ap for c in per_class.values()) / len(per_class)
    return EvalReport(per_class=per_class, mean_ap=mean_ap)


# ---------------------------------------------------------------------------
# file formats


def load_eval_config(path) -> EvalConfig:
    """Config file with one ``class <CoarseLabel> <iou_threshold>`` per line."""
    path = Path(path)
    thresholds: dict[CoarseLabel, float] = {}
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) != 3 or tokens[0] != "class":
                raise MalformedRecordError(
                    f"{path}:{line_no}: expected 'class <label> <threshold>'"
                )
            try:
                thresholds[CoarseLabel(tokens[1])] = float(tokens[2])
            except ValueError as exc:
                raise MalformedRecordError(f"{path}:{line_no}: {exc}") from exc
    return EvalConfig(thresholds=thresholds)


def load_detections(path) -> list[Detection]:
    """One detection per line: scan_id class confidence yaw cx cy cz l w h."""
    path = Path(path)
    detections = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) != 10:
                raise MalformedRecordError(
                    f"{path}:{line_no}: expected 10 fields, got {len(tokens)}"
                )
            try:
                confidence, yaw, cx, cy, cz, l, w, h = (float(t) for t in tokens[2:])
                box = Box3D(
                    label=tokens[1], yaw=yaw, center=(cx, cy, cz), dims=(l, w, h)
                )
            except ValueError as exc:
                raise MalformedRecordError(f"{path}:{line_no}: {exc}") from exc
            detections.append(
                Detection(scan_id=tokens[0], box=box, confidence=confidence)
            )
    return detections


def save_detections(detections: list[Detection], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for det in detections:
        cx, cy, cz = det.box.center
        l, w, h = det.box.dims
        fields = [det.scan_id, det.box.label] + [
            repr(float(v)) for v in (det.confidence, det.box.yaw, cx, cy, cz, l, w, h)
        ]
        lines.append(" ".join(fields))
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def report_to_text(report: EvalReport) -> str:
    lines = [
        f"{'class':<14} {'AP':>8} {'gt':>6} {'det':>6} {'TP':>6} {'FP':>6}",
    ]
    for label, entry in report.per_class.items():
        suffix = "  (undefined: no ground truth)" if entry.undefined else ""
        lines.append(
            f"{label.value:<14} {entry.ap:>8.4f} {entry.num_gt:>6d} "
            f"{entry.num_det:>6d} {entry.num_tp:>6d} {entry.num_fp:>6d}{suffix}"
        )
    lines.append(f"mAP {report.mean_ap:.4f}")
    return "".join(line + "\n" for line in lines)


def report_to_kv(report: EvalReport) -> str:
    lines = []
    for label, entry in report.per_class.items():
        key = label.value
        lines.append(f"{key}.ap={repr(entry.ap)}")
        lines.append(f"{key}.num_gt={entry.num_gt}")
        lines.append(f"{key}.num_det={entry.num_det}")
        lines.append(f"{key}.num_tp={entry.num_tp}")
        lines.append(f"{key}.num_fp={entry.num_fp}")
        lines.append(f"{key}.undefined={int(entry.undefined)}")
    lines.append(f"mAP={repr(report.mean_ap)}")
    return "".join(line + "\n" for line in lines)


def save_report(report: EvalReport, path) -> None:
    """Write the text report plus its key=value twin (path + '.kv')."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report_to_text(report), encoding="utf-8")
    path.with_suffix(path.suffix + ".kv").write_text(
        report_to_kv(report), encoding="utf-8"
    )
