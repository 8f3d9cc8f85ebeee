"""Balanced multi-dataset epoch construction and eval subsampling.

Each epoch takes the same number of scans from every training dataset
(the minimum dataset size by default), sampled uniformly without
replacement, then concatenates and shuffles them. Every epoch resamples,
so diversity beyond the per-epoch quota is exploited over training.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

from .dataio import DatasetManifest
from .errors import DataError, MalformedRecordError
from .rng import derive_rng


@dataclass
class EpochPlan:
    """Ordered (dataset_id, scan_id) references for one training epoch."""

    epoch: int
    entries: list[tuple[str, str]]
    base_seed: int

    def __len__(self) -> int:
        return len(self.entries)

    def count_for(self, dataset_id: str) -> int:
        return sum(1 for ds, _ in self.entries if ds == dataset_id)


def plan_epoch(
    manifests: list[DatasetManifest],
    epoch: int,
    base_seed: int,
    scans_per_dataset: int | None = None,
) -> EpochPlan:
    """Build the shuffled, balanced scan list for one epoch.

    scans_per_dataset defaults to the minimum dataset size. Per-dataset
    draws use streams keyed by (seed, epoch, dataset_id) so the plan does
    not depend on manifest iteration order internals; the concatenation is
    then shuffled with its own (seed, epoch) stream.
    """
    if not manifests:
        raise DataError("plan_epoch needs at least one manifest")
    sizes = [len(m) for m in manifests]
    quota = min(sizes) if scans_per_dataset is None else scans_per_dataset
    if quota < 1:
        raise DataError(f"scans per dataset must be >= 1, got {quota}")
    if any(quota > size for size in sizes):
        raise DataError(
            f"scans per dataset {quota} exceeds a dataset size (sizes {sizes})"
        )

    entries: list[tuple[str, str]] = []
    for manifest in manifests:
        rng = derive_rng(base_seed, epoch, "epoch-draw", manifest.dataset_id)
        picks = rng.permutation(len(manifest))[:quota]
        ids = manifest.scan_ids()
        entries.extend((manifest.dataset_id, ids[i]) for i in sorted(picks))

    shuffle_rng = derive_rng(base_seed, epoch, "epoch-shuffle")
    order = shuffle_rng.permutation(len(entries))
    return EpochPlan(
        epoch=epoch,
        entries=[entries[i] for i in order],
        base_seed=base_seed,
    )


def subsample_eval(
    manifest: DatasetManifest, fraction: float, seed: int
) -> DatasetManifest:
    """Fixed uniform subset of ceil(fraction * size) scans, order preserved."""
    if not 0.0 < fraction <= 1.0:
        raise DataError(f"fraction must be in (0, 1], got {fraction}")
    n = len(manifest)
    keep = math.ceil(fraction * n)
    if keep >= n:
        return manifest
    rng = derive_rng(seed, "eval-subsample", manifest.dataset_id)
    picks = sorted(rng.permutation(n)[:keep])
    return replace(manifest, entries=[manifest.entries[i] for i in picks])


# ---------------------------------------------------------------------------
# plan files: '# key value' header lines, then one 'dataset_id scan_id' per line


def save_plan(plan: EpochPlan, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# epoch {plan.epoch}", f"# base_seed {plan.base_seed}"]
    lines.extend(f"{ds} {scan}" for ds, scan in plan.entries)
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_plan(path) -> EpochPlan:
    path = Path(path)
    epoch = 0
    base_seed = 0
    entries: list[tuple[str, str]] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                tokens = line[1:].split()
                if len(tokens) == 2 and tokens[0] == "epoch":
                    epoch = int(tokens[1])
                elif len(tokens) == 2 and tokens[0] == "base_seed":
                    base_seed = int(tokens[1])
                continue
            tokens = line.split()
            if len(tokens) != 2:
                raise MalformedRecordError(
                    f"{path}:{line_no}: expected 'dataset_id scan_id', got {line!r}"
                )
            entries.append((tokens[0], tokens[1]))
    return EpochPlan(epoch=epoch, entries=entries, base_seed=base_seed)
