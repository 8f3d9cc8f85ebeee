"""Command-line front-end for the pipeline.

Subcommands: synth, harmonize, stats, bank, epoch, augment, eval. Exit
codes: 0 success, 1 usage/config error, 2 data error, 3 I/O error. Every
command prints its effective seed set so artifacts can be replayed, and
refuses to overwrite existing outputs unless --force is given.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import augment as aug
from . import evaluation as ev
from .bank import build_bank, load_bank, save_bank
from .dataio import (
    DatasetDescriptor,
    DatasetManifest,
    ManifestEntry,
    load_descriptor,
    load_manifest,
    save_descriptor,
    save_manifest,
    save_scan,
)
from .errors import ConfigError, DataError
from .harmonize import harmonize_dataset
from .labels import CoarseLabel
from .parallel import parallel_map
from .rng import derive_rng
from .sampler import load_plan, plan_epoch, save_plan, subsample_eval
from .stats import compute_stats, histogram_to_csv, load_report_kv, save_report
from .synthetic import generate_synthetic_dataset, load_synthetic_spec

WORKERS_ENV = "LIDARMIX_WORKERS"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3


@dataclass
class TrainEntry:
    dataset_id: str
    manifest_path: Path
    stats_path: Path | None = None
    bank_stem: Path | None = None


@dataclass
class PipelineConfig:
    """Training-set layout for the epoch/augment stages.

    The target dataset is excluded from training by construction
    (leave-one-out); a config listing it among the train entries is
    rejected at load time.
    """

    target: str
    trains: list[TrainEntry]
    seed: int | None = None
    policy_path: Path | None = None
    eval_config_path: Path | None = None
    out_dir: Path | None = None

    def __post_init__(self):
        if not self.trains:
            raise ConfigError("pipeline config lists no training datasets")
        ids = [t.dataset_id for t in self.trains]
        if len(set(ids)) != len(ids):
            raise ConfigError("pipeline config lists a training dataset twice")
        if self.target in ids:
            raise ConfigError(
                f"target dataset '{self.target}' appears in the training list "
                "(leave-one-out violated)"
            )


def load_pipeline_config(path) -> PipelineConfig:
    path = Path(path)
    root = path.parent
    fields: dict = {"trains": []}
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            key = tokens[0]
            if key == "target" and len(tokens) == 2:
                fields["target"] = tokens[1]
            elif key == "seed" and len(tokens) == 2:
                fields["seed"] = int(tokens[1])
            elif key == "policy" and len(tokens) == 2:
                fields["policy_path"] = root / tokens[1]
            elif key == "eval_config" and len(tokens) == 2:
                fields["eval_config_path"] = root / tokens[1]
            elif key == "out_dir" and len(tokens) == 2:
                fields["out_dir"] = root / tokens[1]
            elif key == "train" and len(tokens) >= 3:
                entry = TrainEntry(dataset_id=tokens[1], manifest_path=root / tokens[2])
                for extra in tokens[3:]:
                    if "=" not in extra:
                        raise ConfigError(
                            f"{path}:{line_no}: expected key=value, got {extra!r}"
                        )
                    k, v = extra.split("=", 1)
                    if k == "stats":
                        entry.stats_path = root / v
                    elif k == "bank":
                        entry.bank_stem = root / v
                    else:
                        raise ConfigError(f"{path}:{line_no}: unknown train key {k!r}")
                fields["trains"].append(entry)
            else:
                raise ConfigError(
                    f"{path}:{line_no}: unrecognized pipeline config line {line!r}"
                )
    if "target" not in fields:
        raise ConfigError(f"{path}: pipeline config needs a target line")
    return PipelineConfig(**fields)


# ---------------------------------------------------------------------------
# helpers


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors -> exit 1, not argparse's 2
        raise ConfigError(message)


def _print_seeds(**seeds) -> None:
    rendered = " ".join(f"{k}={v}" for k, v in seeds.items())
    print(f"effective seeds: {rendered}")


def _refuse_existing(path: Path, force: bool) -> None:
    if path.exists() and not force:
        raise ConfigError(f"output {path} exists; pass --force to overwrite")


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    return int(os.environ.get(WORKERS_ENV, "1"))


def _effective_seed(flag_seed, config_seed, what="seed") -> int:
    if flag_seed is not None:
        return flag_seed
    if config_seed is not None:
        return config_seed
    raise ConfigError(f"no {what} given (config has none and no --seed flag)")


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    spec = load_synthetic_spec(args.spec)
    out_dir = Path(args.out)
    _refuse_existing(out_dir / "manifest.txt", args.force)
    _print_seeds(base=args.seed)
    manifest = generate_synthetic_dataset(spec, out_dir, seed=args.seed)
    print(f"wrote {len(manifest)} scans to {out_dir}")
    return EXIT_OK


def cmd_harmonize(args) -> int:
    manifest = load_manifest(args.manifest)
    descriptor_path = args.descriptor or manifest.descriptor_path
    descriptor = load_descriptor(descriptor_path)
    out_dir = Path(args.out)
    _refuse_existing(out_dir / "manifest.txt", args.force)
    _print_seeds(base=args.seed)
    out = harmonize_dataset(
        manifest, descriptor, out_dir, seed=args.seed, workers=_workers(args)
    )
    print(f"harmonized {len(out)} scans of {out.dataset_id} into {out_dir}")
    return EXIT_OK


def cmd_stats(args) -> int:
    manifest = load_manifest(args.manifest)
    out = Path(args.out)
    _refuse_existing(out, args.force)
    print("effective seeds: none (stage is deterministic)")
    report = compute_stats(manifest, bin_width=args.bin_width, workers=_workers(args))
    save_report(report, out)
    if args.hist_csv:
        hist_dir = Path(args.hist_csv)
        hist_dir.mkdir(parents=True, exist_ok=True)
        for label in report.classes:
            csv_path = hist_dir / f"{manifest.dataset_id}_{label.value}.csv"
            csv_path.write_text(histogram_to_csv(report, label), encoding="utf-8")
    print(f"stats for {manifest.dataset_id} written to {out} (+ .kv)")
    return EXIT_OK


def cmd_bank(args) -> int:
    manifest = load_manifest(args.manifest)
    stem = Path(args.out)
    _refuse_existing(stem.with_suffix(stem.suffix + ".idx"), args.force)
    print("effective seeds: none (stage is deterministic)")
    bank, report = build_bank(
        manifest, min_points=args.min_points, workers=_workers(args)
    )
    save_bank(bank, stem)
    print(
        f"bank for {manifest.dataset_id}: kept {report.kept} records, "
        f"skipped {report.skipped_few_points} below {args.min_points} points"
    )
    return EXIT_OK


def cmd_epoch(args) -> int:
    config = load_pipeline_config(args.config)
    seed = _effective_seed(args.seed, config.seed)
    manifests = [load_manifest(t.manifest_path) for t in config.trains]
    out_dir = Path(args.out)
    _refuse_existing(out_dir / "plan_e000.txt", args.force)
    _print_seeds(base=seed)
    for epoch in range(args.epochs):
        plan = plan_epoch(
            manifests, epoch, seed, scans_per_dataset=args.scans_per_dataset
        )
        save_plan(plan, out_dir / f"plan_e{epoch:03d}.txt")
        print(f"epoch {epoch}: {len(plan)} scans ({len(manifests)} datasets)")
    return EXIT_OK


def cmd_augment(args) -> int:
    config = load_pipeline_config(args.config)
    seed = _effective_seed(args.seed, config.seed)
    plan = load_plan(args.plan)
    out_dir = Path(args.out)
    _refuse_existing(out_dir / "manifest.txt", args.force)
    _print_seeds(base=seed, epoch=plan.epoch)

    manifests = {}
    entries_by_id = {}
    for train in config.trains:
        manifest = load_manifest(train.manifest_path)
        manifests[train.dataset_id] = manifest
        entries_by_id[train.dataset_id] = {
            entry.scan_id: entry for entry in manifest.entries
        }
    missing = [ds for ds, _ in plan.entries if ds not in manifests]
    if missing:
        raise DataError(f"plan references datasets not in config: {sorted(set(missing))}")

    stats = []
    banks = []
    for train in config.trains:
        if train.stats_path is None or train.bank_stem is None:
            raise ConfigError(
                f"train entry '{train.dataset_id}' needs stats= and bank= paths "
                "for augmentation"
            )
        stats.append(aug.ClassStats.from_report(load_report_kv(train.stats_path)))
        banks.append(load_bank(train.bank_stem))

    if config.policy_path is not None:
        policy, params = aug.load_policy(config.policy_path)
    else:
        policy, params = aug.InjectionPolicy(), aug.GlobalAugmentParams()

    def process(item):
        index, (dataset_id, scan_id) = item
        entry = entries_by_id[dataset_id].get(scan_id)
        if entry is None:
            raise DataError(f"plan entry {dataset_id}/{scan_id} not in its manifest")
        scan = manifests[dataset_id].load(entry)
        rng = derive_rng(seed, "augment", plan.epoch, index)
        scan, report = aug.inject(scan, banks, stats, policy, rng)
        scan = aug.global_augment(scan, params, rng)
        out_id = f"{index:05d}_{dataset_id}_{scan_id}"
        point_path = out_dir / "points" / f"{out_id}.pts"
        label_path = out_dir / "labels" / f"{out_id}.lbl"
        save_scan(scan, point_path, label_path)
        new_entry = ManifestEntry(
            scan_id=out_id, point_path=point_path, label_path=label_path
        )
        return new_entry, report

    results = parallel_map(process, list(enumerate(plan.entries)), _workers(args))

    injected = sum(r.total_injected() for _, r in results)
    shortfall = sum(r.total_shortfall() for _, r in results)
    train_id = f"train_epoch{plan.epoch:03d}"
    descriptor = DatasetDescriptor(
        dataset_id=train_id,
        label_map={label.value: label.value for label in CoarseLabel},
    )
    descriptor_path = out_dir / "descriptor.txt"
    save_descriptor(descriptor, descriptor_path)
    out_manifest = DatasetManifest(
        dataset_id=train_id,
        entries=[entry for entry, _ in results],
        descriptor_path=descriptor_path,
    )
    save_manifest(out_manifest, out_dir / "manifest.txt")
    print(
        f"augmented {len(results)} scans: {injected} instances injected, "
        f"{shortfall} shortfall"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    detections = ev.load_detections(args.detections)
    out = Path(args.out)
    _refuse_existing(out, args.force)
    if args.fraction < 1.0:
        if args.seed is None:
            raise ConfigError("--fraction needs --seed for a fixed subsample")
        _print_seeds(subsample=args.seed)
        manifest = subsample_eval(manifest, args.fraction, args.seed)
        kept = set(manifest.scan_ids())
        detections = [d for d in detections if d.scan_id in kept]
        print(f"evaluating fixed subsample of {len(manifest)} scans")
    else:
        print("effective seeds: none (full evaluation set)")
    config = ev.load_eval_config(args.eval_config) if args.eval_config else ev.EvalConfig()
    report = ev.evaluate(detections, manifest, config)
    ev.save_report(report, out)
    sys.stdout.write(ev.report_to_text(report))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lidarmix", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_workers(p):
        p.add_argument(
            "--workers",
            type=int,
            default=None,
            help=f"worker threads (default: ${WORKERS_ENV} or 1); results are "
            "identical for any count",
        )

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, help="synthetic spec file")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("harmonize", help="convert a dataset to canonical form")
    p.add_argument("--manifest", required=True)
    p.add_argument("--descriptor", default=None, help="override the manifest's descriptor")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true")
    add_workers(p)
    p.set_defaults(fn=cmd_harmonize)

    p = sub.add_parser("stats", help="compute dataset statistics")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="report path (key=value twin at +.kv)")
    p.add_argument("--bin-width", type=float, default=10.0)
    p.add_argument("--hist-csv", default=None, help="directory for histogram CSVs")
    p.add_argument("--force", action="store_true")
    add_workers(p)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("bank", help="build an instance bank")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="bank stem (writes stem.idx, stem.pts)")
    p.add_argument("--min-points", type=int, default=5)
    p.add_argument("--force", action="store_true")
    add_workers(p)
    p.set_defaults(fn=cmd_bank)

    p = sub.add_parser("epoch", help="plan balanced training epochs")
    p.add_argument("--config", required=True, help="pipeline config file")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument(
        "--scans-per-dataset",
        type=int,
        default=None,
        help="override the min-size rule",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_epoch)

    p = sub.add_parser("augment", help="materialize augmented scans for a plan")
    p.add_argument("--config", required=True, help="pipeline config file")
    p.add_argument("--plan", required=True, help="epoch plan file")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    add_workers(p)
    p.set_defaults(fn=cmd_augment)

    p = sub.add_parser("eval", help="evaluate detections against ground truth")
    p.add_argument("--detections", required=True)
    p.add_argument("--manifest", required=True, help="ground-truth manifest")
    p.add_argument("--eval-config", default=None)
    p.add_argument("--fraction", type=float, default=1.0, help="eval subsample fraction")
    p.add_argument("--seed", type=int, default=None, help="subsample seed")
    p.add_argument("--out", required=True, help="report path (key=value twin at +.kv)")
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
