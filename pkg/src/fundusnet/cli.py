"""Command-line entry point.

Subcommands: preprocess, synth, train, eval, gradcheck, report. Exit codes:
0 success, 1 usage, 2 data, 3 numeric failure.
"""

import argparse
import asyncio
import json
import logging
import sys
import uuid
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import pandas as pd

from .config import RunConfig, data_root, load_config_file, resolve_run_config
from .core.ops import LOSS_ALIASES
from .dataset import (
    ManifestRecord,
    decode_image,
    load_manifest,
    save_png,
    stratified_indices,
    synth_dataset,
    validate_records,
    write_manifest,
)
from .errors import (
    EXIT_DATA,
    EXIT_OK,
    EXIT_USAGE,
    FundusNetError,
    GradCheckError,
    InconsistentImagesError,
    ManifestError,
    ReportError,
    UsageError,
)
from .logs import configure_logging
from .metrics import GRADE_LABELS, ModelResult, load_published, render_report
from .model import (
    ARCHITECTURES,
    Checkpoint,
    CheckpointMetadata,
    NetworkSpec,
    edlm_compact_spec,
    edlm_default_spec,
    gradcheck_suite,
    load_checkpoint,
    save_checkpoint,
    summarize,
)
from .model.spec import ARCH_ALIASES
from .preprocess import enhance_batch
from .storage import EpochRecord, MetricRecord, RunRecord, open_store, save_run
from .training import Samples, evaluate, grid_search, train
from .training.trainer import EpochStats

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "model.fnck"
MANIFEST_NAME = "manifest.csv"
METRICS_NAME = "metrics.json"


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _tile_grid(text: str) -> tuple[int, int]:
    try:
        rows, cols = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROWSxCOLS, got {text!r}") from None
    return rows, cols


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="fundusnet", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, help="TOML file with [run]/[enhance]/[train]/[synth]")
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = sub.add_parser("preprocess", help="enhance every image of a manifest")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--clip-fraction", type=float)
    p.add_argument("--tile-grid", type=_tile_grid)
    p.add_argument("--median-window", type=int)
    p.add_argument("--sigma", type=float, dest="gaussian_sigma")
    p.add_argument("--channel-mode", choices=["per-channel", "luminance"])
    p.add_argument("--size", type=int, help="square output size after enhancement")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("synth", help="write a synthetic lesion dataset")
    p.add_argument("--out", type=Path)
    p.add_argument("--per-class", type=int, dest="n_per_class")
    p.add_argument("--size", type=int, dest="image_size")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="train a network on a manifest")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--arch", choices=[*ARCHITECTURES, *ARCH_ALIASES])
    p.add_argument("--classes", type=int)
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--sampling", choices=["uniform", "informative"], dest="sampling_mode")
    p.add_argument("--loss", choices=["binary_sum", "categorical", *LOSS_ALIASES], dest="loss_form")
    p.add_argument("--balanced-batches", action="store_true", default=None)
    p.add_argument("--precision", choices=["single", "double"])
    p.add_argument("--seed", type=int)
    p.add_argument("--split", type=float, help="held-out test fraction")
    p.add_argument("--grid-lr", type=float, nargs="+", help="learning rates to grid-search first")
    p.add_argument("--runs-db", type=Path)

    p = sub.add_parser("eval", help="score a checkpoint on a manifest")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--name", default="EDLM", help="model name used in reports")
    p.add_argument("--runs-db", type=Path)

    p = sub.add_parser("gradcheck", help="analytic vs numeric gradients on random networks")
    p.add_argument("--seed", type=int)
    p.add_argument("--networks", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=1e-4)

    p = sub.add_parser("report", help="comparison table from metrics files")
    p.add_argument("metrics", nargs="*", type=Path)
    p.add_argument("--published", action="store_true", help="include the bundled published table")
    p.add_argument("--reference", help="model the improvements are computed for")
    p.add_argument("--out", type=Path)
    return parser


def _flags(args: argparse.Namespace, *names: str) -> dict:
    return {n: getattr(args, n, None) for n in names}


def resolve(args: argparse.Namespace) -> RunConfig:
    sections = load_config_file(args.config) if args.config else {}
    seed = getattr(args, "seed", None)
    run = _flags(args, "manifest", "out", "arch", "classes", "split", "workers", "runs_db")
    run["seed"] = seed
    if args.command == "preprocess":
        run["size"] = getattr(args, "size", None)
    enhance = _flags(args, "clip_fraction", "tile_grid", "median_window", "gaussian_sigma", "channel_mode")
    train_flags = _flags(
        args,
        "learning_rate",
        "weight_decay",
        "batch_size",
        "epochs",
        "sampling_mode",
        "loss_form",
        "balanced_batches",
        "precision",
    )
    train_flags["seed"] = seed
    synth = _flags(args, "n_per_class", "image_size")
    synth["seed"] = seed
    return resolve_run_config(args.command, sections, run, enhance, train_flags, synth)


def _require(cfg: RunConfig, *names: str):
    for name in names:
        if getattr(cfg, name) is None:
            raise UsageError(f"{cfg.command}: --{name.replace('_', '-')} is required")


def _manifest_path(path: Path) -> Path:
    if path.exists() or path.is_absolute():
        return path
    root = data_root()
    if root is not None and (root / path).exists():
        return root / path
    return path


def _image_path(record: ManifestRecord, manifest: Path) -> Path:
    local = record.resolve(manifest.parent)
    if local.exists():
        return local
    root = data_root()
    if root is not None and record.resolve(root).exists():
        return record.resolve(root)
    return local


def _load_images(records, manifest: Path):
    return [decode_image(_image_path(r, manifest)) for r in records]


def class_labels(n: int) -> list[str]:
    return [GRADE_LABELS[k] if k < len(GRADE_LABELS) else f"class {k}" for k in range(n)]


def _check_grades(records, classes: int, manifest: Path):
    for r in records:
        if int(r.grade) >= classes:
            raise ManifestError(f"grade {int(r.grade)} needs at least {int(r.grade) + 1} classes", manifest, r.line)


def _build_spec(cfg: RunConfig, input_shape: tuple[int, int, int]) -> NetworkSpec:
    if cfg.arch == "vgg":
        return edlm_default_spec(input_shape, cfg.classes)
    return edlm_compact_spec(input_shape, cfg.classes)


def _samples(images, records, manifest: Path, precision: str) -> Samples:
    shape = images[0].shape
    for img, r in zip(images, records):
        if img.shape != shape:
            raise InconsistentImagesError(
                f"{_image_path(r, manifest)}: image is {img.shape}, expected {shape}; "
                "run preprocess --size first"
            )
    return Samples.from_images(images, [int(r.grade) for r in records], precision)


def _evaluation_document(name: str, cm) -> dict:
    result = ModelResult.from_confusion(name, cm)
    return {
        "model": name,
        "classes": class_labels(cm.classes),
        "confusion": cm.to_list(),
        "accuracy": cm.accuracy(),
        "per_class": result.per_class,
        "macro": result.macro(),
    }


def _metric_records(run_id: str, doc: dict) -> list[MetricRecord]:
    records = [MetricRecord(run_id=run_id, model=doc["model"], metric="accuracy", value=doc["accuracy"])]
    for metric, values in doc["per_class"].items():
        for grade, value in enumerate(values):
            records.append(MetricRecord(run_id=run_id, model=doc["model"], metric=metric, grade=grade, value=value))
        records.append(MetricRecord(run_id=run_id, model=doc["model"], metric=metric, value=doc["macro"][metric]))
    return records


def _store(cfg: RunConfig):
    return open_store(cfg.runs_db if cfg.runs_db is not None else cfg.out)


def cmd_preprocess(cfg: RunConfig) -> int:
    _require(cfg, "manifest", "out")
    manifest = _manifest_path(cfg.manifest)
    records = load_manifest(manifest)
    images = _load_images(records, manifest)
    size = None if cfg.size is None else (cfg.size, cfg.size)
    enhanced = enhance_batch(images, cfg.enhance, size, workers=cfg.workers)

    out_images = cfg.out / "images"
    out_images.mkdir(parents=True, exist_ok=True)
    updated = []
    for i, (record, img) in enumerate(zip(records, enhanced)):
        name = f"{i:06d}_{Path(record.image_path).stem}.png"
        save_png(out_images / name, img)
        updated.append(
            ManifestRecord(f"images/{name}", record.grade, record.ma_count, record.neovascularisation)
        )
    write_manifest(cfg.out / MANIFEST_NAME, updated)
    logger.info("enhanced %d images into %s", len(updated), cfg.out)
    return EXIT_OK


def cmd_synth(cfg: RunConfig) -> int:
    _require(cfg, "out")
    data = synth_dataset(cfg=cfg.synth)
    out_images = cfg.out / "images"
    out_images.mkdir(parents=True, exist_ok=True)
    records = []
    for i, img in enumerate(data.images):
        grade = int(data.grades[i])
        name = f"grade{grade}_{i:05d}.png"
        save_png(out_images / name, img)
        records.append(
            ManifestRecord(
                f"images/{name}", grade, int(data.ma_counts[i]), bool(data.neovascularisation[i])
            )
        )
    write_manifest(cfg.out / MANIFEST_NAME, records)
    logger.info("wrote %d synthetic images to %s", len(records), cfg.out)
    return EXIT_OK


def cmd_train(cfg: RunConfig, grid_lr: Sequence[float] | None = None) -> int:
    _require(cfg, "manifest", "out")
    manifest = _manifest_path(cfg.manifest)
    records = load_manifest(manifest)
    if not records:
        raise ManifestError("manifest has no records", manifest)
    validate_records(records)
    _check_grades(records, cfg.classes, manifest)
    images = _load_images(records, manifest)
    samples = _samples(images, records, manifest, cfg.train.precision)
    spec = _build_spec(cfg, tuple(images[0].shape))
    logger.info("network:\n%s", pd.DataFrame(summarize(spec)).to_string(index=False))
    cfg.out.mkdir(parents=True, exist_ok=True)

    train_set, test_set = samples, None
    if cfg.split is not None:
        train_idx, test_idx = stratified_indices(samples.labels, cfg.split, cfg.seed)
        train_set, test_set = samples.subset(train_idx), samples.subset(test_idx)
        write_manifest(cfg.out / "train_manifest.csv", [records[i] for i in train_idx])
        write_manifest(cfg.out / "test_manifest.csv", [records[i] for i in test_idx])

    train_cfg = cfg.train
    if grid_lr:
        candidates = [train_cfg.with_overrides(learning_rate=lr) for lr in grid_lr]
        train_cfg, rows = grid_search(candidates, train_set, 0.2, spec, seed=cfg.seed)
        for row in rows:
            print(json.dumps(row.to_dict(), sort_keys=True))

    run_id = uuid.uuid4().hex
    epochs: list[EpochRecord] = []

    def record_epoch(stats: EpochStats):
        epochs.append(EpochRecord(run_id=run_id, **asdict(stats)))

    params, history = train(train_set, spec, train_cfg, on_epoch=record_epoch)
    final_loss = history.losses[-1] if len(history) else None
    checkpoint = save_checkpoint(
        cfg.out / CHECKPOINT_NAME,
        Checkpoint(
            spec,
            params,
            CheckpointMetadata(
                epochs_completed=len(history),
                seed=train_cfg.seed,
                final_loss=final_loss,
                extra={"arch": cfg.arch, "train": train_cfg.to_dict()},
            ),
        ),
    )

    metrics: list[MetricRecord] = []
    if test_set is not None and len(test_set):
        doc = _evaluation_document("held-out", evaluate(spec, params, test_set))
        logger.info("held-out accuracy %.4f on %d images", doc["accuracy"], len(test_set))
        metrics = _metric_records(run_id, doc)
    run = RunRecord(
        run_id=run_id,
        command="train",
        seed=train_cfg.seed,
        checkpoint=str(checkpoint),
        config=cfg.to_dict() | {"train": train_cfg.to_dict()},
    )
    asyncio.run(save_run(_store(cfg), run, epochs, metrics))
    return EXIT_OK


def cmd_eval(cfg: RunConfig, checkpoint_path: Path, name: str) -> int:
    _require(cfg, "manifest", "out")
    ckpt = load_checkpoint(checkpoint_path)
    manifest = _manifest_path(cfg.manifest)
    records = load_manifest(manifest)
    if not records:
        raise ManifestError("manifest has no records", manifest)
    _check_grades(records, ckpt.spec.num_classes, manifest)
    images = _load_images(records, manifest)
    precision = "double" if ckpt.params.dtype.name == "float64" else "single"
    samples = _samples(images, records, manifest, precision)
    if samples.inputs.shape[1:] != ckpt.spec.input_shape:
        raise InconsistentImagesError(
            f"images are {samples.inputs.shape[1:]}, checkpoint expects {ckpt.spec.input_shape}"
        )
    cm = evaluate(ckpt.spec, ckpt.params, samples)
    doc = _evaluation_document(name, cm)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / METRICS_NAME).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    report = render_report([ModelResult(name, doc["per_class"])], classes=doc["classes"])
    sys.stdout.write(report.text)
    print(f"accuracy {doc['accuracy']:.4f}" if doc["accuracy"] is not None else "accuracy n/a")

    run_id = uuid.uuid4().hex
    run = RunRecord(run_id=run_id, command="eval", checkpoint=str(checkpoint_path), config=cfg.to_dict())
    asyncio.run(save_run(_store(cfg), run, metrics=_metric_records(run_id, doc)))
    return EXIT_OK


def cmd_gradcheck(cfg: RunConfig, networks: int, tolerance: float) -> int:
    report = gradcheck_suite(networks, seed=cfg.seed, tolerance=tolerance)
    print(f"max relative error {report.max_error:.3e} over {networks} networks ({report.kinks} kink coordinates skipped)")
    if not report.passed:
        raise GradCheckError(f"max relative error {report.max_error:.3e} exceeds {tolerance:.1e}")
    return EXIT_OK


def _read_evaluation(path: Path) -> tuple[ModelResult, list[str] | None]:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        return ModelResult(doc["model"], doc["per_class"]), doc.get("classes")
    except FileNotFoundError:
        raise ReportError(f"{path}: metrics file not found") from None
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ReportError(f"{path}: not a metrics file: {e}") from e


def cmd_report(cfg: RunConfig, paths: Sequence[Path], published: bool, reference: str | None) -> int:
    if not paths and not published:
        raise UsageError("report: give metrics files or --published")
    results, claimed, classes = [], None, GRADE_LABELS
    if published:
        table = load_published()
        results.extend(table.results)
        claimed, classes = table.claimed, table.classes
    for path in paths:
        result, file_classes = _read_evaluation(path)
        results.append(result)
        if file_classes and not published:
            classes = file_classes
    try:
        report = render_report(results, reference, classes, claimed)
    except ValueError as e:
        raise UsageError(f"report: {e}") from e
    sys.stdout.write(report.text)
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
        (cfg.out / "report.json").write_text(report.to_json(), encoding="utf-8")
        (cfg.out / "report.txt").write_text(report.text, encoding="utf-8")
    return EXIT_OK


def dispatch(args: argparse.Namespace, cfg: RunConfig) -> int:
    match args.command:
        case "preprocess":
            return cmd_preprocess(cfg)
        case "synth":
            return cmd_synth(cfg)
        case "train":
            return cmd_train(cfg, args.grid_lr)
        case "eval":
            return cmd_eval(cfg, args.checkpoint, args.name)
        case "gradcheck":
            return cmd_gradcheck(cfg, args.networks, args.tolerance)
        case "report":
            return cmd_report(cfg, args.metrics, args.published, args.reference)
    raise UsageError(f"unknown command {args.command!r}")


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"fundusnet: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    configure_logging(args.log_level)
    try:
        cfg = resolve(args)
        print(cfg.to_json())
        logger.info("resolved config %s", cfg.to_json())
        return dispatch(args, cfg)
    except FundusNetError as e:
        logger.error("%s", e)
        print(f"fundusnet: error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        logger.error("%s", e)
        print(f"fundusnet: error: {e}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(run())
