"""Command-line workflows binding the pipeline, training, adaptation, and reporting.

Every subcommand takes ``--config run.json`` (see runconfig) plus an
optional ``--seed`` override and maps onto one module operation:

    ingest        accident CSV -> records.jsonl
    grid          accident CSV -> grid.json + scores.csv
    label         scores.csv -> labels.csv (2-means binning)
    balance       dataset manifest -> class-balanced manifest
    synth         synthetic labeled image set
    train         manifest + images -> checkpoint + metrics.csv
    pseudo-label  target manifest + checkpoint -> pseudo-labeled manifest
    train-da      source + pseudo-labeled target -> adapted checkpoint
    eval          checkpoint + manifest split -> eval.json
    cam           checkpoint + one image -> cam.pgm
    map-export    checkpoint + manifest + grid -> safety_map.csv/.ppm

Exit codes: 0 success, 1 usage error (bad flags or run config), 2 data
error (unreadable or inconsistent inputs). All outputs land under the
config's run directory next to ``config.resolved.json`` and
``run_manifest.json``, which declares every file produced there (sequential
subcommands sharing one directory merge their declarations); rerunning with
identical inputs and seed reproduces each artifact byte for byte. One run
per process; concurrent runs must use distinct run directories.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .adapt import AdaptError, pseudo_label, train_dam_da
from .autodiff import (
    CheckpointError,
    NonFiniteError,
    TensorError,
    load_checkpoint,
    restore_params,
    save_checkpoint,
)
from .geo.grid import GridError, GridSpec, build_grid, score_cells
from .geo.labeling import LabelingConfig, LabelingError, kmeans_bin
from .geo.manifest import (
    DANGEROUS,
    ManifestError,
    balance,
    load_manifest,
    save_manifest,
)
from .geo.ppm import PpmError, read_ppm
from .geo.records import IngestError, ingest_accidents
from .geo.synth import SynthError, synth_generate
from .model.config import ConfigError
from .model.network import forward, init_params
from .model.training import (
    TrainError,
    batch_tensor,
    evaluate,
    load_split,
    save_metrics_csv,
    train_dam,
)
from .report import (
    CamError,
    CellPrediction,
    ExportError,
    MetricsError,
    cam,
    metrics_from_confusion,
    confusion,
    safety_map_export,
)
from .runconfig import RunConfig, RunConfigError, dumps_resolved, load_run_config

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

DATA_ERRORS = (IngestError, GridError, LabelingError, ManifestError, SynthError,
               TrainError, AdaptError, ConfigError, CamError, ExportError,
               MetricsError, CheckpointError, TensorError, NonFiniteError,
               PpmError, FileNotFoundError, IsADirectoryError, PermissionError)


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; the contract is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class RunDir:
    """Run output directory plus the ledger of files written into it."""

    def __init__(self, root: Path):
        self.root = root
        self.files: list[str] = []
        root.mkdir(parents=True, exist_ok=True)

    def path(self, rel: str) -> Path:
        """Register an output file and return its absolute path."""
        if rel not in self.files:
            self.files.append(rel)
        out = self.root / rel
        out.parent.mkdir(parents=True, exist_ok=True)
        return out

    def write_json(self, rel: str, obj) -> None:
        self.path(rel).write_text(
            json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n",
            encoding="utf-8")

    def finish(self, subcommand: str) -> None:
        """Declare produced files, merging declarations of earlier runs.

        Sequential subcommands may share one run directory; each run's
        manifest keeps every file any of them produced so nothing on disk
        is undeclared.
        """
        path = self.root / "run_manifest.json"
        files = set(self.files)
        if path.exists():
            try:
                files |= set(json.loads(path.read_text(encoding="utf-8"))["files"])
            except (json.JSONDecodeError, KeyError, TypeError):
                pass  # unreadable prior manifest: rewrite from this run
        path.write_text(
            json.dumps({"subcommand": subcommand, "files": sorted(files)},
                       sort_keys=True, separators=(",", ":")) + "\n",
            encoding="utf-8")


def _require(value: Optional[str], key: str) -> str:
    if value is None:
        raise RunConfigError(f"this subcommand needs paths.{key} in the run config")
    return value


def _progress(line: str) -> None:
    print(line, file=sys.stderr)


# ---------------------------------------------------------------- pipeline


def _read_records(cfg: RunConfig):
    path = _require(cfg.paths.accidents_csv, "accidents_csv")
    with open(path, "r", encoding="utf-8", newline="") as f:
        return ingest_accidents(f)


def cmd_ingest(cfg: RunConfig, run: RunDir) -> None:
    result = _read_records(cfg)
    with open(run.path("records.jsonl"), "w", encoding="utf-8", newline="\n") as f:
        for r in result.records:
            obj = {"id": r.id, "date": r.date.isoformat(),
                   "time": r.time.strftime("%H:%M"), "day_of_week": r.day_of_week,
                   "latitude": r.latitude, "longitude": r.longitude,
                   "vehicles": r.vehicles, "casualties": r.casualties}
            f.write(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")
    run.write_json("ingest_report.json",
                   {"records": len(result.records), "skipped": result.skipped})


def cmd_grid(cfg: RunConfig, run: RunDir) -> None:
    result = _read_records(cfg)
    spec, cells = build_grid(result.records, cfg.pipeline.cell_size_m)
    scored = score_cells(spec, cells)
    run.write_json("grid.json", spec.to_dict())
    with open(run.path("scores.csv"), "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["col", "row", "score"])
        for row in range(spec.rows):
            for col in range(spec.columns):
                writer.writerow([col, row, scored.score(col, row)])
    run.write_json("grid_report.json",
                   {"columns": spec.columns, "rows": spec.rows,
                    "records": len(result.records), "total_score": scored.total})


def _read_scores(path) -> list[tuple[int, int, int]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"col", "row", "score"} <= set(reader.fieldnames):
            raise LabelingError(f"{path}: expected a col,row,score header")
        try:
            return [(int(r["col"]), int(r["row"]), int(r["score"])) for r in reader]
        except (TypeError, ValueError) as e:
            raise LabelingError(f"{path}: malformed score row: {e}") from e


def cmd_label(cfg: RunConfig, run: RunDir) -> None:
    rows = _read_scores(_require(cfg.paths.scores_csv, "scores_csv"))
    result = kmeans_bin([s for _, _, s in rows],
                        LabelingConfig(seed=cfg.pipeline.seed))
    with open(run.path("labels.csv"), "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["col", "row", "score", "label"])
        for (col, row, score), label in zip(rows, result.assignments):
            writer.writerow([col, row, score, int(label)])
    safe = int((result.assignments == 0).sum())
    run.write_json("label_report.json",
                   {"centroids": list(result.centroids),
                    "degenerate": result.degenerate,
                    "safe": safe, "dangerous": len(rows) - safe})


def cmd_balance(cfg: RunConfig, run: RunDir) -> None:
    manifest = load_manifest(_require(cfg.paths.manifest, "manifest"))
    balanced = balance(manifest, cfg.pipeline.seed)
    save_manifest(run.path("manifest.balanced.jsonl"), balanced)
    run.write_json("balance_report.json",
                   {"before": list(manifest.class_counts()),
                    "after": list(balanced.class_counts())})


def cmd_synth(cfg: RunConfig, run: RunDir) -> None:
    s = cfg.synth
    result = synth_generate(run.root / "synth", n_per_class=s.n_per_class,
                            image_hw=s.image_hw, jitter_px=s.jitter_px,
                            domain_style=s.domain_style, seed=s.seed,
                            split_fractions=cfg.pipeline.split_fractions)
    run.path("synth/manifest.jsonl")
    run.path("synth/synth_meta.jsonl")
    for e in result.manifest.entries:
        run.path(f"synth/{e.image}")
    counts = result.manifest.class_counts()
    run.write_json("synth_report.json",
                   {"images": len(result.manifest.entries),
                    "safe": counts[0], "dangerous": counts[1]})


# ---------------------------------------------------------------- training


def _load_params(cfg: RunConfig):
    """Initialize from the model section and restore checkpoint weights."""
    params = init_params(cfg.model, seed=0)
    loaded, meta = load_checkpoint(_require(cfg.paths.checkpoint, "checkpoint"))
    restore_params(params.all(), loaded)
    return params, meta


def _maybe_split(manifest, root, split):
    try:
        return load_split(manifest, root, split)
    except TrainError:
        return None


def _save_train_outputs(cfg: RunConfig, run: RunDir, result) -> None:
    save_checkpoint(run.path("checkpoint.ckpt"), result.params.all(),
                    {"model": cfg.model.to_dict()})
    save_metrics_csv(run.path("metrics.csv"), result.metrics)
    run.write_json("train_report.json",
                   {"epochs_run": result.epochs_run,
                    "final_val_accuracy": result.final_val_accuracy,
                    "stopped_early": result.stopped_early})


def cmd_train(cfg: RunConfig, run: RunDir) -> None:
    manifest = load_manifest(_require(cfg.paths.manifest, "manifest"))
    root = _require(cfg.paths.image_root, "image_root")
    train_set = load_split(manifest, root, "train")
    val_set = _maybe_split(manifest, root, "val")
    result = train_dam(train_set, val_set, cfg.model, cfg.train, log=_progress)
    _save_train_outputs(cfg, run, result)


def cmd_pseudo_label(cfg: RunConfig, run: RunDir) -> None:
    manifest = load_manifest(_require(cfg.paths.target_manifest, "target_manifest"))
    root = _require(cfg.paths.target_image_root, "target_image_root")
    params, _ = _load_params(cfg)
    labeled, report = pseudo_label(manifest, root, params, cfg.model,
                                   batch_size=cfg.eval.batch_size)
    save_manifest(run.path("manifest.pseudo.jsonl"), labeled)
    run.write_json("pseudo_report.json",
                   {"total": report.total, "agreement": report.agreement,
                    "class_counts": report.class_counts})


def cmd_train_da(cfg: RunConfig, run: RunDir) -> None:
    source = load_manifest(_require(cfg.paths.manifest, "manifest"))
    source_root = _require(cfg.paths.image_root, "image_root")
    target = load_manifest(_require(cfg.paths.target_manifest, "target_manifest"))
    target_root = _require(cfg.paths.target_image_root, "target_image_root")
    source_set = load_split(source, source_root, "train")
    target_set = load_split(target, target_root, "train")
    val_set = None
    if cfg.paths.val_manifest is not None:
        val_manifest = load_manifest(cfg.paths.val_manifest)
        val_set = load_split(val_manifest,
                             cfg.paths.val_image_root or target_root, "val")
    params = None
    if cfg.paths.checkpoint is not None:
        params, _ = _load_params(cfg)
    result = train_dam_da(source_set, target_set, val_set, cfg.model, cfg.da,
                          params=params, log=_progress)
    _save_train_outputs(cfg, run, result)


# ---------------------------------------------------------------- reporting


def cmd_eval(cfg: RunConfig, run: RunDir) -> None:
    manifest = load_manifest(_require(cfg.paths.manifest, "manifest"))
    root = _require(cfg.paths.image_root, "image_root")
    dataset = load_split(manifest, root, cfg.eval.split)
    params, _ = _load_params(cfg)
    loss, accuracy, preds = evaluate(dataset, params, cfg.model,
                                     cfg.eval.batch_size)
    c = confusion(preds, dataset.labels)
    report = metrics_from_confusion(c)
    run.write_json("eval.json", {
        "split": cfg.eval.split, "count": len(dataset),
        "loss": loss, "accuracy": accuracy,
        "fpr": report.fpr, "precision": report.precision,
        "recall": report.recall, "f1": report.f1,
        "confusion": {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn},
        "zero_division": sorted(report.zero_division),
    })


def cmd_cam(cfg: RunConfig, run: RunDir) -> None:
    image = read_ppm(_require(cfg.paths.image, "image"))
    params, _ = _load_params(cfg)
    result = cam(image, params, cfg.model, cfg.cam.class_index)
    result.to_pgm(run.path("cam.pgm"))
    run.write_json("cam_report.json",
                   {"class_index": result.class_index,
                    "constant": result.constant})


def cmd_map_export(cfg: RunConfig, run: RunDir) -> None:
    spec = GridSpec.from_dict(json.loads(
        Path(_require(cfg.paths.grid_json, "grid_json")).read_text(encoding="utf-8")))
    manifest = load_manifest(_require(cfg.paths.manifest, "manifest"))
    root = _require(cfg.paths.image_root, "image_root")
    dataset = load_split(manifest, root)
    params, _ = _load_params(cfg)
    predictions = {}
    for start in range(0, len(dataset), cfg.eval.batch_size):
        sl = slice(start, min(start + cfg.eval.batch_size, len(dataset)))
        trace = forward(batch_tensor(dataset.images[sl]), params, cfg.model)
        logits = trace.logits.data
        shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
        prob_dangerous = shifted[:, DANGEROUS] / shifted.sum(axis=1)
        for offset, entry in enumerate(dataset.entries[sl]):
            predictions[entry.cell] = CellPrediction(
                label=int(logits[offset].argmax()),
                prob_dangerous=float(prob_dangerous[offset]))
    safety_map_export(spec, predictions,
                      run.path("safety_map.csv"), run.path("safety_map.ppm"))
    counts = {"safe": sum(1 for p in predictions.values() if p.label != DANGEROUS),
              "dangerous": sum(1 for p in predictions.values() if p.label == DANGEROUS)}
    run.write_json("map_report.json", counts)


COMMANDS = {
    "ingest": cmd_ingest,
    "grid": cmd_grid,
    "label": cmd_label,
    "balance": cmd_balance,
    "synth": cmd_synth,
    "train": cmd_train,
    "pseudo-label": cmd_pseudo_label,
    "train-da": cmd_train_da,
    "eval": cmd_eval,
    "cam": cmd_cam,
    "map-export": cmd_map_export,
}


def build_parser() -> _Parser:
    parser = _Parser(prog="safemap",
                     description="Road-safety mapping pipeline and experiments.")
    sub = parser.add_subparsers(dest="subcommand", metavar="subcommand")
    sub.required = True
    for name, handler in COMMANDS.items():
        p = sub.add_parser(name, help=handler.__doc__)
        p.add_argument("--config", required=True,
                       help="run configuration JSON (see runconfig module)")
        p.add_argument("--seed", type=int, default=None,
                       help="override every section's seed")
        p.set_defaults(handler=handler)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_run_config(args.config)
        if args.seed is not None:
            config = config.with_seed(args.seed)
    except RunConfigError as e:
        print(f"safemap: config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        run = RunDir(Path(config.paths.run_dir))
    except OSError as e:
        print(f"safemap: cannot create run directory: {e}", file=sys.stderr)
        return EXIT_DATA
    run.path("config.resolved.json").write_text(dumps_resolved(config),
                                                encoding="utf-8")
    try:
        try:
            args.handler(config, run)
        finally:
            # declare whatever was produced, even on failure: no orphans
            run.finish(args.subcommand)
    except RunConfigError as e:
        print(f"safemap: config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as e:
        print(f"safemap: error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
