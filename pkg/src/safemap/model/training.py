"""Cross-entropy training loop for the attention classifier.

Plain SGD over seeded-shuffled batches with step-decayed learning rate.
Identical seeds give bit-identical parameters, metrics, and checkpoints.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..autodiff import (
    Tape,
    Tensor,
    backward,
    sgd_step,
    softmax_cross_entropy,
    step_decay_lr,
)
from ..geo.manifest import DatasetManifest, ManifestEntry, warn_if_unbalanced
from ..geo.ppm import read_ppm
from .config import DamConfig
from .network import DamParams, forward, init_params, predict


class TrainError(Exception):
    """Unusable training inputs."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 4
    lr0: float = 1e-4
    lr_decay: float = 0.5
    lr_decay_every: int = 10
    seed: int = 0
    # stop once validation accuracy reaches this level (None = run all epochs)
    early_stop_val_acc: Optional[float] = None
    eval_batch_size: int = 64

    def __post_init__(self):
        if self.epochs < 1:
            raise TrainError(f"epochs must be at least 1, got {self.epochs}")
        if self.batch_size < 1:
            raise TrainError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.lr0 <= 0:
            raise TrainError(f"lr0 must be positive, got {self.lr0}")

    def lr_at(self, epoch: int) -> float:
        return step_decay_lr(self.lr0, epoch, self.lr_decay, self.lr_decay_every)


@dataclass
class MetricsRow:
    epoch: int
    split: str
    loss: float
    accuracy: float


@dataclass
class Dataset:
    """In-memory image set; pixels stay uint8 until batches are cut."""

    images: np.ndarray  # [N, C, H, W] uint8
    labels: np.ndarray  # [N] int64
    entries: list[ManifestEntry]

    def __len__(self) -> int:
        return self.labels.size


def load_split(manifest: DatasetManifest, image_root, split: Optional[str] = None,
               domain: Optional[str] = None) -> Dataset:
    """Load the manifest subset's referenced images into memory."""
    entries = manifest.subset(split=split, domain=domain)
    if not entries:
        raise TrainError(f"manifest has no entries for split={split!r} domain={domain!r}")
    root = Path(image_root)
    imgs = []
    labels = []
    for e in entries:
        rgb = read_ppm(root / e.image)  # [H, W, 3]
        imgs.append(rgb.transpose(2, 0, 1))
        labels.append(e.label)
    return Dataset(images=np.stack(imgs), labels=np.asarray(labels, dtype=np.int64),
                   entries=entries)


def batch_tensor(images_u8: np.ndarray) -> Tensor:
    """uint8 [B,C,H,W] to a centered float tensor in [-1, 1]."""
    return Tensor(images_u8.astype(np.float64) / 127.5 - 1.0)


def evaluate(dataset: Dataset, params: DamParams, config: DamConfig,
             batch_size: int = 64) -> tuple[float, float, np.ndarray]:
    """Mean loss, accuracy, and hard predictions over a dataset."""
    losses = []
    preds = np.empty(len(dataset), dtype=np.int64)
    for start in range(0, len(dataset), batch_size):
        sl = slice(start, min(start + batch_size, len(dataset)))
        x = batch_tensor(dataset.images[sl])
        trace = forward(x, params, config)
        loss = softmax_cross_entropy(trace.logits, dataset.labels[sl])
        losses.append(loss.item() * (sl.stop - sl.start))
        preds[sl] = trace.logits.data.argmax(axis=1)
    accuracy = float((preds == dataset.labels).mean())
    return sum(losses) / len(dataset), accuracy, preds


@dataclass
class TrainResult:
    params: DamParams
    metrics: list[MetricsRow]
    final_val_accuracy: float
    epochs_run: int
    stopped_early: bool = False


def train_dam(train_set: Dataset, val_set: Optional[Dataset], config: DamConfig,
              train_cfg: TrainConfig = TrainConfig(),
              params: Optional[DamParams] = None,
              log: Optional[Callable[[str], None]] = None) -> TrainResult:
    """Minimize classification cross-entropy; returns params plus per-epoch metrics."""
    if len(train_set) == 0:
        raise TrainError("empty training set")
    warn_if_unbalanced(train_set.entries, "training set")
    if params is None:
        params = init_params(config, seed=train_cfg.seed)
    frozen = params.expected_gradless(config)
    all_params = params.all()
    shuffle_rng = np.random.default_rng([train_cfg.seed, 1])
    metrics: list[MetricsRow] = []
    final_val_acc = 0.0
    epochs_run = 0
    stopped = False
    for epoch in range(train_cfg.epochs):
        lr = train_cfg.lr_at(epoch)
        order = shuffle_rng.permutation(len(train_set))
        epoch_loss = 0.0
        epoch_correct = 0
        for start in range(0, len(order), train_cfg.batch_size):
            idx = order[start:start + train_cfg.batch_size]
            x = batch_tensor(train_set.images[idx])
            y = train_set.labels[idx]
            with Tape():
                trace = forward(x, params, config)
                loss = softmax_cross_entropy(trace.logits, y)
                backward(loss)
            # selection starves exactly the local fc head; anything else
            # missing a gradient is a wiring bug sgd_step will flag
            sgd_step(all_params, lr, allow_gradless=frozen)
            epoch_loss += loss.item() * idx.size
            epoch_correct += int((trace.logits.data.argmax(axis=1) == y).sum())
        epochs_run = epoch + 1
        train_loss = epoch_loss / len(train_set)
        train_acc = epoch_correct / len(train_set)
        metrics.append(MetricsRow(epoch, "train", train_loss, train_acc))
        if val_set is not None and len(val_set):
            val_loss, val_acc, _ = evaluate(val_set, params, config,
                                            train_cfg.eval_batch_size)
            metrics.append(MetricsRow(epoch, "val", val_loss, val_acc))
            final_val_acc = val_acc
        if log:
            log(f"epoch {epoch}: lr {lr:.2e} train loss {train_loss:.4f} "
                f"acc {train_acc:.3f}" + (f" val acc {final_val_acc:.3f}"
                                          if val_set is not None else ""))
        if (train_cfg.early_stop_val_acc is not None and val_set is not None
                and final_val_acc >= train_cfg.early_stop_val_acc):
            stopped = True
            break
    return TrainResult(params=params, metrics=metrics,
                       final_val_accuracy=final_val_acc,
                       epochs_run=epochs_run, stopped_early=stopped)


def save_metrics_csv(path, metrics: list[MetricsRow]) -> None:
    """CSV with header epoch,split,loss,accuracy; repr-exact floats."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["epoch", "split", "loss", "accuracy"])
        for row in metrics:
            writer.writerow([row.epoch, row.split, repr(row.loss), repr(row.accuracy)])


def load_metrics_csv(path) -> list[MetricsRow]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        for r in reader:
            rows.append(MetricsRow(int(r["epoch"]), r["split"],
                                   float(r["loss"]), float(r["accuracy"])))
    return rows
