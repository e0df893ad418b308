"""Training loop, evaluation, resume.

Protocol per epoch: one pass over the Train split (shuffled by an
epoch-derived seed, dropout active), then a full infer-mode pass over
Val, then a weights checkpoint plus an optimizer-state sidecar, then a
metrics line.  Everything stochastic is keyed by (cfg.seed, epoch,
batch), so a run is exactly reproducible and a resumed run with the
optimizer sidecar continues the identical trajectory.

Train-split metrics are the running (sample-weighted) average over the
epoch's training batches, i.e. measured with dropout active while the
weights move, which is how the usual framework progress bars report it.
Val metrics are a clean infer-mode pass after the epoch's updates.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Manifest, Split, stream_batches
from .nn import (AdamState, BETA1, BETA2, EPS_HAT, LEARNING_RATE, Table1Model,
                 adam_step, init_adam, load_checkpoint, load_optimizer,
                 save_checkpoint, save_optimizer)
from .nn.model import BCE_EPSILON

METRICS_HEADER = "epoch,train_loss,train_acc,val_loss,val_acc,seconds"


class TrainerError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    checkpoint_dir: Path
    metrics_path: Path
    batch_size: int = 32
    seed: int = 0
    lr: float = LEARNING_RATE
    beta1: float = BETA1
    beta2: float = BETA2
    eps_hat: float = EPS_HAT

    def __post_init__(self):
        if self.epochs < 1:
            raise TrainerError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise TrainerError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    seconds: float

    def to_line(self) -> str:
        return (f"{self.epoch},{self.train_loss:.8f},{self.train_acc:.8f},"
                f"{self.val_loss:.8f},{self.val_acc:.8f},{self.seconds:.3f}")


@dataclass(frozen=True)
class PredictionRecord:
    path: str
    label: int
    probability: float
    predicted: int


def load_metrics(path) -> list[EpochRecord]:
    records = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != METRICS_HEADER:
        raise TrainerError(f"{path}: missing metrics header")
    for line in lines[1:]:
        if not line.strip():
            continue
        e, tl, ta, vl, va, sec = line.split(",")
        records.append(EpochRecord(int(e), float(tl), float(ta),
                                   float(vl), float(va), float(sec)))
    return records


def evaluate(model: Table1Model, manifest: Manifest, split: Split,
             batch_size: int = 32
             ) -> tuple[float, float, list[PredictionRecord]]:
    """Infer-mode pass over a split: (mean loss, accuracy, per-sample records)."""
    if not manifest.of_split(split):
        raise TrainerError(f"empty split {split.value}")
    loss_sum = 0.0
    correct = 0
    n = 0
    records: list[PredictionRecord] = []
    for x, y, batch in stream_batches(manifest, split, batch_size,
                                      epoch_seed=None, include_samples=True):
        p = model.predict(x).astype(np.float64)
        y64 = y.astype(np.float64)
        terms = (y64 * np.log(1.0 / (p + BCE_EPSILON))
                 + (1.0 - y64) * np.log(1.0 / (1.0 - p + BCE_EPSILON)))
        loss_sum += float(terms.sum())
        predicted = (p >= 0.5).astype(int)
        correct += int(np.sum(predicted == y64.astype(int)))
        n += len(y)
        for sample, prob, pred in zip(batch, p, predicted):
            records.append(PredictionRecord(path=sample.path,
                                            label=sample.label,
                                            probability=float(prob),
                                            predicted=int(pred)))
    return loss_sum / n, correct / n, records


def save_predictions(records: list[PredictionRecord], path) -> None:
    lines = ["path,label,probability,predicted"]
    lines += [f"{r.path},{r.label},{r.probability:.8f},{r.predicted}"
              for r in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def train(model: Table1Model, manifest: Manifest, cfg: TrainConfig,
          start_epoch: int = 0, adam_state: AdamState | None = None,
          log=None) -> tuple[Table1Model, list[EpochRecord]]:
    """Run epochs start_epoch+1 .. cfg.epochs.  With start_epoch > 0 the
    metrics file is appended to (resume); otherwise it is created fresh."""
    if not manifest.of_split(Split.TRAIN) or not manifest.of_split(Split.VAL):
        raise TrainerError("manifest needs non-empty Train and Val splits")
    if start_epoch >= cfg.epochs:
        raise TrainerError(f"start_epoch {start_epoch} >= epochs {cfg.epochs}")
    ckpt_dir = Path(cfg.checkpoint_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = Path(cfg.metrics_path)
    metrics_path.parent.mkdir(parents=True, exist_ok=True)
    if start_epoch == 0 or not metrics_path.exists():
        metrics_path.write_text(METRICS_HEADER + "\n", encoding="utf-8")

    params = model.params()
    state = adam_state if adam_state is not None else init_adam(
        params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2,
        eps_hat=cfg.eps_hat)

    records: list[EpochRecord] = []
    for epoch in range(start_epoch + 1, cfg.epochs + 1):
        t0 = time.perf_counter()
        loss_sum = 0.0
        acc_sum = 0.0
        n_seen = 0
        for b_idx, (x, y) in enumerate(stream_batches(
                manifest, Split.TRAIN, cfg.batch_size,
                epoch_seed=(cfg.seed, epoch))):
            loss, acc, grads = model.train_step_grads(
                x, y, dropout_key=(cfg.seed, epoch, b_idx))
            if not math.isfinite(loss):
                raise TrainerError(
                    f"non-finite loss {loss} at epoch {epoch} batch {b_idx}")
            adam_step(state, params, grads)
            loss_sum += loss * len(y)
            acc_sum += acc * len(y)
            n_seen += len(y)
        val_loss, val_acc, _ = evaluate(model, manifest, Split.VAL,
                                        batch_size=cfg.batch_size)
        seconds = time.perf_counter() - t0
        save_checkpoint(model, ckpt_dir / f"epoch_{epoch}.knck", epoch=epoch)
        save_optimizer(state, ckpt_dir / f"epoch_{epoch}.opt")
        rec = EpochRecord(epoch=epoch, train_loss=loss_sum / n_seen,
                          train_acc=acc_sum / n_seen, val_loss=val_loss,
                          val_acc=val_acc, seconds=seconds)
        records.append(rec)
        with open(metrics_path, "a", encoding="utf-8") as fh:
            fh.write(rec.to_line() + "\n")
        if log is not None:
            log(rec)
    return model, records


def resume(checkpoint_path, manifest: Manifest, cfg: TrainConfig,
           log=None) -> tuple[Table1Model, list[EpochRecord], bool]:
    """Continue training from a weights checkpoint.

    If the sibling `.opt` optimizer sidecar exists the continuation is
    exact (identical trajectory to an uninterrupted run); without it the
    moments restart from zero and the third return value is False.
    """
    checkpoint_path = Path(checkpoint_path)
    model, epoch = load_checkpoint(checkpoint_path)
    opt_path = checkpoint_path.with_suffix(".opt")
    exact = opt_path.exists()
    state = None
    if exact:
        state = load_optimizer(opt_path, model.params(), lr=cfg.lr)
        state.beta1, state.beta2, state.eps_hat = cfg.beta1, cfg.beta2, cfg.eps_hat
    model, recs = train(model, manifest, cfg, start_epoch=epoch,
                        adam_state=state, log=log)
    return model, recs, exact
