"""Adam optimizer and the epoch loop."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .container import atomic_write
from .metrics import MetricsReport, confusion, report
from .model import LstmAttentionModel
from .tensor_core import ShapeError, bce_loss

log = logging.getLogger(__name__)

HISTORY_HEADER = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc", "seconds")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 75
    batch_size: int = 512
    learning_rate: float = 3e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    shuffle_seed: int = 0
    # rows per forward/backward pass inside a batch; bounds attention memory
    chunk_size: int = 128

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.chunk_size < 1:
            raise ValueError(f"chunk_size must be >= 1, got {self.chunk_size}")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(state: AdamState, params: dict, grads: dict, lr=1e-3,
              beta1=0.9, beta2=0.999, eps=1e-7) -> None:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise ShapeError(f"gradient {name} has shape {g.shape}, parameter {params[name].shape}")
    state.t += 1
    bc1 = 1 - beta1 ** state.t
    bc2 = 1 - beta2 ** state.t
    for name, theta in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(theta)
            state.v[name] = np.zeros_like(theta)
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * (g * g)
        theta -= (lr * (m / bc1) / (np.sqrt(v / bc2) + eps)).astype(theta.dtype, copy=False)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    seconds: float


def _flat_grads(grads):
    return {f"{name}.{key}": arr for name, p in grads.items() for key, arr in p.named_arrays().items()}


def predict_proba(model: LstmAttentionModel, features, batch_size=512) -> np.ndarray:
    features = np.asarray(features)
    out = [model.forward(features[i:i + batch_size]) for i in range(0, len(features), batch_size)]
    return np.concatenate(out) if out else np.empty(0, dtype=model.dtype)


def _loss_acc(model, split, batch_size, threshold=0.5):
    p = predict_proba(model, split.features, batch_size)
    loss, _ = bce_loss(p, split.labels.astype(p.dtype))
    return float(loss), float(np.mean((p >= threshold) == (split.labels == 1)))


def train(model: LstmAttentionModel, train_split, val_split, config: TrainConfig = TrainConfig(),
          history_path=None, on_epoch=None):
    """Train ``model`` in place; returns ``(model, history)``.

    Each epoch shuffles with a generator keyed by ``(shuffle_seed, epoch)``,
    takes one Adam step per mini-batch (the final short batch included), then
    scores the validation split with parameters frozen. Train loss/accuracy
    are batch-size-weighted averages over the epoch's batches.
    """
    for name, split in (("train", train_split), ("validation", val_split)):
        if len(split) == 0:
            raise ValueError(f"{name} split is empty")
        if split.features.shape[1] != model.config.seq_len:
            raise ShapeError(f"{name} split has {split.features.shape[1]} features, "
                             f"model expects {model.config.seq_len}")
    X = np.asarray(train_split.features, dtype=model.dtype)
    y = np.asarray(train_split.labels, dtype=model.dtype)
    n = len(X)
    params = model.parameters()
    state = AdamState()
    history = []
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.shuffle_seed, epoch])))
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for b in range(0, n, config.batch_size):
            idx = order[b:b + config.batch_size]
            xb, yb = X[idx], y[idx]
            loss, grads, p = model.loss_and_grads(xb, yb, chunk_size=config.chunk_size,
                                                  return_probs=True)
            loss_sum += float(loss) * len(idx)
            correct += int(np.sum((p >= 0.5) == (yb == 1)))
            adam_step(state, params, _flat_grads(grads), config.learning_rate,
                      config.beta1, config.beta2, config.epsilon)
        train_loss, train_acc = loss_sum / n, correct / n
        val_loss, val_acc = _loss_acc(model, val_split, config.batch_size)
        record = EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc,
                             time.perf_counter() - start)
        history.append(record)
        log.info("epoch %d/%d loss=%.5f acc=%.4f val_loss=%.5f val_acc=%.4f (%.1fs)",
                 epoch, config.epochs, train_loss, train_acc, val_loss, val_acc, record.seconds)
        if on_epoch is not None:
            on_epoch(record)
    if history_path is not None:
        write_history(history, history_path)
    return model, history


def write_history(history, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_HEADER)
    for r in history:
        w.writerow([r.epoch, repr(r.train_loss), repr(r.train_acc), repr(r.val_loss),
                    repr(r.val_acc), f"{r.seconds:.3f}"])
    atomic_write(path, buf.getvalue().encode())


def read_history(path) -> list[EpochRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [EpochRecord(int(r["epoch"]), float(r["train_loss"]), float(r["train_acc"]),
                        float(r["val_loss"]), float(r["val_acc"]), float(r["seconds"])) for r in rows]


def evaluate(model: LstmAttentionModel, split, threshold=0.5, batch_size=512) -> MetricsReport:
    if len(split) == 0:
        raise ValueError("cannot evaluate an empty split")
    p = predict_proba(model, split.features, batch_size)
    return report(confusion(p, split.labels, threshold))
