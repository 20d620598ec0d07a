#!/usr/bin/env python3
# Preprocess the bundled two-day fixture, train a narrow model on it,
# evaluate, and save a checkpoint. Runs in a few seconds.
# Some seeds start on a flat plateau (loss stuck at ln 2) at these tiny widths.

import tempfile
from pathlib import Path

import numpy as np

from flowids import ModelConfig, TrainConfig, build, evaluate, preprocess, train
from flowids.checkpoint import load_checkpoint, save_checkpoint
from flowids.dataset import clean, ingest_csv
from flowids.fixture import mini_fixture_paths

paths = mini_fixture_paths()
raw = ingest_csv(paths)
print(len(raw), "raw rows from", [p.name for p in paths])

cleaned, dropped = clean(raw)
print("dropped", dropped, "rows with empty / NaN / Infinity fields;", cleaned.features.shape[1], "features left")

# balance each file 1:1 by discarding benign rows, split 70/10/20, min-max scale from train
ds = preprocess(paths)
for name, t in ds.splits().items():
    print(f"{name:>10}: {len(t):3d} rows, {int(t.labels.sum()):3d} malicious")
print("train range", ds.train.features.min(), ds.train.features.max())

# same architecture, much narrower so numpy can train it quickly
cfg = ModelConfig(lstm1_units=8, lstm2_units=8, attn_units=4, lstm3_units=8,
                  dense1_units=16, dense2_units=8, seed=0)
model = build(cfg, precision=64)
print(model.count_params()["total"], "parameters")

model, history = train(model, ds.train, ds.validation,
                       TrainConfig(epochs=30, batch_size=16, learning_rate=3e-3))
for rec in history[::5] + [history[-1]]:
    print(f"epoch {rec.epoch:2d}  loss {rec.train_loss:.4f}  acc {rec.train_acc:.3f}  "
          f"val_acc {rec.val_acc:.3f}")

rep = evaluate(model, ds.test)
print(rep.to_text())

out = Path(tempfile.mkdtemp()) / "model.ckpt"
digest = save_checkpoint(model, out, ds.scaler)
again, scaler = load_checkpoint(out)
same = all(np.array_equal(a, b) for a, b in zip(model.parameters().values(), again.parameters().values()))
print(f"checkpoint {out} checksum {digest:016x}, reload identical: {same}")
