"""The stacked LSTM / self-attention / MLP flow classifier.

Input rows of 78 scaled flow features are read as 78 timesteps of one
feature each::

    [B, 78, 1] -> LSTM(256, seq) -> LSTM(256, seq) -> Attention(32)
               -> LSTM(128, last) -> Dense(512, relu) -> Dense(256, relu)
               -> Dense(1, sigmoid)
"""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from . import layers
from .tensor_core import ShapeError, bce_loss, make_rng, resolve_dtype

LAYER_NAMES = ("lstm", "lstm_1", "attention", "lstm_2", "dense", "dense_1", "dense_2")
PUBLISHED_COUNTS = (264192, 525312, 16449, 197120, 66048, 131328, 257)


@dataclass(frozen=True)
class ModelConfig:
    seq_len: int = 78
    input_dim: int = 1
    lstm1_units: int = 256
    lstm2_units: int = 256
    attn_units: int = 32
    lstm3_units: int = 128
    dense1_units: int = 512
    dense2_units: int = 256
    output_units: int = 1
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ValueError(f"{f.name} must be an integer, got {value!r}")
            if f.name != "seed" and value < 1:
                raise ValueError(f"{f.name} must be >= 1, got {value}")
        if self.input_dim != 1:
            raise ValueError("input_dim must be 1: each flow feature is one timestep")
        if self.output_units != 1:
            raise ValueError("output_units must be 1 for the binary head")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def dims(self) -> tuple[int, ...]:
        return astuple(self)[:-1]


class LstmAttentionModel:
    """Parameters for the seven-layer stack plus forward/backward passes."""

    def __init__(self, config: ModelConfig, layer_params: dict):
        if tuple(layer_params) != LAYER_NAMES:
            raise ValueError(f"expected layers {LAYER_NAMES}, got {tuple(layer_params)}")
        self.config = config
        self.layers = layer_params

    @property
    def dtype(self) -> np.dtype:
        return self.layers["lstm"].W.dtype

    def parameters(self) -> dict[str, np.ndarray]:
        """Flat ``"layer.field" -> array`` view in build order (arrays are live)."""
        return {f"{name}.{key}": arr
                for name, p in self.layers.items()
                for key, arr in p.named_arrays().items()}

    def count_params(self) -> dict[str, int]:
        counts = {name: int(sum(a.size for a in p.named_arrays().values()))
                  for name, p in self.layers.items()}
        counts["total"] = sum(counts.values())
        return counts

    def copy(self) -> "LstmAttentionModel":
        return LstmAttentionModel(self.config, {k: p.copy() for k, p in self.layers.items()})

    # -- passes ---------------------------------------------------------

    def _check_batch(self, batch) -> np.ndarray:
        batch = np.asarray(batch, dtype=self.dtype)
        if batch.ndim != 2 or batch.shape[1] != self.config.seq_len:
            raise ShapeError(f"expected a [B, {self.config.seq_len}] feature batch, "
                             f"got shape {batch.shape}")
        return batch

    def _forward(self, batch):
        L = self.layers
        x = batch[:, :, None]
        h1, c1 = layers.lstm_forward(L["lstm"], x, return_sequences=True)
        h2, c2 = layers.lstm_forward(L["lstm_1"], h1, return_sequences=True)
        a, ca = layers.attention_forward(L["attention"], h2)
        h3, c3 = layers.lstm_forward(L["lstm_2"], a, return_sequences=False)
        d1, cd1 = layers.dense_forward(L["dense"], h3, "relu")
        d2, cd2 = layers.dense_forward(L["dense_1"], d1, "relu")
        p, cd3 = layers.dense_forward(L["dense_2"], d2, "sigmoid")
        return p[:, 0], (c1, c2, ca, c3, cd1, cd2, cd3)

    def forward(self, batch) -> np.ndarray:
        """Malicious-class probabilities, one per input row."""
        return self._forward(self._check_batch(batch))[0]

    def predict_rows(self, rows) -> np.ndarray:
        """Probabilities computed one row at a time.

        The result for a row never depends on which other rows share the
        call, so batch prediction and single-request serving agree bit for
        bit. Slower than ``forward``.
        """
        rows = self._check_batch(rows)
        out = np.empty(len(rows), dtype=self.dtype)
        for i in range(len(rows)):
            out[i] = self._forward(rows[i:i + 1])[0][0]
        return out

    def _backward(self, caches, dp):
        L = self.layers
        c1, c2, ca, c3, cd1, cd2, cd3 = caches
        g = {}
        g["dense_2"], d = layers.dense_backward(L["dense_2"], cd3, dp[:, None])
        g["dense_1"], d = layers.dense_backward(L["dense_1"], cd2, d)
        g["dense"], d = layers.dense_backward(L["dense"], cd1, d)
        g["lstm_2"], d = layers.lstm_backward(L["lstm_2"], c3, d)
        g["attention"], d = layers.attention_backward(L["attention"], ca, d)
        g["lstm_1"], d = layers.lstm_backward(L["lstm_1"], c2, d)
        g["lstm"], _ = layers.lstm_backward(L["lstm"], c1, d)
        return {name: g[name] for name in LAYER_NAMES}

    def loss_and_grads(self, batch, labels, chunk_size=None, return_probs=False):
        """Mean BCE over the batch and gradients for every layer.

        With ``return_probs`` the forward-pass probabilities are returned as
        a third element.

        ``chunk_size`` bounds how many rows go through one forward/backward
        pass (the attention layer's memory grows with B*T*T*u); gradients of
        all chunks are summed with weights n_chunk / B.
        """
        batch = self._check_batch(batch)
        labels = np.asarray(labels, dtype=self.dtype)
        if labels.shape != (len(batch),):
            raise ShapeError(f"labels shape {labels.shape} does not match batch of {len(batch)}")
        n = len(batch)
        step = n if not chunk_size else int(chunk_size)
        total_loss = 0.0
        grads = None
        probs = []
        for start in range(0, n, step):
            xb, yb = batch[start:start + step], labels[start:start + step]
            p, caches = self._forward(xb)
            probs.append(p)
            loss, dp = bce_loss(p, yb)
            weight = len(xb) / n
            g = self._backward(caches, dp * self.dtype.type(weight))
            total_loss += loss * weight
            if grads is None:
                grads = g
            else:
                for name in LAYER_NAMES:
                    for key, arr in grads[name].named_arrays().items():
                        arr += getattr(g[name], key)
        if return_probs:
            return total_loss, grads, np.concatenate(probs)
        return total_loss, grads


def build(config: ModelConfig = ModelConfig(), precision=32) -> LstmAttentionModel:
    """Initialize a model: glorot-uniform kernels, orthogonal recurrent
    kernels, unit forget bias, all other biases zero."""
    dt = resolve_dtype(precision)
    rng = make_rng(config.seed)
    c = config
    params = {
        "lstm": layers.init_lstm(c.input_dim, c.lstm1_units, rng, dt),
        "lstm_1": layers.init_lstm(c.lstm1_units, c.lstm2_units, rng, dt),
        "attention": layers.init_attention(c.lstm2_units, c.attn_units, rng, dt),
        "lstm_2": layers.init_lstm(c.lstm2_units, c.lstm3_units, rng, dt),
        "dense": layers.init_dense(c.lstm3_units, c.dense1_units, rng, dt),
        "dense_1": layers.init_dense(c.dense1_units, c.dense2_units, rng, dt),
        "dense_2": layers.init_dense(c.dense2_units, c.output_units, rng, dt),
    }
    return LstmAttentionModel(config, params)
