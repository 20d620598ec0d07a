#!/usr/bin/env python3
# A walk through the building blocks: LSTM, additive self-attention, dense,
# and a finite-difference check of each backward pass.

import numpy as np

from flowids import layers
from flowids.gradcheck import layer_gradient_error
from flowids.model import build
from flowids.tensor_core import make_rng

rng = make_rng(0)

# one flow record is 78 numbers; the model reads it as a 78-step sequence
# of scalars, so an LSTM sees input_dim=1
x = rng.uniform(size=(2, 78, 1))  # batch of 2
lstm = layers.init_lstm(1, 16, rng)
print("lstm W/U/b:", lstm.W.shape, lstm.U.shape, lstm.b.shape)  # gates stacked i, f, g, o
H, _ = layers.lstm_forward(lstm, x)
print("hidden sequence:", H.shape, "range", H.min().round(3), H.max().round(3))

# attention mixes timesteps: row t of A says how much step t looks at every other step
attn = layers.init_attention(16, 8, rng)
attn.bh[:] = rng.normal(size=8)
O, cache = layers.attention_forward(attn, H)
A = cache["A"]
print("attention weights:", A.shape, "row sums", A.sum(axis=-1).min(), A.sum(axis=-1).max())

# with a zero emission vector every step gets the same weight -> a plain time average
attn.Wa[:] = 0
O_flat, _ = layers.attention_forward(attn, H)
print("Wa = 0 gives time mean:", np.allclose(O_flat, H.mean(axis=1, keepdims=True)))

# gradients: analytic backward vs central differences (evaluated in extended precision)
for name, params, xs, kw in [
    ("lstm", layers.init_lstm(3, 5, rng), rng.standard_normal((4, 3)), {}),
    ("attention", layers.init_attention(4, 2, rng), rng.standard_normal((3, 4)), {}),
    ("dense relu", layers.init_dense(3, 4, rng), rng.standard_normal((2, 3)), {"kind": "relu"}),
]:
    print(f"{name:>10}: max relative error {layer_gradient_error(params, xs, rng, **kw):.2e}")

# the full network at its published widths
counts = build().count_params()
for name, n in counts.items():
    print(f"{name:>10} {n:>9,}")
