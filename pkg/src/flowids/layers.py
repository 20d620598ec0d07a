"""LSTM, additive self-attention and dense layers with manual backprop.

All layers operate on batches. Sequence inputs are ``[B, T, d]``; a bare
``[T, d]`` sequence is accepted and treated as a batch of one. Every
forward returns ``(output, cache)`` and the matching backward consumes the
cache and the upstream gradient, returning ``(param_grads, grad_in)`` where
``param_grads`` is an instance of the same params class.

LSTM gate blocks inside the fused ``4h`` axis are ordered
(input, forget, candidate, output). Checkpoints depend on this order.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .tensor_core import (
    ShapeError,
    activation,
    activation_grad,
    init_glorot_uniform,
    init_orthogonal,
    sigmoid,
    softmax_rows,
)


class _Params:
    def named_arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.named_arrays().values())

    def copy(self):
        return type(self)(**{k: v.copy() for k, v in self.named_arrays().items()})


@dataclass
class LstmParams(_Params):
    W: np.ndarray  # [d_in, 4h]
    U: np.ndarray  # [h, 4h]
    b: np.ndarray  # [4h]

    @property
    def units(self) -> int:
        return self.U.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W.shape[0]


@dataclass
class AttentionParams(_Params):
    Wt: np.ndarray  # [d, u] query kernel
    Wx: np.ndarray  # [d, u] key kernel
    bh: np.ndarray  # [u]
    Wa: np.ndarray  # [u, 1] emission vector
    ba: np.ndarray  # [1]


@dataclass
class DenseParams(_Params):
    W: np.ndarray  # [d_in, d_out]
    b: np.ndarray  # [d_out]


def init_lstm(input_dim, units, rng, dtype=np.float64) -> LstmParams:
    W = init_glorot_uniform(input_dim, 4 * units, rng, dtype)
    U = init_orthogonal(units, 4 * units, rng, dtype)
    b = np.zeros(4 * units, dtype=dtype)
    b[units:2 * units] = 1.0  # unit forget bias
    return LstmParams(W, U, b)


def init_attention(input_dim, units, rng, dtype=np.float64) -> AttentionParams:
    Wt = init_glorot_uniform(input_dim, units, rng, dtype)
    Wx = init_glorot_uniform(input_dim, units, rng, dtype)
    Wa = init_glorot_uniform(units, 1, rng, dtype)
    return AttentionParams(Wt, Wx, np.zeros(units, dtype), Wa, np.zeros(1, dtype))


def init_dense(input_dim, units, rng, dtype=np.float64) -> DenseParams:
    return DenseParams(init_glorot_uniform(input_dim, units, rng, dtype),
                       np.zeros(units, dtype))


def _as_batch(x, width, what):
    x = np.asarray(x)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != width:
        raise ShapeError(f"{what} expects input [T, {width}] or [B, T, {width}], got {x.shape}")
    return x, squeeze


# ---------------------------------------------------------------- LSTM


def lstm_forward(params: LstmParams, x, return_sequences=True):
    """Run the recurrence with zero initial state.

    Returns ``[B, T, h]`` when ``return_sequences`` else the final state
    ``[B, h]`` (leading batch axis dropped for 2-D input).
    """
    x, squeeze = _as_batch(x, params.input_dim, "LSTM")
    B, T, _ = x.shape
    h_units = params.units
    dt = params.W.dtype

    xw = (x.reshape(B * T, -1) @ params.W).reshape(B, T, 4 * h_units) + params.b
    gates = np.empty((B, T, 4 * h_units), dtype=dt)
    c = np.zeros((B, T + 1, h_units), dtype=dt)
    h = np.zeros((B, T + 1, h_units), dtype=dt)
    tanh_c = np.empty((B, T, h_units), dtype=dt)
    for t in range(T):
        z = xw[:, t] + h[:, t] @ params.U
        ifo_i = sigmoid(z[:, :2 * h_units])
        g = np.tanh(z[:, 2 * h_units:3 * h_units])
        o = sigmoid(z[:, 3 * h_units:])
        gates[:, t, :2 * h_units] = ifo_i
        gates[:, t, 2 * h_units:3 * h_units] = g
        gates[:, t, 3 * h_units:] = o
        c[:, t + 1] = ifo_i[:, h_units:] * c[:, t] + ifo_i[:, :h_units] * g
        tanh_c[:, t] = np.tanh(c[:, t + 1])
        h[:, t + 1] = o * tanh_c[:, t]

    out = h[:, 1:] if return_sequences else h[:, -1]
    if squeeze:
        out = out[0]
    cache = {"x": x, "gates": gates, "c": c, "h": h, "tanh_c": tanh_c,
             "return_sequences": return_sequences, "squeeze": squeeze}
    return out, cache


def lstm_backward(params: LstmParams, cache, grad_out):
    """Backpropagation through time over the full cached sequence."""
    x, gates, c, h, tanh_c = (cache[k] for k in ("x", "gates", "c", "h", "tanh_c"))
    B, T, d_in = x.shape
    n = params.units
    grad_out = np.asarray(grad_out)
    if cache["squeeze"]:
        grad_out = grad_out[None]
    expected = (B, T, n) if cache["return_sequences"] else (B, n)
    if grad_out.shape != expected:
        raise ShapeError(f"LSTM grad_out shape {grad_out.shape} != forward output {expected}")
    if cache["return_sequences"]:
        dh_seq = grad_out
    else:
        dh_seq = np.zeros((B, T, n), dtype=grad_out.dtype)
        dh_seq[:, -1] = grad_out

    dz = np.empty_like(gates)
    dh_next = np.zeros((B, n), dtype=gates.dtype)
    dc_next = np.zeros((B, n), dtype=gates.dtype)
    UT = params.U.T
    for t in reversed(range(T)):
        i = gates[:, t, :n]
        f = gates[:, t, n:2 * n]
        g = gates[:, t, 2 * n:3 * n]
        o = gates[:, t, 3 * n:]
        tc = tanh_c[:, t]
        dh = dh_seq[:, t] + dh_next
        dc = dc_next + dh * o * (1 - tc * tc)
        dz[:, t, :n] = dc * g * i * (1 - i)
        dz[:, t, n:2 * n] = dc * c[:, t] * f * (1 - f)
        dz[:, t, 2 * n:3 * n] = dc * i * (1 - g * g)
        dz[:, t, 3 * n:] = dh * tc * o * (1 - o)
        dc_next = dc * f
        dh_next = dz[:, t] @ UT

    flat_dz = dz.reshape(B * T, 4 * n)
    grads = LstmParams(
        W=x.reshape(B * T, d_in).T @ flat_dz,
        U=h[:, :-1].reshape(B * T, n).T @ flat_dz,
        b=flat_dz.sum(axis=0),
    )
    dx = (flat_dz @ params.W.T).reshape(B, T, d_in)
    if cache["squeeze"]:
        dx = dx[0]
    return grads, dx


# ----------------------------------------------------------- attention


def attention_forward(params: AttentionParams, H):
    """Additive self-attention over the whole sequence.

    e[t, t'] = Wa . tanh(H[t] Wt + H[t'] Wx + bh) + ba, squashed by a
    sigmoid, then softmax-normalized over t'. Output row t is the
    attention-weighted sum of the input rows.
    """
    H, squeeze = _as_batch(H, params.Wt.shape[0], "attention")
    q = H @ params.Wt  # [B, T, u]
    k = H @ params.Wx
    s = np.tanh(q[:, :, None, :] + k[:, None, :, :] + params.bh)  # [B, T, T, u]
    e = (s @ params.Wa)[..., 0] + params.ba[0]
    e_act = sigmoid(e)
    A = softmax_rows(e_act)
    out = A @ H
    cache = {"H": H, "s": s, "e_act": e_act, "A": A, "squeeze": squeeze}
    if squeeze:
        out = out[0]
    return out, cache


def attention_backward(params: AttentionParams, cache, grad_out):
    H, s, e_act, A = (cache[k] for k in ("H", "s", "e_act", "A"))
    grad_out = np.asarray(grad_out)
    if cache["squeeze"]:
        grad_out = grad_out[None]
    if grad_out.shape != H.shape:
        raise ShapeError(f"attention grad_out shape {grad_out.shape} != forward output {H.shape}")
    dH = np.swapaxes(A, 1, 2) @ grad_out
    dA = grad_out @ np.swapaxes(H, 1, 2)
    d_eact = A * (dA - np.sum(dA * A, axis=-1, keepdims=True))
    de = d_eact * e_act * (1 - e_act)  # [B, T, T]
    u = s.shape[-1]
    dpre = de[..., None] * params.Wa[:, 0] * (1 - s * s)  # [B, T, T, u]
    dq = dpre.sum(axis=2)
    dk = dpre.sum(axis=1)
    d = H.shape[-1]
    flat_H = H.reshape(-1, d)
    grads = AttentionParams(
        Wt=flat_H.T @ dq.reshape(-1, u),
        Wx=flat_H.T @ dk.reshape(-1, u),
        bh=dq.sum(axis=(0, 1)),
        Wa=(de.reshape(-1) @ s.reshape(-1, u))[:, None],
        ba=np.array([de.sum()], dtype=de.dtype),
    )
    dH = dH + dq @ params.Wt.T + dk @ params.Wx.T
    if cache["squeeze"]:
        dH = dH[0]
    return grads, dH


# --------------------------------------------------------------- dense


def dense_forward(params: DenseParams, x, kind="linear"):
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] != params.W.shape[0]:
        raise ShapeError(f"dense expects input [B, {params.W.shape[0]}], got {x.shape}")
    pre = x @ params.W + params.b
    out = activation(pre, kind)
    return out, {"x": x, "pre": pre, "out": out, "kind": kind}


def dense_backward(params: DenseParams, cache, grad_out):
    grad_out = np.asarray(grad_out)
    if grad_out.shape != cache["out"].shape:
        raise ShapeError(f"dense grad_out shape {grad_out.shape} != forward output {cache['out'].shape}")
    dpre = grad_out * activation_grad(cache["pre"], cache["out"], cache["kind"])
    grads = DenseParams(W=cache["x"].T @ dpre, b=dpre.sum(axis=0))
    return grads, dpre @ params.W.T


_BACKWARD = {
    LstmParams: lstm_backward,
    AttentionParams: attention_backward,
    DenseParams: dense_backward,
}


def backward(params, cache, grad_out):
    """Dispatch to the backward pass matching ``params``' layer type."""
    return _BACKWARD[type(params)](params, cache, grad_out)
