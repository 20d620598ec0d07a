"""Central finite-difference verification of analytic gradients.

Analytic gradients are computed in float64. The numeric side re-evaluates
the loss on ``np.longdouble`` copies (80-bit on x86-64): at a step of 1e-6 a
float64 loss difference carries ~1e-10 of roundoff, which would swamp
gradient components smaller than ~1e-5 under a 1e-8 relative-error floor.
On platforms where longdouble is plain double the check degrades to float64.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from . import layers

ORACLE_DTYPE = np.longdouble


def relative_error(a, b, floor=1e-8):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def finite_difference_check(loss_fn: Callable[[], float],
                            arrays: Mapping[str, np.ndarray],
                            analytic: Mapping[str, np.ndarray],
                            step: float = 1e-6) -> float:
    """Worst relative error between ``analytic`` and central differences.

    ``loss_fn`` takes no arguments and must read its inputs from ``arrays``,
    which are perturbed in place one coordinate at a time and restored.
    ``arrays`` must be float64 or longdouble; float32 is too coarse.
    """
    worst = 0.0
    for name, arr in arrays.items():
        if arr.dtype not in (np.float64, np.longdouble):
            raise TypeError(f"finite differences need float64 or wider, {name} is {arr.dtype}")
        grad = analytic[name]
        if grad.shape != arr.shape:
            raise ValueError(f"gradient for {name} has shape {grad.shape}, expected {arr.shape}")
        flat = arr.reshape(-1)
        if not np.shares_memory(flat, arr):
            raise ValueError(f"{name} must be contiguous to perturb in place")
        h = arr.dtype.type(step)
        numeric = np.empty(flat.size, dtype=arr.dtype)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = loss_fn()
            flat[idx] = orig - h
            down = loss_fn()
            flat[idx] = orig
            numeric[idx] = (up - down) / (2 * h)
        if flat.size:
            worst = max(worst, float(np.max(relative_error(grad.reshape(-1), numeric))))
    return worst


def widen(params):
    """Copy of a params object cast to the oracle dtype."""
    return type(params)(**{k: v.astype(ORACLE_DTYPE) for k, v in params.named_arrays().items()})


_FORWARD = {
    layers.LstmParams: layers.lstm_forward,
    layers.AttentionParams: layers.attention_forward,
    layers.DenseParams: layers.dense_forward,
}


def layer_gradient_error(params, x, rng: np.random.Generator, step=1e-6, **forward_kwargs) -> float:
    """Check one layer's backward pass, parameters and input included.

    The scalar loss is ``sum(output * R)`` for a fixed random ``R``, so the
    upstream gradient is ``R`` itself.
    """
    forward = _FORWARD[type(params)]
    x = np.array(x, dtype=np.float64)
    out, cache = forward(params, x, **forward_kwargs)
    R = rng.standard_normal(out.shape)
    grads, dx = layers.backward(params, cache, R)

    wide = widen(params)
    wide_x = x.astype(ORACLE_DTYPE)
    wide_R = R.astype(ORACLE_DTYPE)

    def loss():
        return np.sum(forward(wide, wide_x, **forward_kwargs)[0] * wide_R)

    arrays = dict(wide.named_arrays(), x=wide_x)
    analytic = dict(grads.named_arrays(), x=dx)
    return finite_difference_check(loss, arrays, analytic, step)
