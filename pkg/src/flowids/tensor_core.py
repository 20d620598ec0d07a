"""Dense math substrate shared by every layer.

Tensors are plain ``numpy.ndarray`` objects. Two float widths are supported:
``float32`` for training and inference, ``float64`` for gradient checks and
bit-reproducibility runs.

Random numbers come from numpy's Philox-4x64 counter-based generator
(10 rounds, keyed through ``SeedSequence``). Philox output for a given key is
specified by the algorithm itself, so a seed reproduces the same draw
sequence on every platform numpy supports.
"""

from __future__ import annotations

import numpy as np

ACTIVATIONS = ("sigmoid", "relu", "tanh", "linear")
BCE_EPS = 1e-7

DTYPES = {32: np.float32, 64: np.float64}


class ShapeError(ValueError):
    """Raised when tensor shapes do not line up."""


def resolve_dtype(precision) -> np.dtype:
    """Map ``32``/``64`` (or a numpy dtype) to a float dtype."""
    if isinstance(precision, (int, str)) and not isinstance(precision, bool):
        try:
            return np.dtype(DTYPES[int(precision)])
        except (KeyError, ValueError):
            raise ValueError(f"precision must be 32 or 64, got {precision!r}") from None
    dt = np.dtype(precision)
    if dt not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dt}")
    return dt


def as_tensor(values, dtype=np.float64) -> np.ndarray:
    """Copy ``values`` into a finite float array, rejecting NaN/Inf."""
    arr = np.array(values, dtype=dtype)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains non-finite values")
    return arr


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic Philox generator for ``seed`` (any nonnegative int < 2**64)."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    return np.random.Generator(np.random.Philox(seed))


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def sigmoid(x: np.ndarray) -> np.ndarray:
    # exp of a non-positive argument only, so no overflow for large |x|
    x = np.asarray(x)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype, copy=False)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def activation(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "relu":
        return relu(x)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "linear":
        return np.asarray(x)
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def activation_grad(pre: np.ndarray, out: np.ndarray, kind: str) -> np.ndarray:
    """Derivative of ``activation`` at ``pre``, given ``out = activation(pre)``."""
    if kind == "sigmoid":
        return out * (1 - out)
    if kind == "relu":
        return (pre > 0).astype(pre.dtype)
    if kind == "tanh":
        return 1 - out * out
    if kind == "linear":
        return np.ones_like(pre)
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Softmax over the last axis with max subtraction."""
    z = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def bce_loss(p: np.ndarray, y: np.ndarray):
    """Mean binary cross entropy and its gradient with respect to ``p``.

    ``p`` is clamped to ``[BCE_EPS, 1 - BCE_EPS]``; the gradient is zero
    wherever the clamp is active, matching the clamped loss exactly.
    """
    p = np.asarray(p)
    y = np.asarray(y)
    if p.shape != y.shape:
        raise ShapeError(f"prediction shape {p.shape} != label shape {y.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    n = p.size
    pc = np.clip(p, BCE_EPS, 1 - BCE_EPS)
    losses = -(y * np.log(pc) + (1 - y) * np.log(1 - pc))
    inside = (p >= BCE_EPS) & (p <= 1 - BCE_EPS)
    grad = np.where(inside, (pc - y) / (pc * (1 - pc)), 0.0) / n
    # loss stays a numpy scalar of p's dtype so wide-precision callers keep their bits
    return np.mean(losses), grad.astype(p.dtype, copy=False)


def init_glorot_uniform(rows: int, cols: int, rng: np.random.Generator,
                        dtype=np.float64) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols)).astype(dtype)


def init_orthogonal(rows: int, cols: int, rng: np.random.Generator,
                    dtype=np.float64) -> np.ndarray:
    """Orthogonalized Gaussian sample with a positive-diagonal R convention."""
    if rows < 1 or cols < 1:
        raise ValueError("orthogonal init needs positive dimensions")
    sample = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(sample)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(q[:rows, :cols]).astype(dtype)
