"""Checkpoint files.

Payload after the common container header (see ``container``)::

    float width   u8   4 or 8 bytes per parameter value
    config        9 x u32 layer dims (ModelConfig field order), u64 seed
    parameters    per layer in build order, per array in field order,
                  raw C-order little-endian IEEE-754 at the float width
    scaler        u8 flag, then the scaler block when present

LSTM kernels use the (input, forget, candidate, output) gate order.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .container import Reader, Writer, atomic_write, checksum
from .dataset import ScalerParams, read_scaler, write_scaler
from .model import LstmAttentionModel, ModelConfig, build

CKPT_MAGIC = b"FIDSCKPT"
CKPT_VERSION = 1


def _encode(model: LstmAttentionModel, scaler: ScalerParams | None) -> bytes:
    width = model.dtype.itemsize
    w = Writer(CKPT_MAGIC, CKPT_VERSION)
    w.u8(width)
    for dim in model.config.dims:
        w.u32(dim)
    w.u64(model.config.seed)
    for arr in model.parameters().values():
        w.array(arr, f"<f{width}")
    write_scaler(w, scaler)
    return w.finish()


def save_checkpoint(model: LstmAttentionModel, path, scaler: ScalerParams | None = None) -> int:
    """Write ``model`` (and optionally its scaler); returns the file checksum."""
    data = _encode(model, scaler)
    atomic_write(path, data)
    return int.from_bytes(data[-8:], "little")


def load_checkpoint(path, with_checksum=False):
    """Return ``(model, scaler)``; scaler is ``None`` if none was stored.

    With ``with_checksum`` the stored file checksum is returned as a third
    element. Any format or integrity failure raises before a model exists.
    """
    data = Path(path).read_bytes()
    r = Reader(data, CKPT_MAGIC, {CKPT_VERSION})
    width = r.u8()
    if width not in (4, 8):
        raise ValueError(f"unsupported float width {width}")
    dims = [r.u32() for _ in range(9)]
    config = ModelConfig(*dims, seed=r.u64())
    model = build(config, precision=8 * width)
    for arr in model.parameters().values():
        arr[...] = r.array(arr.size, f"f{width}", arr.shape)
    scaler = read_scaler(r)
    r.done()
    if with_checksum:
        return model, scaler, int.from_bytes(data[-8:], "little")
    return model, scaler


def model_checksum(model: LstmAttentionModel) -> int:
    """Checksum of the parameter bytes alone, independent of any file."""
    return checksum(b"".join(np.ascontiguousarray(a).tobytes() for a in model.parameters().values()))
