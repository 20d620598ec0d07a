"""Line-protocol verdict service for network controllers.

One JSON object per line in each direction, UTF-8. Requests carry ``id``
and ``features`` (78 raw, unscaled values in ingest column order). Replies
carry ``id``, ``probability``, ``verdict``, ``model_checksum`` and
``micros``; malformed requests get ``{"id": ..., "error": ...}`` and the
connection stays open. Replies on a connection follow request order.
"""

from __future__ import annotations

import asyncio
import json
import logging
import signal
import socket
import time

import numpy as np

from .checkpoint import load_checkpoint
from .dataset import ScalerParams
from .model import LstmAttentionModel

log = logging.getLogger(__name__)

MALICIOUS = "malicious"
BENIGN = "benign"


class RequestError(ValueError):
    pass


class ServiceError(RuntimeError):
    """Startup failure: unusable checkpoint or unbindable address."""


def classify(features, scaler: ScalerParams, model: LstmAttentionModel, threshold=0.5) -> dict:
    """Scale one raw feature vector and score it as a batch of one."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 1 or len(x) != scaler.n_features:
        raise RequestError(f"expected {scaler.n_features} features, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise RequestError("features must be finite numbers")
    p = float(model.predict_rows(scaler.transform(x[None]))[0])
    return {"probability": p, "verdict": MALICIOUS if p >= threshold else BENIGN}


def parse_bind(bind: str) -> tuple[str, int]:
    host, sep, port = bind.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"bind address must look like HOST:PORT, got {bind!r}")
    return host or "127.0.0.1", int(port)


class VerdictService:
    def __init__(self, model: LstmAttentionModel, scaler: ScalerParams, threshold=0.5,
                 model_checksum: int = 0):
        if scaler is None:
            raise ServiceError("checkpoint has no scaler; raw features cannot be scaled")
        if scaler.n_features != model.config.seq_len:
            raise ServiceError(f"scaler has {scaler.n_features} features, model expects "
                               f"{model.config.seq_len}")
        self.model = model
        self.scaler = scaler
        self.threshold = threshold
        self.model_checksum = f"{model_checksum:016x}"

    @classmethod
    def from_checkpoint(cls, path, threshold=0.5):
        try:
            model, scaler, digest = load_checkpoint(path, with_checksum=True)
        except (OSError, ValueError) as exc:
            raise ServiceError(f"cannot load checkpoint {path}: {exc}") from exc
        return cls(model, scaler, threshold, digest)

    def respond(self, line: bytes | str) -> dict:
        start = time.perf_counter()
        req_id = None
        try:
            try:
                msg = json.loads(line)
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise RequestError(f"malformed JSON: {exc}") from None
            if not isinstance(msg, dict):
                raise RequestError("request must be a JSON object")
            req_id = msg.get("id")
            if not isinstance(req_id, str):
                raise RequestError("request needs a string 'id'")
            feats = msg.get("features")
            if not isinstance(feats, list) or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in feats):
                raise RequestError("'features' must be a list of numbers")
            result = classify(feats, self.scaler, self.model, self.threshold)
        except RequestError as exc:
            return {"id": req_id, "error": str(exc)}
        return {"id": req_id, **result, "model_checksum": self.model_checksum,
                "micros": int((time.perf_counter() - start) * 1e6)}

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        loop = asyncio.get_running_loop()
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                reply = await loop.run_in_executor(None, self.respond, line)
                writer.write(json.dumps(reply).encode() + b"\n")
                await writer.drain()
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            writer.close()

    async def serve(self, host, port, started=None, stop: asyncio.Event | None = None):
        """Accept connections until ``stop`` is set. ``started`` receives the
        bound ``(host, port)``, useful with port 0."""
        try:
            server = await asyncio.start_server(self._handle, host, port, limit=2**20)
        except OSError as exc:
            raise ServiceError(f"cannot bind {host}:{port}: {exc}") from exc
        stop = stop or asyncio.Event()
        addr = server.sockets[0].getsockname()[:2]
        log.info("serving on %s:%d (model %s)", addr[0], addr[1], self.model_checksum)
        if started is not None:
            started(addr)
        async with server:
            await stop.wait()
        log.info("shut down")


def serve(checkpoint_path, bind="127.0.0.1:7878", threshold=0.5):
    """Blocking entry point; exits cleanly on SIGINT or SIGTERM."""
    service = VerdictService.from_checkpoint(checkpoint_path, threshold)
    host, port = parse_bind(bind)

    async def main():
        stop = asyncio.Event()
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            loop.add_signal_handler(sig, stop.set)
        await service.serve(host, port, stop=stop)

    asyncio.run(main())


def request_verdicts(host, port, requests, timeout=30.0) -> list[dict]:
    """Send request objects (or raw lines) on one connection; return replies in order."""
    with socket.create_connection((host, port), timeout=timeout) as sock:
        fh = sock.makefile("rwb")
        replies = []
        for req in requests:
            line = req if isinstance(req, (bytes, str)) else json.dumps(req)
            if isinstance(line, str):
                line = line.encode()
            fh.write(line.rstrip(b"\n") + b"\n")
            fh.flush()
            replies.append(json.loads(fh.readline()))
        return replies
