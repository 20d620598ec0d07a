#!/usr/bin/env python3
# Start the line-protocol verdict service on an ephemeral port and talk to it.
# A controller would send one JSON line per flow and read one line back.

import asyncio
import tempfile
import threading
from pathlib import Path

from flowids import ModelConfig, build, preprocess, save_checkpoint
from flowids.dataset import clean, ingest_csv
from flowids.fixture import mini_fixture_paths
from flowids.service import VerdictService, request_verdicts

paths = mini_fixture_paths()
ds = preprocess(paths)
cfg = ModelConfig(lstm1_units=4, lstm2_units=4, attn_units=2, lstm3_units=4,
                  dense1_units=8, dense2_units=4)
ckpt = Path(tempfile.mkdtemp()) / "model.ckpt"
save_checkpoint(build(cfg), ckpt, ds.scaler)  # untrained, just to show the protocol

service = VerdictService.from_checkpoint(ckpt)
loop = asyncio.new_event_loop()
ready = threading.Event()
addr = {}


def run():
    asyncio.set_event_loop(loop)
    global stop
    stop = asyncio.Event()
    loop.run_until_complete(service.serve("127.0.0.1", 0,
                                          started=lambda a: (addr.update(a=a), ready.set()),
                                          stop=stop))


threading.Thread(target=run, daemon=True).start()
ready.wait()
host, port = addr["a"]
print("serving on", host, port)

# raw, unscaled feature rows straight from the csv (the service applies the scaler)
flows, _ = clean(ingest_csv(paths))
requests = [{"id": f"flow-{i}", "features": flows.features[i].tolist()} for i in range(3)]
requests.append({"id": "short", "features": flows.features[0][:77].tolist()})  # wrong arity
requests.append({"id": "after", "features": flows.features[0].tolist()})  # connection still open

replies = request_verdicts(host, port, requests)
for reply in replies:
    print(reply)
print("same flow, same probability:", replies[0]["probability"] == replies[-1]["probability"])

loop.call_soon_threadsafe(stop.set)
