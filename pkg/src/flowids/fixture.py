"""A tiny two-file flow dataset in the CSE-CIC-IDS2018 column layout.

Each file holds 75 valid benign rows, 25 valid malicious rows (3:1) and
three broken rows: one empty field, one ``Infinity`` and one ``NaN``.
After cleaning and per-file 1:1 balancing the table has exactly 50 benign
and 50 malicious rows. Malicious flows are drawn from a visibly different
distribution so small models can separate them.

The CSVs shipped under ``flowids/data/mini_fixture`` are the output of
``write_mini_fixture`` and can be regenerated with it.
"""

from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path

import numpy as np

from .tensor_core import make_rng


HEADER = (
    "Dst Port,Protocol,Timestamp,Flow Duration,Tot Fwd Pkts,Tot Bwd Pkts,TotLen Fwd Pkts,"
    "TotLen Bwd Pkts,Fwd Pkt Len Max,Fwd Pkt Len Min,Fwd Pkt Len Mean,Fwd Pkt Len Std,"
    "Bwd Pkt Len Max,Bwd Pkt Len Min,Bwd Pkt Len Mean,Bwd Pkt Len Std,Flow Byts/s,Flow Pkts/s,"
    "Flow IAT Mean,Flow IAT Std,Flow IAT Max,Flow IAT Min,Fwd IAT Tot,Fwd IAT Mean,Fwd IAT Std,"
    "Fwd IAT Max,Fwd IAT Min,Bwd IAT Tot,Bwd IAT Mean,Bwd IAT Std,Bwd IAT Max,Bwd IAT Min,"
    "Fwd PSH Flags,Bwd PSH Flags,Fwd URG Flags,Bwd URG Flags,Fwd Header Len,Bwd Header Len,"
    "Fwd Pkts/s,Bwd Pkts/s,Pkt Len Min,Pkt Len Max,Pkt Len Mean,Pkt Len Std,Pkt Len Var,"
    "FIN Flag Cnt,SYN Flag Cnt,RST Flag Cnt,PSH Flag Cnt,ACK Flag Cnt,URG Flag Cnt,"
    "CWE Flag Count,ECE Flag Cnt,Down/Up Ratio,Pkt Size Avg,Fwd Seg Size Avg,Bwd Seg Size Avg,"
    "Fwd Byts/b Avg,Fwd Pkts/b Avg,Fwd Blk Rate Avg,Bwd Byts/b Avg,Bwd Pkts/b Avg,"
    "Bwd Blk Rate Avg,Subflow Fwd Pkts,Subflow Fwd Byts,Subflow Bwd Pkts,Subflow Bwd Byts,"
    "Init Fwd Win Byts,Init Bwd Win Byts,Fwd Act Data Pkts,Fwd Seg Size Min,Active Mean,"
    "Active Std,Active Max,Active Min,Idle Mean,Idle Std,Idle Max,Idle Min,Label"
).split(",")

FILES = (
    ("Wednesday-14-02-2018.csv", "14/02/2018", ("FTP-BruteForce", "SSH-Bruteforce")),
    ("Thursday-15-02-2018.csv", "15/02/2018", ("DoS attacks-GoldenEye", "DoS attacks-Slowloris")),
)
N_BENIGN, N_MALICIOUS = 75, 25


def _row(rng, malicious):
    n = len(HEADER) - 3  # minus Dst Port, Timestamp, Label
    if malicious:
        base = rng.uniform(0.0, 40.0, size=n)
        port = rng.choice([21, 22, 80])
    else:
        base = rng.uniform(60.0, 100.0, size=n)
        port = rng.choice([53, 443, 3389])
    values = np.round(base * rng.uniform(1, 50, size=n), 3)
    return [str(port), "6"] + [f"{v:g}" for v in values[1:]]


def write_mini_fixture(directory, seed=2018) -> list[Path]:
    rng = make_rng(seed)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, day, attacks in FILES:
        kinds = ["benign"] * N_BENIGN + ["malicious"] * N_MALICIOUS + ["empty", "inf", "nan"]
        order = rng.permutation(len(kinds))
        rows = []
        for k, idx in enumerate(order):
            kind = kinds[idx]
            malicious = kind == "malicious" or (kind == "inf")
            feats = _row(rng, malicious)
            label = attacks[k % 2] if malicious else ("BENIGN" if k % 17 == 0 else "Benign")
            if kind == "empty":
                feats[5] = ""
            elif kind == "inf":
                feats[HEADER.index("Flow Byts/s") - 1] = "Infinity"
            elif kind == "nan":
                feats[HEADER.index("Flow Pkts/s") - 1] = "NaN"
            stamp = f"{day} {8 + k // 60:02d}:{k % 60:02d}:00"
            # Dst Port, Protocol, Timestamp, remaining features, Label
            rows.append([feats[0], feats[1], stamp] + feats[2:] + [label])
        path = directory / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HEADER)
            w.writerows(rows)
        paths.append(path)
    return paths


def mini_fixture_paths() -> list[Path]:
    """Paths of the bundled fixture CSVs."""
    root = resources.files("flowids") / "data" / "mini_fixture"
    return [Path(str(root / name)) for name, _, _ in FILES]
