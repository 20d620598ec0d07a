"""Flow-record ingestion and preprocessing.

The chain is::

    ingest_csv -> clean -> binarize_labels -> balance_by_reduction
               -> split -> fit_scaler (train only) -> apply_scaler

Every stage is reduction-only: each surviving row keeps the ``row_ids``
entry it received at ingest, so any output row can be traced back to a
single line of a single input file.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .container import Reader, Writer, atomic_write
from .tensor_core import make_rng

log = logging.getLogger(__name__)

N_FEATURES = 78
BENIGN = "benign"


class IngestError(ValueError):
    pass


class SchemaError(ValueError):
    pass


@dataclass
class FlowTable:
    """Rows of numeric flow features with a label and a source-file tag.

    ``labels`` holds strings straight after ingest and ``int8`` 0/1 after
    ``binarize_labels``. Non-numeric or empty feature tokens are stored as
    NaN at ingest and removed by ``clean``.
    """

    columns: list[str]
    features: np.ndarray
    labels: np.ndarray
    sources: np.ndarray
    source_names: list[str] = field(default_factory=list)
    row_ids: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.features)
        if self.features.ndim != 2 or self.features.shape[1] != len(self.columns):
            raise SchemaError(f"feature matrix {self.features.shape} does not match "
                              f"{len(self.columns)} columns")
        if self.row_ids is None:
            self.row_ids = np.arange(n, dtype=np.int64)
        if not (len(self.labels) == len(self.sources) == len(self.row_ids) == n):
            raise SchemaError("features, labels, sources and row ids differ in length")

    def __len__(self):
        return len(self.features)

    @classmethod
    def from_arrays(cls, features, labels, columns=None):
        """Wrap an already-numeric feature matrix with 0/1 labels."""
        features = np.asarray(features, dtype=np.float64)
        if columns is None:
            columns = [f"f{i}" for i in range(features.shape[1])]
        return cls(list(columns), features, np.asarray(labels, dtype=np.int8),
                   np.zeros(len(features), dtype=np.int32), ["<memory>"])

    def take(self, index) -> "FlowTable":
        return replace(self, features=self.features[index], labels=self.labels[index],
                       sources=self.sources[index], row_ids=self.row_ids[index])


def _parse(token: str) -> float:
    try:
        return float(token)
    except ValueError:
        return math.nan


def ingest_csv(paths, label_column="Label") -> FlowTable:
    """Concatenate CSV files sharing one header, tagging rows by file."""
    paths = [Path(p) for p in paths]
    if not paths:
        raise IngestError("no input files given")
    header = None
    header_file = None
    rows, labels, sources = [], [], []
    for src_idx, path in enumerate(paths):
        try:
            fh = open(path, newline="", encoding="utf-8")
        except OSError as exc:
            raise IngestError(f"cannot read {path}: {exc}") from exc
        with fh:
            reader = csv.reader(fh)
            file_header = [h.strip() for h in next(reader, [])]
            if not file_header:
                raise IngestError(f"{path} is empty (no header row)")
            if header is None:
                header, header_file = file_header, path
                if label_column not in header:
                    raise SchemaError(f"label column {label_column!r} missing from {path}")
                label_idx = header.index(label_column)
            elif file_header != header:
                raise IngestError(f"header mismatch between {header_file} and {path}")
            for record in reader:
                if not record:
                    continue
                if len(record) != len(header):
                    raise IngestError(f"{path} line {reader.line_num}: expected "
                                      f"{len(header)} fields, found {len(record)}")
                labels.append(record[label_idx].strip())
                rows.append([_parse(tok) for j, tok in enumerate(record) if j != label_idx])
                sources.append(src_idx)
    columns = [h for h in header if h != label_column]
    features = np.array(rows, dtype=np.float64).reshape(len(rows), len(columns))
    return FlowTable(columns, features, np.array(labels, dtype=object),
                     np.array(sources, dtype=np.int32), [str(p) for p in paths])


def clean(table: FlowTable, timestamp_column="Timestamp", drop_columns=(),
          expected_features=N_FEATURES) -> tuple[FlowTable, int]:
    """Drop the timestamp and named columns, then every row holding a null,
    non-numeric or non-finite feature. Returns the table and the number of
    dropped rows."""
    unknown = [c for c in drop_columns if c not in table.columns]
    if unknown:
        raise SchemaError(f"drop columns not in table: {unknown}")
    remove = set(drop_columns)
    if timestamp_column in table.columns:
        remove.add(timestamp_column)
    keep = [i for i, c in enumerate(table.columns) if c not in remove]
    columns = [table.columns[i] for i in keep]
    if len(columns) != expected_features:
        raise SchemaError(f"expected {expected_features} feature columns after cleaning, "
                          f"got {len(columns)}: {columns}")
    features = table.features[:, keep]
    ok = np.all(np.isfinite(features), axis=1)
    out = replace(table, columns=columns, features=features).take(ok)
    dropped = int(len(table) - ok.sum())
    if dropped:
        log.info("clean: dropped %d of %d rows with null or non-finite features", dropped, len(table))
    return out, dropped


def binarize_labels(table: FlowTable) -> FlowTable:
    """'Benign' (any case, trimmed) becomes 0, every attack label 1."""
    if table.labels is None:
        raise SchemaError("table has no label column")
    y = np.array([0 if str(v).strip().lower() == BENIGN else 1 for v in table.labels],
                 dtype=np.int8)
    return replace(table, labels=y)


def balance_by_reduction(table: FlowTable, rng: np.random.Generator) -> FlowTable:
    """Within each source file, downsample benign rows to the malicious count.

    Malicious rows are always kept; a file with no malicious rows contributes
    nothing. Surviving rows keep their original order.
    """
    keep = []
    empty_files = 0
    for src in np.unique(table.sources):
        idx = np.flatnonzero(table.sources == src)
        benign = idx[table.labels[idx] == 0]
        malicious = idx[table.labels[idx] == 1]
        if len(malicious) == 0:
            empty_files += 1
            log.warning("balance: %s has no malicious rows; it contributes no rows",
                        table.source_names[src] if src < len(table.source_names) else src)
            continue
        if len(benign) > len(malicious):
            benign = rng.choice(benign, size=len(malicious), replace=False)
        keep.append(malicious)
        keep.append(benign)
    if not keep:
        log.warning("balance: result is empty")
        return table.take(np.array([], dtype=np.int64))
    return table.take(np.sort(np.concatenate(keep)))


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.7
    validation: float = 0.1
    test: float = 0.2
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        fracs = (self.train, self.validation, self.test)
        if any(f < 0 for f in fracs) or abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be nonnegative and sum to 1, got {fracs}")


def split(table: FlowTable, spec: SplitSpec = SplitSpec()):
    """Seeded (optionally label-stratified) train/validation/test partition."""
    if len(table) == 0:
        raise ValueError("cannot split an empty table")
    rng = make_rng(spec.seed)
    strata = ([np.flatnonzero(table.labels == c) for c in np.unique(table.labels)]
              if spec.stratified else [np.arange(len(table))])
    parts = ([], [], [])
    for stratum in strata:
        stratum = rng.permutation(stratum)
        n = len(stratum)
        n_train = int(round(spec.train * n))
        n_val = min(int(round(spec.validation * n)), n - n_train)
        bounds = (0, n_train, n_train + n_val, n)
        for k in range(3):
            chunk = stratum[bounds[k]:bounds[k + 1]]
            if len(chunk) == 0 and (spec.train, spec.validation, spec.test)[k] > 0:
                log.warning("split: partition %d received no rows from a stratum of %d", k, n)
            parts[k].append(chunk)
    return tuple(table.take(np.sort(np.concatenate(p))) for p in parts)


@dataclass(frozen=True)
class ScalerParams:
    minimum: np.ndarray
    maximum: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.minimum.shape != self.maximum.shape or np.any(self.minimum > self.maximum):
            raise ValueError("scaler needs matching min/max with min <= max")

    @property
    def n_features(self):
        return len(self.minimum)

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_features:
            raise SchemaError(f"scaler fitted on {self.n_features} features, got {x.shape[-1]}")
        span = self.maximum - self.minimum
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (x - self.minimum) / safe, 0.0)


def fit_scaler(train: FlowTable) -> ScalerParams:
    if len(train) == 0:
        raise ValueError("cannot fit a scaler on an empty split")
    return ScalerParams(train.features.min(axis=0), train.features.max(axis=0),
                        tuple(train.columns))


def apply_scaler(params: ScalerParams, table: FlowTable) -> FlowTable:
    """Min-max scale to [0, 1] by the training extrema, unclipped."""
    return replace(table, features=params.transform(table.features))


# ------------------------------------------------------------ file format

DATA_MAGIC = b"FIDSDATA"
DATA_VERSION = 1


def write_scaler(w: Writer, scaler: ScalerParams | None):
    w.u8(0 if scaler is None else 1)
    if scaler is None:
        return
    w.u32(scaler.n_features)
    w.u32(len(scaler.feature_names))
    for name in scaler.feature_names:
        w.text(name)
    w.array(scaler.minimum, "<f8")
    w.array(scaler.maximum, "<f8")


def read_scaler(r: Reader) -> ScalerParams | None:
    if not r.u8():
        return None
    n = r.u32()
    names = tuple(r.text() for _ in range(r.u32()))
    return ScalerParams(r.array(n, np.float64), r.array(n, np.float64), names)


@dataclass
class ProcessedDataset:
    train: FlowTable
    validation: FlowTable
    test: FlowTable
    scaler: ScalerParams

    def splits(self):
        return {"train": self.train, "validation": self.validation, "test": self.test}


def save_dataset(ds: ProcessedDataset, path):
    """Payload: column names, then per split ``n_rows u64``, features f64
    ``[n, F]``, labels u8 ``[n]``, ingest row ids i64 ``[n]``; then the
    scaler block."""
    w = Writer(DATA_MAGIC, DATA_VERSION)
    columns = ds.train.columns
    w.u32(len(columns))
    for c in columns:
        w.text(c)
    for table in (ds.train, ds.validation, ds.test):
        if table.columns != columns:
            raise SchemaError("splits disagree on columns")
        w.u64(len(table))
        w.array(table.features, "<f8")
        w.array(table.labels, "u1")
        w.array(table.row_ids, "<i8")
    write_scaler(w, ds.scaler)
    atomic_write(path, w.finish())


def load_dataset(path) -> ProcessedDataset:
    r = Reader(Path(path).read_bytes(), DATA_MAGIC, {DATA_VERSION})
    columns = [r.text() for _ in range(r.u32())]
    tables = []
    for _ in range(3):
        n = r.u64()
        feats = r.array(n * len(columns), np.float64, (n, len(columns)))
        labels = r.array(n, np.uint8).astype(np.int8)
        ids = r.array(n, np.int64)
        tables.append(FlowTable(list(columns), feats, labels, np.zeros(n, np.int32), [], ids))
    scaler = read_scaler(r)
    r.done()
    return ProcessedDataset(*tables, scaler)


def preprocess(paths, label_column="Label", timestamp_column="Timestamp", drop_columns=(),
               split_spec=SplitSpec(), balance_seed=0, expected_features=N_FEATURES):
    """Run the full chain and return a scaled ``ProcessedDataset``."""
    table = ingest_csv(paths, label_column)
    table, _ = clean(table, timestamp_column, drop_columns, expected_features)
    table = binarize_labels(table)
    table = balance_by_reduction(table, make_rng(balance_seed))
    train, val, test = split(table, split_spec)
    scaler = fit_scaler(train)
    return ProcessedDataset(apply_scaler(scaler, train), apply_scaler(scaler, val),
                            apply_scaler(scaler, test), scaler)
