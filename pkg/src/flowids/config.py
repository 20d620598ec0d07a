"""Flat ``key = value`` run configuration.

Lines starting with ``#`` are comments (use them as section markers). List
values are comma-separated. Defaults reproduce the published settings:
78 features, the published layer widths, Adam at 3e-5 with batch 512 for 75
epochs, and a 0.7/0.1/0.2 split.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .dataset import SplitSpec
from .model import ModelConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


# file names used under output_dir when the explicit path key is empty
DERIVED_PATHS = {
    "dataset_path": "dataset.fids",
    "checkpoint_path": "model.ckpt",
    "history_path": "history.csv",
}


@dataclass(frozen=True)
class RunConfig:
    # dataset
    data_paths: tuple[str, ...] = ()
    label_column: str = "Label"
    timestamp_column: str = "Timestamp"
    drop_columns: tuple[str, ...] = ()
    balance_seed: int = 0
    split_train: float = 0.7
    split_validation: float = 0.1
    split_test: float = 0.2
    split_seed: int = 0
    stratified: bool = True
    # model
    seq_len: int = 78
    lstm1_units: int = 256
    lstm2_units: int = 256
    attn_units: int = 32
    lstm3_units: int = 128
    dense1_units: int = 512
    dense2_units: int = 256
    model_seed: int = 0
    precision: int = 32
    # training
    epochs: int = 75
    batch_size: int = 512
    learning_rate: float = 3e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    shuffle_seed: int = 0
    chunk_size: int = 128
    threads: int = 0
    # outputs and evaluation
    output_dir: str = "run"
    dataset_path: str = ""
    checkpoint_path: str = ""
    history_path: str = ""
    eval_split: str = "test"
    threshold: float = 0.5
    predict_input: str = ""
    predict_output: str = ""
    bind: str = "127.0.0.1:7878"

    def path(self, key) -> Path:
        value = getattr(self, key)
        if value:
            return Path(value)
        return Path(self.output_dir) / DERIVED_PATHS[key]

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.split_train, self.split_validation, self.split_test,
                         self.split_seed, self.stratified)

    def model_config(self) -> ModelConfig:
        return ModelConfig(seq_len=self.seq_len, lstm1_units=self.lstm1_units,
                           lstm2_units=self.lstm2_units, attn_units=self.attn_units,
                           lstm3_units=self.lstm3_units, dense1_units=self.dense1_units,
                           dense2_units=self.dense2_units, seed=self.model_seed)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.batch_size, self.learning_rate, self.beta1,
                           self.beta2, self.epsilon, self.shuffle_seed, self.chunk_size)

    def validate(self) -> "RunConfig":
        checks = {
            "split": self.split_spec, "model": self.model_config, "train": self.train_config,
        }
        for name, make in checks.items():
            try:
                make()
            except ValueError as exc:
                raise ConfigError(f"invalid {name} settings: {exc}") from None
        if self.precision not in (32, 64):
            raise ConfigError(f"precision must be 32 or 64, got {self.precision}")
        if self.eval_split not in ("train", "validation", "test", "all"):
            raise ConfigError(f"eval_split must be train, validation, test or all, got {self.eval_split!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0 (0 keeps the library default)")
        return self

    def to_text(self) -> str:
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, (tuple, list)):
                value = ", ".join(value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(key, raw: str):
    default = getattr(RunConfig, key, None)
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(p.strip() for p in raw.split(",") if p.strip())
        return raw
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None


def parse_assignments(lines, origin="config") -> dict:
    values = {}
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{origin}:{lineno}: expected key = value, got {line!r}")
        if key not in _FIELDS:
            raise ConfigError(f"{origin}:{lineno}: unknown config key {key!r}")
        values[key] = _convert(key, raw)
    return values


def load_config(path=None, overrides=(), seed=None, threads=None, precision=None) -> RunConfig:
    """File values, then ``--set`` overrides, then the dedicated flags."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values.update(parse_assignments(text.splitlines(), str(path)))
    values.update(parse_assignments(overrides, "--set"))
    if seed is not None:
        for key in ("balance_seed", "split_seed", "model_seed", "shuffle_seed"):
            values[key] = seed
    if threads is not None:
        values["threads"] = threads
    if precision is not None:
        values["precision"] = precision
    return replace(RunConfig(), **values).validate()
