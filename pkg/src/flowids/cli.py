"""Command-line entry point: ``flowids {preprocess,train,eval,predict,serve}``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import dataset
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_config
from .container import atomic_write
from .model import build
from .service import MALICIOUS, BENIGN, ServiceError, serve
from .training import evaluate, train, write_history

COMMANDS = ("preprocess", "train", "eval", "predict", "serve")


class CommandError(RuntimeError):
    pass


def cmd_preprocess(cfg: RunConfig):
    if not cfg.data_paths:
        raise ConfigError("data_paths is empty")
    missing = [p for p in cfg.data_paths if not Path(p).is_file()]
    if missing:
        raise CommandError(f"missing input files: {missing}")
    ds = dataset.preprocess(cfg.data_paths, cfg.label_column, cfg.timestamp_column,
                            cfg.drop_columns, cfg.split_spec(), cfg.balance_seed, cfg.seq_len)
    out = cfg.path("dataset_path")
    dataset.save_dataset(ds, out)
    for name, table in ds.splits().items():
        print(f"{name}: {len(table)} rows ({int(np.sum(table.labels == 1))} malicious)")
    print(f"wrote {out}")


def cmd_train(cfg: RunConfig):
    ds = dataset.load_dataset(_existing(cfg.path("dataset_path")))
    model = build(cfg.model_config(), cfg.precision)
    model, history = train(model, ds.train, ds.validation, cfg.train_config())
    # history and checkpoint are written only after training completes
    write_history(history, cfg.path("history_path"))
    digest = save_checkpoint(model, cfg.path("checkpoint_path"), ds.scaler)
    last = history[-1]
    print(f"epoch {last.epoch}: loss={last.train_loss:.6f} acc={last.train_acc:.4f} "
          f"val_loss={last.val_loss:.6f} val_acc={last.val_acc:.4f}")
    print(f"wrote {cfg.path('checkpoint_path')} (checksum {digest:016x}) and {cfg.path('history_path')}")


def cmd_eval(cfg: RunConfig):
    ds = dataset.load_dataset(_existing(cfg.path("dataset_path")))
    model, _ = load_checkpoint(_existing(cfg.path("checkpoint_path")))
    names = ("validation", "test") if cfg.eval_split == "all" else (cfg.eval_split,)
    reports = {name: evaluate(model, ds.splits()[name], cfg.threshold) for name in names}
    out_dir = Path(cfg.output_dir)
    for name, rep in reports.items():
        atomic_write(out_dir / f"report_{name}.txt", rep.to_text().encode())
        atomic_write(out_dir / f"report_{name}.json", rep.to_json().encode())
        print(f"[{name}]")
        print(rep.to_text(), end="")


def predict_table(model, scaler, rows, header, threshold):
    """Probability and verdict per CSV row; rows with unusable values get
    an empty probability and the verdict ``invalid``."""
    try:
        cols = [header.index(name) for name in scaler.feature_names]
    except ValueError:
        missing = [n for n in scaler.feature_names if n not in header]
        raise CommandError(f"predict input lacks feature columns: {missing}") from None
    values = np.full((len(rows), len(cols)), np.nan)
    for i, row in enumerate(rows):
        for j, c in enumerate(cols):
            try:
                values[i, j] = float(row[c])
            except (ValueError, IndexError):
                pass
    ok = np.all(np.isfinite(values), axis=1)
    probs = np.full(len(rows), np.nan)
    if ok.any():
        probs[ok] = model.predict_rows(scaler.transform(values[ok]))
    verdicts = [("invalid" if not good else MALICIOUS if p >= threshold else BENIGN)
                for p, good in zip(probs, ok)]
    return probs, verdicts


def cmd_predict(cfg: RunConfig):
    if not cfg.predict_input or not cfg.predict_output:
        raise ConfigError("predict needs predict_input and predict_output")
    model, scaler = load_checkpoint(_existing(cfg.path("checkpoint_path")))
    if scaler is None:
        raise CommandError("checkpoint has no scaler; cannot scale raw features")
    with open(_existing(Path(cfg.predict_input)), newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        rows = [r for r in reader if r]
    probs, verdicts = predict_table(model, scaler, rows, header, cfg.threshold)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header + ["probability", "verdict"])
    for row, p, v in zip(rows, probs, verdicts):
        w.writerow(row + ["" if math.isnan(p) else repr(float(p)), v])
    atomic_write(cfg.predict_output, buf.getvalue().encode())
    print(f"wrote {len(rows)} predictions to {cfg.predict_output}")


def cmd_serve(cfg: RunConfig):
    serve(cfg.path("checkpoint_path"), cfg.bind, cfg.threshold)


def _existing(path: Path) -> Path:
    if not Path(path).is_file():
        raise CommandError(f"missing input file: {path}")
    return path


HANDLERS = {
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "serve": cmd_serve,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowids", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="key = value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    parser.add_argument("--seed", type=int, help="seed for balancing, splitting, init and shuffling")
    parser.add_argument("--threads", type=int, help="BLAS/OpenMP threads for numeric kernels")
    parser.add_argument("--precision", type=int, choices=(32, 64))
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _thread_limit(n):
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.set, args.seed, args.threads, args.precision)
    except ConfigError as exc:
        print(f"flowids: {exc}", file=sys.stderr)
        return 2
    print(f"# resolved config for {args.command}")
    print(cfg.to_text(), end="", flush=True)
    try:
        with _thread_limit(cfg.threads):
            HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"flowids: {exc}", file=sys.stderr)
        return 2
    except (CommandError, ServiceError, ValueError, OSError) as exc:
        print(f"flowids: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
