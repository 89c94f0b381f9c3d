"""Command-line entry point: ``hybrid-qnn {train,eval,draw-circuit}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import hybrid, qlayer
from .errors import ConfigurationError, HybridQNNError


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not np.isfinite(value) or value <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybrid-qnn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train on Iris and write metrics + model files")
    train.add_argument("--data", required=True, help="Iris CSV path")
    train.add_argument("--seed", type=int, default=42)
    train.add_argument("--epochs", type=_positive_int, default=20)
    train.add_argument("--lr", "--learning-rate", dest="learning_rate", type=_positive_float, default=0.01)
    train.add_argument("--optimizer", choices=hybrid.OPTIMIZERS, default="adam")
    train.add_argument("--loss", choices=("cross_entropy", "mse"), default="cross_entropy")
    train.add_argument("--layers", type=_non_negative_int, default=2)
    train.add_argument("--test-fraction", type=float, default=0.2)
    train.add_argument("--batch-mode", choices=hybrid.BATCH_MODES, default="sample")
    train.add_argument("--metrics-out", default="metrics.csv")
    train.add_argument("--model-out", default="model.json")
    train.add_argument("--train-loss-column", action="store_true", help="add a train_loss column to the metrics CSV")

    ev = sub.add_parser("eval", help="evaluate a saved model on the seeded test split")
    ev.add_argument("--data", required=True)
    ev.add_argument("--model", "--model-in", dest="model_in", required=True)
    ev.add_argument("--seed", type=int, default=None, help="split seed (default: the seed stored in the model)")
    ev.add_argument("--test-fraction", type=float, default=0.2)
    ev.add_argument("--loss", choices=("cross_entropy", "mse"), default="cross_entropy")

    draw = sub.add_parser("draw-circuit", help="print the quantum circuit as ASCII art")
    draw.add_argument("--layers", type=_non_negative_int, default=2)
    draw.add_argument("--qubits", type=_positive_int, default=4)
    return parser


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _format_result(loss: float, accuracy: float) -> str:
    return f"test_loss={loss:.4f} accuracy={accuracy:.2f}%"


def cmd_train(args) -> int:
    effective = {
        "command": "train",
        "data": args.data,
        "seed": args.seed,
        "epochs": args.epochs,
        "learning_rate": args.learning_rate,
        "optimizer": args.optimizer,
        "loss": args.loss,
        "n_layers": args.layers,
        "n_qubits": data_mod.N_FEATURES,
        "test_fraction": args.test_fraction,
        "batch_mode": args.batch_mode,
        "metrics_out": args.metrics_out,
        "model_out": args.model_out,
    }
    print("config: " + json.dumps(effective, sort_keys=True), flush=True)
    config = hybrid.TrainConfig(
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        optimizer=args.optimizer,
        loss=args.loss,
        seed=args.seed,
        batch_mode=args.batch_mode,
    )
    samples = data_mod.load_iris(args.data)
    split = data_mod.stratified_split(samples, args.test_fraction, args.seed)
    print(f"split: train={len(split.train)} test={len(split.test)}", flush=True)
    model = hybrid.init_model(args.seed, n_qubits=data_mod.N_FEATURES, n_layers=args.layers)

    def report(m: hybrid.EpochMetrics) -> None:
        print(f"epoch {m.epoch}: {_format_result(m.test_loss, m.test_accuracy)}", flush=True)

    model, history = hybrid.train(model, split, config, on_epoch=report)
    _atomic_write(args.metrics_out, hybrid.format_metrics_csv(history, args.train_loss_column))
    _atomic_write(args.model_out, json.dumps(hybrid.model_to_dict(model), indent=2) + "\n")
    print(f"wrote {args.metrics_out} and {args.model_out}")
    return 0


def cmd_eval(args) -> int:
    model = hybrid.load_model(args.model_in)
    if model.scaler is None:
        raise ConfigurationError(f"{args.model_in} carries no scaler; cannot scale the data consistently")
    if model.n_qubits != data_mod.N_FEATURES:
        raise ConfigurationError(
            f"model has {model.n_qubits} qubits but the data has {data_mod.N_FEATURES} features"
        )
    seed = args.seed if args.seed is not None else model.seed
    if seed is None:
        raise ConfigurationError("no --seed given and the model stores none")
    samples = data_mod.load_iris(args.data)
    split = data_mod.stratified_split(samples, args.test_fraction, seed)
    # the stored scaler, never one refitted here
    x, y = data_mod.scaled_arrays(model.scaler, split.test)
    loss, accuracy = hybrid.evaluate_arrays(model, x, y, args.loss)
    print(_format_result(loss, accuracy))
    return 0


def cmd_draw_circuit(args) -> int:
    params = qlayer.VariationalParams.zeros(args.layers, args.qubits)
    circuit = qlayer.build_circuit(np.zeros(args.qubits), params)
    sys.stdout.write(qlayer.render_ascii(circuit))
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "draw-circuit": cmd_draw_circuit}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (HybridQNNError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
