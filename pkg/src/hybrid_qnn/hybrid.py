"""Quantum layer + dense head as one trainable model.

Flat parameter / gradient vector ordering (155 entries for the default model):

    quantum angles (layer-major, see :mod:`hybrid_qnn.qlayer`)   24
    layer 1 weights, row-major (16 x 4)                            64
    layer 1 biases                                                 16
    layer 2 weights, row-major (3 x 16)                            48
    layer 2 biases                                                  3
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import cnn, qlayer
from .cnn import DenseLayer
from .data import Sample, ScalerParams, SplitDataset, stream_rng
from .errors import (
    ConfigurationError,
    DataError,
    ModelShapeError,
    PersistenceError,
    TrainingError,
    VersionError,
)
from .grad import outputs_and_jacobians
from .optim import make_optimizer
from .qlayer import VariationalParams

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
N_CLASSES = 3
HIDDEN = 16
INIT_STREAM = 1
SHUFFLE_STREAM = 2
OPTIMIZERS = ("adam", "sgd")
BATCH_MODES = ("full", "sample")


@dataclass
class HybridModel:
    quantum: VariationalParams
    classical: list[DenseLayer]
    scaler: Optional[ScalerParams] = None
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.classical[0].n_in != self.n_qubits:
            raise ConfigurationError(
                f"first dense layer takes {self.classical[0].n_in} inputs but the circuit has {self.n_qubits} qubits"
            )
        for a, b in zip(self.classical[:-1], self.classical[1:]):
            if a.n_out != b.n_in:
                raise ConfigurationError("dense layer sizes do not chain")

    @property
    def n_qubits(self) -> int:
        return self.quantum.n_qubits

    @property
    def n_layers(self) -> int:
        return self.quantum.n_layers

    @property
    def n_params(self) -> int:
        return self.quantum.n_params + sum(layer.n_params for layer in self.classical)

    def parameter_vector(self) -> np.ndarray:
        parts = [self.quantum.flat]
        for layer in self.classical:
            parts += [layer.weights.reshape(-1), layer.biases]
        return np.concatenate(parts)

    def with_parameters(self, vector) -> "HybridModel":
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.n_params,):
            raise ConfigurationError(f"expected {self.n_params} parameters, got shape {vector.shape}")
        offset = self.quantum.n_params
        quantum = VariationalParams.from_flat(vector[:offset], self.n_layers, self.n_qubits)
        layers = []
        for layer in self.classical:
            w = vector[offset : offset + layer.weights.size].reshape(layer.weights.shape)
            offset += layer.weights.size
            b = vector[offset : offset + layer.n_out]
            offset += layer.n_out
            layers.append(DenseLayer(w.copy(), b.copy()))
        return HybridModel(quantum, layers, self.scaler, self.seed)


def init_model(seed: int, n_qubits: int = 4, n_layers: int = 2, hidden: int = HIDDEN) -> HybridModel:
    """Angles uniform in (-pi, pi); dense weights uniform in +-sqrt(1/fan_in), zero biases."""
    rng = stream_rng(seed, INIT_STREAM)
    quantum = VariationalParams.random(rng, n_layers, n_qubits)
    classical = cnn.init_layers(rng, (n_qubits, hidden, N_CLASSES))
    return HybridModel(quantum, classical, seed=seed)


def _features(samples) -> tuple[np.ndarray, np.ndarray]:
    if len(samples) == 0:
        raise DataError("need at least one sample")
    x = np.stack([s.features for s in samples])
    y = np.array([s.label for s in samples], dtype=np.int64)
    return x, y


def predict(model: HybridModel, scaled_features) -> np.ndarray:
    """Class probabilities for one scaled feature vector, or for each row of a batch."""
    x = np.asarray(scaled_features, dtype=np.float64)
    if x.shape[-1] != model.n_qubits:
        raise ConfigurationError(f"model expects {model.n_qubits} features, got shape {x.shape}")
    q = qlayer.evaluate_batch(np.atleast_2d(x), model.quantum.flat, model.n_layers)
    p = cnn.forward(model.classical, q).probabilities
    return p[0] if x.ndim == 1 else p


def batch_loss_and_gradients(model: HybridModel, x: np.ndarray, y: np.ndarray, loss: str = "cross_entropy"):
    """Mean loss over the batch and its gradient as a flat vector."""
    q_out, jac = outputs_and_jacobians(x, model.quantum)
    trace = cnn.forward(model.classical, q_out)
    value = cnn.loss(trace.probabilities, y, loss)
    layer_grads, input_grad = cnn.backward(trace, y, loss)
    # chain d(loss)/d<Z> through the quantum jacobian, summed over samples
    quantum_grad = np.einsum("bn,bnp->p", input_grad, jac)
    parts = [quantum_grad]
    for dw, db in layer_grads:
        parts += [dw.reshape(-1), db]
    return value, np.concatenate(parts)


def loss_and_gradients(model: HybridModel, sample: Sample, loss: str = "cross_entropy"):
    """Loss of one scaled sample and the full gradient vector."""
    return batch_loss_and_gradients(model, sample.features[None, :], np.array([sample.label]), loss)


def evaluate_arrays(model: HybridModel, x: np.ndarray, y: np.ndarray, loss: str = "cross_entropy"):
    if len(y) == 0:
        raise DataError("cannot evaluate on an empty sample list")
    p = predict(model, x)
    pred = np.argmax(p, axis=1)  # ties resolve to the lowest class index
    return cnn.loss(p, y, loss), 100.0 * float(np.mean(pred == y))


def evaluate(model: HybridModel, samples, loss: str = "cross_entropy") -> tuple[float, float]:
    """Mean loss and accuracy in percent over scaled samples."""
    x, y = _features(samples)
    return evaluate_arrays(model, x, y, loss)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 0.01
    optimizer: str = "adam"
    loss: str = "cross_entropy"
    seed: int = 42
    batch_mode: str = "sample"

    def __post_init__(self) -> None:
        if not isinstance(self.epochs, (int, np.integer)) or self.epochs < 1:
            raise ConfigurationError(f"epochs must be a positive integer, got {self.epochs!r}")
        # zero is accepted as a frozen-model run
        if not np.isfinite(self.learning_rate) or self.learning_rate < 0:
            raise ConfigurationError(f"learning_rate must be finite and non-negative, got {self.learning_rate}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.loss not in cnn.LOSSES:
            raise ConfigurationError(f"loss must be one of {cnn.LOSSES}, got {self.loss!r}")
        if self.batch_mode not in BATCH_MODES:
            raise ConfigurationError(f"batch_mode must be one of {BATCH_MODES}, got {self.batch_mode!r}")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    test_loss: float
    test_accuracy: float
    train_loss: float


def _check_finite(value: float, params: np.ndarray, epoch: int) -> None:
    if not np.isfinite(value) or not np.all(np.isfinite(params)):
        norm = float(np.linalg.norm(params))
        raise TrainingError(f"non-finite loss at epoch {epoch} (parameter norm {norm:.6g})")


def train(
    model: HybridModel,
    data: SplitDataset,
    config: TrainConfig,
    on_epoch: Optional[Callable[[EpochMetrics], None]] = None,
) -> tuple[HybridModel, list[EpochMetrics]]:
    """Optimise every parameter end to end; evaluate on the test split after each epoch.

    ``full`` batch mode takes one step per epoch on the mean training gradient.
    ``sample`` mode takes one step per training sample in a freshly shuffled order.
    """
    x_train, y_train = data.arrays("train")
    x_test, y_test = data.arrays("test")
    if len(y_train) == 0 or len(y_test) == 0:
        raise DataError("training and test partitions must be non-empty")
    optimizer = make_optimizer(config.optimizer, config.learning_rate)
    shuffle_rng = stream_rng(config.seed, SHUFFLE_STREAM)
    theta = model.parameter_vector()
    history = []
    for epoch in range(1, config.epochs + 1):
        if config.batch_mode == "full":
            value, grad = batch_loss_and_gradients(model, x_train, y_train, config.loss)
            _check_finite(value, theta, epoch)
            theta = optimizer.step(theta, grad)
            _check_finite(value, theta, epoch)
            model = model.with_parameters(theta)
        else:
            for i in shuffle_rng.permutation(len(y_train)):
                value, grad = batch_loss_and_gradients(model, x_train[i : i + 1], y_train[i : i + 1], config.loss)
                _check_finite(value, theta, epoch)
                theta = optimizer.step(theta, grad)
                _check_finite(value, theta, epoch)
                model = model.with_parameters(theta)
        train_loss, _ = evaluate_arrays(model, x_train, y_train, config.loss)
        test_loss, accuracy = evaluate_arrays(model, x_test, y_test, config.loss)
        _check_finite(test_loss + train_loss, theta, epoch)
        row = EpochMetrics(epoch, test_loss, accuracy, train_loss)
        history.append(row)
        log.debug("epoch %d: train_loss=%.6f test_loss=%.6f accuracy=%.2f", epoch, train_loss, test_loss, accuracy)
        if on_epoch is not None:
            on_epoch(row)
    model = replace(model, scaler=data.scaler, seed=config.seed)
    return model, history


def format_metrics_csv(history: list[EpochMetrics], include_train_loss: bool = False) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["epoch", "test_loss", "test_accuracy"] + (["train_loss"] if include_train_loss else [])
    writer.writerow(header)
    for m in history:
        row = [m.epoch, f"{m.test_loss:.4f}", f"{m.test_accuracy:.2f}"]
        if include_train_loss:
            row.append(f"{m.train_loss:.4f}")
        writer.writerow(row)
    return buf.getvalue()


def write_metrics_csv(history: list[EpochMetrics], path, include_train_loss: bool = False) -> None:
    Path(path).write_text(format_metrics_csv(history, include_train_loss), encoding="utf-8")


# -- persistence ---------------------------------------------------------------


def model_to_dict(model: HybridModel) -> dict:
    if len(model.classical) != 2:
        raise PersistenceError("the model document stores exactly two dense layers")
    l1, l2 = model.classical
    doc = {
        "format_version": FORMAT_VERSION,
        "n_qubits": model.n_qubits,
        "n_layers": model.n_layers,
        "quantum_angles": model.quantum.flat.tolist(),
        "layer1_weights": l1.weights.tolist(),
        "layer1_biases": l1.biases.tolist(),
        "layer2_weights": l2.weights.tolist(),
        "layer2_biases": l2.biases.tolist(),
        "scaler": None,
        "seed": model.seed,
    }
    if model.scaler is not None:
        doc["scaler"] = {"min": model.scaler.minimum.tolist(), "max": model.scaler.maximum.tolist()}
    return doc


def _array(doc: dict, key: str, shape: tuple[int, ...]) -> np.ndarray:
    if key not in doc:
        raise PersistenceError(f"model document lacks {key!r}")
    try:
        arr = np.array(doc[key], dtype=np.float64)
    except (TypeError, ValueError):
        raise PersistenceError(f"{key!r} is not a numeric array") from None
    if arr.shape != shape:
        raise ModelShapeError(f"{key!r} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise PersistenceError(f"{key!r} contains non-finite values")
    return arr


def model_from_dict(doc) -> HybridModel:
    if not isinstance(doc, dict):
        raise PersistenceError("model document must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported model format_version {version!r} (expected {FORMAT_VERSION})")
    n_qubits, n_layers = doc.get("n_qubits"), doc.get("n_layers")
    if not isinstance(n_qubits, int) or not isinstance(n_layers, int) or n_qubits < 1 or n_layers < 0:
        raise PersistenceError("n_qubits and n_layers must be non-negative integers")
    angles = _array(doc, "quantum_angles", (n_layers * n_qubits * 3,))
    biases = doc.get("layer1_biases")
    hidden = len(biases) if isinstance(biases, list) else -1
    w1 = _array(doc, "layer1_weights", (hidden, n_qubits))
    b1 = _array(doc, "layer1_biases", (hidden,))
    w2 = _array(doc, "layer2_weights", (N_CLASSES, hidden))
    b2 = _array(doc, "layer2_biases", (N_CLASSES,))
    scaler = None
    if doc.get("scaler") is not None:
        s = doc["scaler"]
        if not isinstance(s, dict):
            raise PersistenceError("'scaler' must be an object with 'min' and 'max'")
        lo = _array(s, "min", (n_qubits,))
        hi = _array(s, "max", (n_qubits,))
        try:
            scaler = ScalerParams(lo, hi)
        except DataError as exc:
            raise PersistenceError(f"invalid scaler: {exc}") from None
    seed = doc.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise PersistenceError("'seed' must be an integer or null")
    return HybridModel(
        VariationalParams.from_flat(angles, n_layers, n_qubits),
        [DenseLayer(w1, b1), DenseLayer(w2, b2)],
        scaler,
        seed,
    )


def save_model(model: HybridModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")


def load_model(path) -> HybridModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise PersistenceError(f"cannot read model file {path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PersistenceError(f"model file {path} is not valid JSON: {exc}") from None
    return model_from_dict(doc)
