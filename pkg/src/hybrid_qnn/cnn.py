"""Dense classifier head: ReLU hidden layers, softmax output, exact backprop.

Inputs may be a single vector ``(n_in,)`` or a batch ``(B, n_in)``. For a batch
the loss is the mean over rows and :func:`backward` returns gradients of that
mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError

PROB_FLOOR = 1e-12
LOSSES = ("cross_entropy", "mse")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)

    def __post_init__(self) -> None:
        self.weights = np.array(self.weights, dtype=np.float64)
        self.biases = np.array(self.biases, dtype=np.float64)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"layer weights {self.weights.shape} and biases {self.biases.shape} do not match"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise DataError("layer parameters must be finite")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    @property
    def n_params(self) -> int:
        return self.weights.size + self.biases.size

    @classmethod
    def initialize(cls, rng: np.random.Generator, n_in: int, n_out: int) -> "DenseLayer":
        """Weights uniform in +-sqrt(1/n_in), zero biases."""
        bound = np.sqrt(1.0 / n_in)
        return cls(rng.uniform(-bound, bound, size=(n_out, n_in)), np.zeros(n_out))

    @classmethod
    def zeros(cls, n_in: int, n_out: int) -> "DenseLayer":
        return cls(np.zeros((n_out, n_in)), np.zeros(n_out))


def init_layers(rng: np.random.Generator, sizes=(4, 16, 3)) -> list[DenseLayer]:
    return [DenseLayer.initialize(rng, a, b) for a, b in zip(sizes[:-1], sizes[1:])]


@dataclass
class ForwardTrace:
    input: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]  # activations[-1] is the softmax output
    layers: list[DenseLayer]

    @property
    def probabilities(self) -> np.ndarray:
        return self.activations[-1]


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def forward(layers: list[DenseLayer], x) -> ForwardTrace:
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataError("network input must be finite")
    if x.shape[-1] != layers[0].n_in:
        raise ShapeError(f"network expects {layers[0].n_in} inputs, got shape {x.shape}")
    pre, act = [], []
    h = x
    for i, layer in enumerate(layers):
        z = h @ layer.weights.T + layer.biases
        h = softmax(z) if i == len(layers) - 1 else relu(z)
        pre.append(z)
        act.append(h)
    return ForwardTrace(x, pre, act, list(layers))


def _labels(labels, n_classes: int) -> np.ndarray:
    y = np.asarray(labels)
    if not np.issubdtype(y.dtype, np.integer) or np.any((y < 0) | (y >= n_classes)):
        raise DataError(f"labels must be integers in [0, {n_classes}), got {labels!r}")
    return y


def one_hot(labels, n_classes: int) -> np.ndarray:
    y = _labels(labels, n_classes)
    return np.eye(n_classes)[y]


def cross_entropy(probabilities, label) -> float | np.ndarray:
    """``-log p[label]`` with ``p`` floored at 1e-12; vectorised over a batch."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = _labels(label, p.shape[-1])
    picked = np.take_along_axis(np.atleast_2d(p), np.atleast_1d(y)[:, None], axis=1)[:, 0]
    losses = -np.log(np.maximum(picked, PROB_FLOOR))
    return float(losses[0]) if p.ndim == 1 else losses


def mse(probabilities, label) -> float | np.ndarray:
    """Mean over classes of ``(p - onehot)**2``."""
    p = np.asarray(probabilities, dtype=np.float64)
    losses = np.mean((np.atleast_2d(p) - np.atleast_2d(one_hot(label, p.shape[-1]))) ** 2, axis=1)
    return float(losses[0]) if p.ndim == 1 else losses


def loss(probabilities, labels, kind: str = "cross_entropy") -> float:
    """Mean loss over the rows of ``probabilities``."""
    if kind == "cross_entropy":
        return float(np.mean(cross_entropy(probabilities, labels)))
    if kind == "mse":
        return float(np.mean(mse(probabilities, labels)))
    raise DataError(f"unknown loss {kind!r}; expected one of {LOSSES}")


def backward(trace: ForwardTrace, label, kind: str = "cross_entropy"):
    """Gradients of the (mean) loss.

    Returns ``(layer_grads, input_grad)`` where ``layer_grads`` is a list of
    ``(dW, db)`` per layer and ``input_grad`` has the shape of ``trace.input``.
    """
    single = trace.input.ndim == 1
    p = np.atleast_2d(trace.probabilities)
    y = np.atleast_2d(one_hot(label, p.shape[-1]))
    batch = p.shape[0]
    if y.shape[0] != batch:
        raise ShapeError(f"{y.shape[0]} labels for a batch of {batch}")

    if kind == "cross_entropy":
        delta = p - y
    elif kind == "mse":
        g = 2.0 * (p - y) / p.shape[1]
        delta = p * (g - np.sum(g * p, axis=1, keepdims=True))
    else:
        raise DataError(f"unknown loss {kind!r}; expected one of {LOSSES}")
    delta = delta / batch

    inputs = [np.atleast_2d(trace.input)] + [np.atleast_2d(a) for a in trace.activations[:-1]]
    grads = [None] * len(trace.layers)
    for i in range(len(trace.layers) - 1, -1, -1):
        layer = trace.layers[i]
        grads[i] = (delta.T @ inputs[i], delta.sum(axis=0))
        upstream = delta @ layer.weights
        if i > 0:
            # ReLU subgradient at 0 is 0
            delta = upstream * (np.atleast_2d(trace.pre_activations[i - 1]) > 0.0)
    return grads, (upstream[0] if single else upstream)
