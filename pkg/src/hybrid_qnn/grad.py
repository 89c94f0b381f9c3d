"""Jacobians of the quantum layer outputs with respect to its trainable angles."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, ShapeError
from .qlayer import VariationalParams, embed_batch, evaluate_batch, run_variational_batch, validate_features
from .sim import expectation_z_batch

SHIFT = np.pi / 2


def _shifted_rows(flat: np.ndarray, delta: float) -> np.ndarray:
    """Rows ``flat + delta * e_p`` for every p, followed by rows ``flat - delta * e_p``."""
    eye = np.eye(flat.size)
    return np.concatenate([flat + delta * eye, flat - delta * eye])


def parameter_shift_jacobian(features, params: VariationalParams, **circuit_options) -> np.ndarray:
    """Exact ``d<Z_o>/d theta_p`` as an ``(n_qubits, n_params)`` array.

    Uses ``(f(theta + pi/2) - f(theta - pi/2)) / 2``, exact for Pauli rotations.
    All ``2 * n_params`` shifted circuits run as one batch, each yielding every
    output at once.
    """
    x = validate_features(features, params)
    n_params = params.n_params
    if n_params == 0:
        return np.zeros((params.n_qubits, 0))
    out = evaluate_batch(x, _shifted_rows(params.flat, SHIFT), params.n_layers, **circuit_options)
    return ((out[:n_params] - out[n_params:]) / 2.0).T


def finite_difference_jacobian(features, params: VariationalParams, h: float = 1e-5, **circuit_options) -> np.ndarray:
    """Central-difference jacobian; a verification oracle for :func:`parameter_shift_jacobian`."""
    if not 0.0 < h <= 1e-2:
        raise ConfigurationError(f"finite-difference step must lie in (0, 1e-2], got {h}")
    x = validate_features(features, params)
    n_params = params.n_params
    if n_params == 0:
        return np.zeros((params.n_qubits, 0))
    out = evaluate_batch(x, _shifted_rows(params.flat, h), params.n_layers, **circuit_options)
    return ((out[:n_params] - out[n_params:]) / (2.0 * h)).T


def outputs_and_jacobians(features: np.ndarray, params: VariationalParams, *, embedding_order="xyz", entanglement="ring"):
    """Layer outputs and parameter-shift jacobians for a batch of samples.

    Returns ``(outputs, jacobians)`` with shapes ``(B, n)`` and ``(B, n, n_params)``.
    Each sample is embedded once; its unshifted and ``2 * n_params`` shifted
    copies then run through the trainable layers together.
    """
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    batch, n = features.shape
    if n != params.n_qubits:
        raise ShapeError(f"expected {params.n_qubits} features per row, got {n}")
    n_params = params.n_params
    rows = np.concatenate([params.flat[None, :], _shifted_rows(params.flat, SHIFT)])
    per_sample = rows.shape[0]
    states = np.repeat(embed_batch(features, embedding_order), per_sample, axis=0)
    states = run_variational_batch(states, np.tile(rows, (batch, 1)), params.n_layers, entanglement)
    out = expectation_z_batch(states, n).reshape(batch, per_sample, n)
    outputs = out[:, 0, :]
    plus = out[:, 1 : 1 + n_params, :]
    minus = out[:, 1 + n_params :, :]
    jacobians = np.transpose((plus - minus) / 2.0, (0, 2, 1))
    return outputs, jacobians
