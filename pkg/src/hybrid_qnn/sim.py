"""Pure-numpy statevector simulation over the gate set {RX, RY, RZ, CZ}.

Amplitude indexing: qubit ``k`` is bit ``k`` of the amplitude index, so qubit 0
is the least-significant bit. ``|q3 q2 q1 q0>`` with ``q0 = 1`` lives at index 1.

Two layers of API are provided. :class:`StateVector`, :func:`apply_gate` and
:func:`expectation_z` work on one immutable state. The ``*_batch`` kernels work
on a ``(batch, 2**n)`` array and accept one rotation angle per batch row, which
is what the quantum layer uses to run every parameter-shifted copy of a circuit
in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ConfigurationError

MAX_QUBITS = 20
ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATIONS + ("CZ",)


@dataclass(frozen=True)
class StateVector:
    """A pure state of ``n_qubits`` qubits.

    ``amplitudes`` is stored as a read-only complex128 copy.
    """

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        _check_n_qubits(self.n_qubits)
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != 1 << self.n_qubits:
            raise ConfigurationError(
                f"expected {1 << self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got {amps.shape[0]}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm_squared(self) -> float:
        return float(np.sum(self.probabilities))


@dataclass(frozen=True)
class GateOp:
    """One gate. Rotations use ``target`` and ``angle``; CZ uses ``control`` and ``target``."""

    kind: str
    target: int
    control: Optional[int] = None
    angle: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in GATE_KINDS:
            raise ConfigurationError(f"unknown gate kind {self.kind!r}")
        if self.target < 0:
            raise IndexError(f"negative target qubit {self.target}")
        if self.kind == "CZ":
            if self.control is None:
                raise ConfigurationError("CZ requires a control qubit")
            if self.control < 0:
                raise IndexError(f"negative control qubit {self.control}")
            if self.control == self.target:
                raise ConfigurationError("CZ control and target must differ")
        else:
            if self.angle is None or not np.isfinite(self.angle):
                raise ConfigurationError(f"{self.kind} needs a finite angle, got {self.angle}")

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATIONS

    def qubits(self) -> tuple[int, ...]:
        if self.kind == "CZ":
            return (self.control, self.target)
        return (self.target,)


def _check_n_qubits(n_qubits: int) -> None:
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")


def _check_qubit(qubit: int, n_qubits: int) -> None:
    if not 0 <= qubit < n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {n_qubits} qubits")


def rotation_matrices(kind: str, angles) -> np.ndarray:
    """Return the stacked 2x2 matrices of ``kind`` for every angle, shape ``(len(angles), 2, 2)``.

    RX(t) = [[c, -i s], [-i s, c]], RY(t) = [[c, -s], [s, c]],
    RZ(t) = diag(exp(-i t/2), exp(i t/2)), with c = cos(t/2), s = sin(t/2).
    """
    theta = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    half = 0.5 * theta
    c = np.cos(half)
    s = np.sin(half)
    out = np.zeros(theta.shape + (2, 2), dtype=np.complex128)
    if kind == "RX":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
    elif kind == "RY":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
    elif kind == "RZ":
        out[..., 0, 0] = np.exp(-1j * half)
        out[..., 1, 1] = np.exp(1j * half)
    else:
        raise ConfigurationError(f"{kind!r} is not a rotation")
    return out


@lru_cache(maxsize=None)
def _cz_signs(n_qubits: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(1 << n_qubits)
    both = ((idx >> control) & 1) & ((idx >> target) & 1)
    signs = np.where(both == 1, -1.0, 1.0)
    signs.setflags(write=False)
    return signs


@lru_cache(maxsize=None)
def _z_signs(n_qubits: int) -> np.ndarray:
    # row q holds +1/-1 per basis index according to bit q
    idx = np.arange(1 << n_qubits)
    bits = (idx[None, :] >> np.arange(n_qubits)[:, None]) & 1
    signs = 1.0 - 2.0 * bits
    signs.setflags(write=False)
    return signs


def zero_states(batch: int, n_qubits: int) -> np.ndarray:
    """``batch`` copies of ``|0...0>`` as a ``(batch, 2**n)`` array."""
    _check_n_qubits(n_qubits)
    out = np.zeros((batch, 1 << n_qubits), dtype=np.complex128)
    out[:, 0] = 1.0
    return out


def n_qubits_of(states: np.ndarray) -> int:
    dim = states.shape[-1]
    n = dim.bit_length() - 1
    if dim != 1 << n:
        raise ConfigurationError(f"state dimension {dim} is not a power of two")
    return n


def product_state_batch(single_qubit_states) -> np.ndarray:
    """Tensor product of per-qubit states; element ``q`` is a ``(batch, 2)`` array for qubit ``q``."""
    _check_n_qubits(len(single_qubit_states))
    out = np.asarray(single_qubit_states[-1], dtype=np.complex128)
    for v in reversed(single_qubit_states[:-1]):
        # lower qubits take the faster-varying index bits
        out = (out[:, :, None] * np.asarray(v)[:, None, :]).reshape(out.shape[0], -1)
    return out


def apply_unitary_batch(states: np.ndarray, n_qubits: int, target: int, mats: np.ndarray) -> np.ndarray:
    """Apply a 2x2 unitary on ``target`` to each row; ``mats`` is ``(1, 2, 2)`` or ``(batch, 2, 2)``.

    Returns a new array.
    """
    _check_qubit(target, n_qubits)
    batch = states.shape[0]
    if mats.shape[0] not in (1, batch):
        raise ConfigurationError(f"got {mats.shape[0]} matrices for a batch of {batch}")
    # index = high * 2**(t+1) + bit * 2**t + low
    view = states.reshape(batch, 1 << (n_qubits - 1 - target), 2, 1 << target)
    a0 = view[:, :, 0, :]
    a1 = view[:, :, 1, :]
    m = mats[:, :, :, None, None]
    out = np.empty_like(view)
    out[:, :, 0, :] = m[:, 0, 0] * a0 + m[:, 0, 1] * a1
    out[:, :, 1, :] = m[:, 1, 0] * a0 + m[:, 1, 1] * a1
    return out.reshape(batch, -1)


def apply_rotation_batch(states: np.ndarray, n_qubits: int, kind: str, target: int, angles) -> np.ndarray:
    """Apply a rotation on ``target`` to each row of ``states``.

    ``angles`` is a scalar (shared by all rows) or one angle per row.
    Returns a new array.
    """
    return apply_unitary_batch(states, n_qubits, target, rotation_matrices(kind, angles))


def cz_diagonal(n_qubits: int, pairs) -> np.ndarray:
    """Diagonal (as a vector of +-1) of the product of CZ gates over ``pairs``."""
    diag = np.ones(1 << n_qubits)
    for control, target in pairs:
        _check_qubit(control, n_qubits)
        _check_qubit(target, n_qubits)
        diag = diag * _cz_signs(n_qubits, control, target)
    return diag


def apply_cz_batch(states: np.ndarray, n_qubits: int, control: int, target: int) -> np.ndarray:
    _check_qubit(control, n_qubits)
    _check_qubit(target, n_qubits)
    if control == target:
        raise ConfigurationError("CZ control and target must differ")
    return states * _cz_signs(n_qubits, control, target)


def expectation_z_batch(states: np.ndarray, n_qubits: int) -> np.ndarray:
    """Pauli-Z expectation of every qubit for every row; shape ``(batch, n_qubits)``."""
    probs = states.real**2 + states.imag**2
    return probs @ _z_signs(n_qubits).T


def new_zero_state(n_qubits: int) -> StateVector:
    _check_n_qubits(n_qubits)
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    """Return a new state with ``gate`` applied; ``state`` is left untouched."""
    n = state.n_qubits
    for q in gate.qubits():
        _check_qubit(q, n)
    rows = state.amplitudes[None, :]
    if gate.kind == "CZ":
        out = apply_cz_batch(rows, n, gate.control, gate.target)
    else:
        out = apply_rotation_batch(rows, n, gate.kind, gate.target, gate.angle)
    return StateVector(n, out[0])


def run_gates(gates, n_qubits: int, state: Optional[StateVector] = None) -> StateVector:
    """Apply ``gates`` in order, starting from ``state`` or ``|0...0>``."""
    current = new_zero_state(n_qubits) if state is None else state
    for gate in gates:
        current = apply_gate(current, gate)
    return current


def expectation_z(state: StateVector, qubit: int) -> float:
    _check_qubit(qubit, state.n_qubits)
    value = float(state.probabilities @ _z_signs(state.n_qubits)[qubit])
    # rounding can push |<Z>| a few ulps past 1
    return min(1.0, max(-1.0, value))
