"""The variational quantum layer: angle embedding, rotation layers, CZ ring, Pauli-Z readout.

Circuit layout for ``n`` qubits and ``L`` layers::

    embedding   RX(x_k) RY(x_k) RZ(x_k) on every qubit k
    L times     RX(w) RY(w) RZ(w) on every qubit, then CZ(0,1) CZ(1,2) ... CZ(n-1,0)

Trainable angles are stored as an ``(L, n, 3)`` array whose flat, layer-major
ordering ``p = (layer * n + qubit) * 3 + axis`` is used everywhere a parameter
index appears (jacobian columns, gradient vectors, model files).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from . import sim
from .errors import ConfigurationError, DataError, ShapeError
from .sim import GateOp

EMBEDDING_ORDERS = {
    # RX acts first: the product R_z R_y R_x |0>
    "xyz": ("RX", "RY", "RZ"),
    # RZ acts first: the expanded R_x R_y R_z |0> form
    "zyx": ("RZ", "RY", "RX"),
}
ENTANGLEMENTS = ("ring", "chain", "none")
VARIATIONAL_ORDER = ("RX", "RY", "RZ")


@dataclass(frozen=True)
class EmbeddingSpec:
    n_features: int
    rotation_order: tuple[str, ...] = EMBEDDING_ORDERS["xyz"]

    def __post_init__(self) -> None:
        if self.n_features < 1:
            raise ConfigurationError("n_features must be positive")
        if sorted(self.rotation_order) != sorted(sim.ROTATIONS):
            raise ConfigurationError(f"rotation_order must be a permutation of {sim.ROTATIONS}")


@dataclass(frozen=True)
class VariationalParams:
    """Trainable rotation angles, shape ``(n_layers, n_qubits, 3)`` in RX, RY, RZ order."""

    angles: np.ndarray

    def __post_init__(self) -> None:
        angles = np.array(self.angles, dtype=np.float64)
        if angles.ndim != 3 or angles.shape[2] != 3:
            raise ShapeError(f"angles must have shape (n_layers, n_qubits, 3), got {angles.shape}")
        if angles.shape[1] < 1:
            raise ShapeError("angles must cover at least one qubit")
        if not np.all(np.isfinite(angles)):
            raise ConfigurationError("variational angles must be finite")
        angles.setflags(write=False)
        object.__setattr__(self, "angles", angles)

    @property
    def n_layers(self) -> int:
        return self.angles.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.angles.shape[1]

    @property
    def n_params(self) -> int:
        return self.angles.size

    @property
    def flat(self) -> np.ndarray:
        return self.angles.reshape(-1)

    @classmethod
    def zeros(cls, n_layers: int, n_qubits: int) -> "VariationalParams":
        return cls(np.zeros((n_layers, n_qubits, 3)))

    @classmethod
    def from_flat(cls, flat, n_layers: int, n_qubits: int) -> "VariationalParams":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != n_layers * n_qubits * 3:
            raise ShapeError(
                f"expected {n_layers * n_qubits * 3} angles for {n_layers} layers x {n_qubits} qubits, "
                f"got {flat.size}"
            )
        return cls(flat.reshape(n_layers, n_qubits, 3))

    @classmethod
    def random(cls, rng: np.random.Generator, n_layers: int, n_qubits: int) -> "VariationalParams":
        return cls(rng.uniform(-np.pi, np.pi, size=(n_layers, n_qubits, 3)))


class _Slot(NamedTuple):
    kind: str
    target: int
    control: Optional[int]
    source: Optional[str]  # "feature", "param" or None for CZ
    index: int  # feature index or flat parameter index


@dataclass(frozen=True)
class QuantumCircuit:
    """A concrete gate list plus the positions holding each trainable angle."""

    n_qubits: int
    gates: tuple[GateOp, ...]
    param_slots: dict[int, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for positions in self.param_slots.values():
            for pos in positions:
                if not self.gates[pos].is_rotation:
                    raise ConfigurationError(f"parameter slot {pos} is not a rotation gate")
        for gate in self.gates:
            for q in gate.qubits():
                if q >= self.n_qubits:
                    raise IndexError(f"gate {gate} addresses qubit {q} of {self.n_qubits}")

    def parameter_at(self) -> dict[int, int]:
        """Map gate position -> parameter index."""
        return {pos: p for p, positions in self.param_slots.items() for pos in positions}


def entangling_pairs(n_qubits: int, entanglement: str = "ring") -> list[tuple[int, int]]:
    """CZ pairs for one entanglement layer.

    The ring closure ``(n-1, 0)`` is only added for ``n > 2``; with two qubits it
    would repeat ``(0, 1)`` and cancel it.
    """
    if entanglement not in ENTANGLEMENTS:
        raise ConfigurationError(f"entanglement must be one of {ENTANGLEMENTS}, got {entanglement!r}")
    if entanglement == "none":
        return []
    pairs = [(i, i + 1) for i in range(n_qubits - 1)]
    if entanglement == "ring" and n_qubits > 2:
        pairs.append((n_qubits - 1, 0))
    return pairs


@lru_cache(maxsize=None)
def _template(n_qubits: int, n_layers: int, embedding_order: str, entanglement: str) -> tuple[_Slot, ...]:
    if embedding_order not in EMBEDDING_ORDERS:
        raise ConfigurationError(f"embedding_order must be one of {sorted(EMBEDDING_ORDERS)}")
    if n_layers < 0:
        raise ConfigurationError("n_layers must be non-negative")
    slots = []
    for q in range(n_qubits):
        for kind in EMBEDDING_ORDERS[embedding_order]:
            slots.append(_Slot(kind, q, None, "feature", q))
    pairs = entangling_pairs(n_qubits, entanglement)
    for layer in range(n_layers):
        for q in range(n_qubits):
            for axis, kind in enumerate(VARIATIONAL_ORDER):
                slots.append(_Slot(kind, q, None, "param", (layer * n_qubits + q) * 3 + axis))
        for control, target in pairs:
            slots.append(_Slot("CZ", target, control, None, -1))
    return tuple(slots)


def validate_features(features, params: VariationalParams) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != params.n_qubits:
        raise ShapeError(f"expected {params.n_qubits} features, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("features must be finite")
    return x


def build_circuit(
    features,
    params: VariationalParams,
    *,
    embedding_order: str = "xyz",
    entanglement: str = "ring",
) -> QuantumCircuit:
    x = validate_features(features, params)
    flat = params.flat
    gates = []
    slots: dict[int, list[int]] = {}
    for pos, slot in enumerate(_template(params.n_qubits, params.n_layers, embedding_order, entanglement)):
        if slot.source is None:
            gates.append(GateOp("CZ", slot.target, control=slot.control))
            continue
        angle = x[slot.index] if slot.source == "feature" else flat[slot.index]
        gates.append(GateOp(slot.kind, slot.target, angle=float(angle)))
        if slot.source == "param":
            slots.setdefault(slot.index, []).append(pos)
    return QuantumCircuit(params.n_qubits, tuple(gates), {p: tuple(v) for p, v in slots.items()})


def _check_batch(features, param_rows, n_layers: int):
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    param_rows = np.atleast_2d(np.asarray(param_rows, dtype=np.float64))
    n_qubits = features.shape[1]
    if param_rows.shape[1] != n_layers * n_qubits * 3:
        raise ShapeError(f"expected {n_layers * n_qubits * 3} parameters per row, got {param_rows.shape[1]}")
    batch = max(features.shape[0], param_rows.shape[0])
    for name, arr in (("features", features), ("parameters", param_rows)):
        if arr.shape[0] not in (1, batch):
            raise ShapeError(f"{name} has {arr.shape[0]} rows, expected 1 or {batch}")
    return features, param_rows


def embed_batch(features: np.ndarray, embedding_order: str = "xyz") -> np.ndarray:
    """Embedded product states for each row of ``features``, shape ``(batch, 2**n)``."""
    if embedding_order not in EMBEDDING_ORDERS:
        raise ConfigurationError(f"embedding_order must be one of {sorted(EMBEDDING_ORDERS)}")
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    columns = []
    for q in range(features.shape[1]):
        mats = None
        for kind in EMBEDDING_ORDERS[embedding_order]:
            r = sim.rotation_matrices(kind, features[:, q])
            mats = r if mats is None else r @ mats
        columns.append(mats[:, :, 0])  # U |0>
    return sim.product_state_batch(columns)


def run_variational_batch(
    states: np.ndarray, param_rows: np.ndarray, n_layers: int, entanglement: str = "ring"
) -> np.ndarray:
    """Apply the trainable layers to embedded ``states``; returns new states."""
    n_qubits = sim.n_qubits_of(states)
    param_rows = np.atleast_2d(param_rows)
    for step in _fused_program(n_qubits, n_layers, entanglement):
        if step[0] == "diag":
            states = states * step[1]
            continue
        _, target, rotations = step
        mats = None
        for kind, index in rotations:
            r = sim.rotation_matrices(kind, param_rows[:, index])
            mats = r if mats is None else r @ mats
        states = sim.apply_unitary_batch(states, n_qubits, target, mats)
    return states


def evaluate_batch(
    features: np.ndarray,
    param_rows: np.ndarray,
    n_layers: int,
    *,
    embedding_order: str = "xyz",
    entanglement: str = "ring",
) -> np.ndarray:
    """Run one circuit per row and return all Pauli-Z expectations, shape ``(batch, n_qubits)``.

    ``features`` is ``(batch, n)`` or ``(n,)``; ``param_rows`` is ``(batch, n_params)``
    or ``(n_params,)``. One-dimensional inputs are shared by every row.
    """
    features, param_rows = _check_batch(features, param_rows, n_layers)
    states = embed_batch(features, embedding_order)
    if states.shape[0] < param_rows.shape[0]:
        states = np.repeat(states, param_rows.shape[0], axis=0)
    states = run_variational_batch(states, param_rows, n_layers, entanglement)
    return sim.expectation_z_batch(states, features.shape[1])


@lru_cache(maxsize=None)
def _fused_program(n_qubits: int, n_layers: int, entanglement: str) -> tuple:
    """The trainable part of the template with same-qubit rotation runs merged
    and CZ runs merged into one diagonal.

    Steps are ``("unitary", target, ((kind, param_index), ...))`` in application
    order, or ``("diag", signs)``.
    """
    steps: list = []
    for slot in _template(n_qubits, n_layers, "xyz", entanglement):
        if slot.source == "feature":
            continue
        if slot.source is None:
            if steps and steps[-1][0] == "cz":
                steps[-1][1].append((slot.control, slot.target))
            else:
                steps.append(("cz", [(slot.control, slot.target)]))
        elif steps and steps[-1][0] == "unitary" and steps[-1][1] == slot.target:
            steps[-1][2].append((slot.kind, slot.index))
        else:
            steps.append(("unitary", slot.target, [(slot.kind, slot.index)]))
    program = []
    for step in steps:
        if step[0] == "cz":
            diag = sim.cz_diagonal(n_qubits, step[1])
            diag.setflags(write=False)
            program.append(("diag", diag))
        else:
            program.append(("unitary", step[1], tuple(step[2])))
    return tuple(program)


def evaluate(
    features,
    params: VariationalParams,
    *,
    embedding_order: str = "xyz",
    entanglement: str = "ring",
) -> np.ndarray:
    """Pauli-Z expectations ``(<Z_0>, ..., <Z_{n-1}>)`` of the circuit on ``|0...0>``."""
    x = validate_features(features, params)
    out = evaluate_batch(
        x, params.flat, params.n_layers, embedding_order=embedding_order, entanglement=entanglement
    )[0]
    return np.clip(out, -1.0, 1.0)


def _label(gate: GateOp, param: Optional[int]) -> str:
    if gate.kind == "CZ":
        return "*"
    placeholder = f"w{param}" if param is not None else f"x{gate.target}"
    return f"{gate.kind}({placeholder})"


def render_ascii(circuit: QuantumCircuit) -> str:
    """Draw the circuit as text, one row per wire.

    Gates are packed left to right into the earliest column free on every wire
    they touch; a CZ occupies all wires between its ends. Rotations show
    ``x<k>`` for the feature embedded on qubit k and ``w<p>`` for trainable
    parameter p. CZ ends are ``*`` joined by ``|``.
    """
    n = circuit.n_qubits
    param_at = circuit.parameter_at()
    columns: list[list[tuple[int, GateOp]]] = []
    frontier = [0] * n
    for pos, gate in enumerate(circuit.gates):
        qs = gate.qubits()
        span = range(min(qs), max(qs) + 1)
        col = max(frontier[q] for q in span)
        if col == len(columns):
            columns.append([])
        columns[col].append((pos, gate))
        for q in span:
            frontier[q] = col + 1

    prefix_width = len(f"q{n - 1}: ")
    wires = [[f"q{q}: ".ljust(prefix_width)] for q in range(n)]
    gaps = [[" " * prefix_width] for _ in range(max(n - 1, 0))]
    for column in columns:
        cells: dict[int, str] = {}
        links: set[int] = set()
        for pos, gate in column:
            label = _label(gate, param_at.get(pos))
            if gate.kind == "CZ":
                lo, hi = sorted(gate.qubits())
                cells[lo] = cells[hi] = label
                for q in range(lo + 1, hi):
                    cells[q] = "|"
                links.update(range(lo, hi))
            else:
                cells[gate.target] = label
        width = max(len(c) for c in cells.values()) + 2
        for q in range(n):
            wires[q].append(cells.get(q, "").center(width, "-"))
        for g in range(n - 1):
            gaps[g].append(("|" if g in links else "").center(width))
    wires = [row + ["-"] for row in wires]
    lines = []
    for q in range(n):
        lines.append("".join(wires[q]))
        if q < n - 1:
            lines.append("".join(gaps[q]).rstrip())
    return "\n".join(lines) + "\n"
