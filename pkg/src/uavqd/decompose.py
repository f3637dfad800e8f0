"""Compile Pauli rotations ``exp(-i theta P / 2)`` into CNOT, RZ and basis changes.

Each X or Y letter is rotated onto Z, the Z-parity of the support is
collected on its last qubit by a CNOT chain, a single RZ applies the phase,
and everything before the RZ is undone in reverse.  A weight-k rotation
costs 2(k - 1) CNOTs, one RZ and two basis gates per X/Y letter.

Basis gates (all exact, so no global phase appears)::

    to_z_from_x = from_z_to_x = H = [[1, 1], [1, -1]] / sqrt(2)
    to_z_from_y = H S^dag         = [[1, -i], [1, i]] / sqrt(2)
    from_z_to_y = S H             = [[1, 1], [i, -i]] / sqrt(2)

with ``to_z_from_y @ Y @ from_z_to_y = Z``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Union

import numpy as np

from .pauli import PauliString

_S2 = 1 / np.sqrt(2)
BASIS_MATRICES = {
    "to_z_from_x": _S2 * np.array([[1, 1], [1, -1]], dtype=complex),
    "from_z_to_x": _S2 * np.array([[1, 1], [1, -1]], dtype=complex),
    "to_z_from_y": _S2 * np.array([[1, -1j], [1, 1j]], dtype=complex),
    "from_z_to_y": _S2 * np.array([[1, 1], [1j, -1j]], dtype=complex),
}

MAX_UNITARY_QUBITS = 6


@dataclass(frozen=True)
class CNOT:
    control: int
    target: int

    def __post_init__(self):
        if self.control == self.target:
            raise ValueError("CNOT control and target must differ")

    def __str__(self):
        return f"CNOT {self.control} {self.target}"


@dataclass(frozen=True)
class RZ:
    qubit: int
    angle: float

    def __str__(self):
        return f"RZ {self.qubit} {format(self.angle, '.17g')}"


@dataclass(frozen=True)
class Basis:
    qubit: int
    kind: str

    def __post_init__(self):
        if self.kind not in BASIS_MATRICES:
            raise ValueError(f"unknown basis change {self.kind!r}")

    def __str__(self):
        return f"BASIS {self.qubit} {self.kind}"


Gate = Union[CNOT, RZ, Basis]


@dataclass(frozen=True)
class GateSequence:
    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        for g in self.gates:
            qubits = (g.control, g.target) if isinstance(g, CNOT) else (g.qubit,)
            if any(not 0 <= q < self.n_qubits for q in qubits):
                raise ValueError(f"gate {g} acts outside {self.n_qubits} qubits")

    def __len__(self):
        return len(self.gates)

    def to_text(self) -> str:
        return "".join(f"{g}\n" for g in self.gates)

    @classmethod
    def from_text(cls, text: str, n_qubits: int) -> "GateSequence":
        gates = []
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            kind, args = parts[0], parts[1:]
            if kind == "CNOT":
                gates.append(CNOT(int(args[0]), int(args[1])))
            elif kind == "RZ":
                gates.append(RZ(int(args[0]), float(args[1])))
            elif kind == "BASIS":
                gates.append(Basis(int(args[0]), args[1]))
            else:
                raise ValueError(f"unknown gate line {line!r}")
        return cls(n_qubits, tuple(gates))


_TO_Z = {"X": "to_z_from_x", "Y": "to_z_from_y"}
_FROM_Z = {"X": "from_z_to_x", "Y": "from_z_to_y"}


def decompose_rotation(p: PauliString | str, theta: float) -> GateSequence:
    p = p if isinstance(p, PauliString) else PauliString(p)
    support = p.support
    if not support:
        raise ValueError("cannot decompose a rotation about the identity")
    to_z = [Basis(q, _TO_Z[p.letters[q]]) for q in support if p.letters[q] != "Z"]
    ladder = [CNOT(a, b) for a, b in zip(support, support[1:])]
    gates = [*to_z, *ladder, RZ(support[-1], theta), *reversed(ladder)]
    gates += [Basis(q, _FROM_Z[p.letters[q]]) for q in reversed(support) if p.letters[q] != "Z"]
    return GateSequence(p.n_qubits, tuple(gates))


def _embed(n: int, q: int, u: np.ndarray) -> np.ndarray:
    return np.kron(np.kron(np.eye(2**q), u), np.eye(2 ** (n - q - 1)))


def _gate_matrix(g: Gate, n: int) -> np.ndarray:
    if isinstance(g, RZ):
        return _embed(n, g.qubit, np.diag([np.exp(-0.5j * g.angle), np.exp(0.5j * g.angle)]))
    if isinstance(g, Basis):
        return _embed(n, g.qubit, BASIS_MATRICES[g.kind])
    idx = np.arange(2**n)
    cbit = 1 << (n - 1 - g.control)
    tbit = 1 << (n - 1 - g.target)
    perm = np.where(idx & cbit, idx ^ tbit, idx)
    out = np.zeros((2**n, 2**n), dtype=complex)
    out[perm, idx] = 1
    return out


def sequence_unitary(seq: GateSequence) -> np.ndarray:
    """Dense unitary of the circuit; the first gate acts first."""
    if seq.n_qubits > MAX_UNITARY_QUBITS:
        raise ValueError(f"dense unitaries are limited to {MAX_UNITARY_QUBITS} qubits")
    u = np.eye(2**seq.n_qubits, dtype=complex)
    for g in seq.gates:
        u = _gate_matrix(g, seq.n_qubits) @ u
    return u


def gate_count(seq: GateSequence) -> dict[str, int]:
    counts = Counter({"CNOT": 0, "RZ": 0, "BASIS": 0})
    for g in seq.gates:
        counts[{CNOT: "CNOT", RZ: "RZ", Basis: "BASIS"}[type(g)]] += 1
    return dict(counts)
