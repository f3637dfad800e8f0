"""Pauli strings, their statevector action, and operator pools.

Qubit 0 is the leftmost Kronecker factor, i.e. the most significant bit of
a basis-state index.  Rotations use the circuit convention
``exp(-i * theta * P / 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations, product
from math import comb

import numpy as np

LETTERS = "IXYZ"

_PAULI_2x2 = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

MAX_POOL_QUBITS = 12


@dataclass(frozen=True)
class PauliString:
    """A word over ``{I, X, Y, Z}``, one letter per qubit."""

    letters: str

    def __post_init__(self):
        if not self.letters or any(c not in LETTERS for c in self.letters):
            raise ValueError(f"invalid Pauli string {self.letters!r}")

    @classmethod
    def from_sparse(cls, n_qubits: int, terms: dict[int, str]) -> "PauliString":
        letters = ["I"] * n_qubits
        for q, c in terms.items():
            letters[q] = c
        return cls("".join(letters))

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        return sum(c != "I" for c in self.letters)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, c in enumerate(self.letters) if c != "I")

    def __str__(self) -> str:
        return self.letters

    # P|i> = phase[i] |i ^ xmask>, hence (P s)[i] = phase'[i] s[i ^ xmask]
    @cached_property
    def _action(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.n_qubits
        xmask = 0
        zmask = 0
        n_y = 0
        for q, c in enumerate(self.letters):
            bit = 1 << (n - 1 - q)
            if c in "XY":
                xmask |= bit
            if c in "YZ":
                zmask |= bit
            if c == "Y":
                n_y += 1
        idx = np.arange(2**n)
        source = idx ^ xmask
        # Y = i X Z: the Z part acts on the source bit before the flip
        parity = _popcount(source & zmask) & 1
        phase = (1j**n_y) * (1 - 2 * parity)
        return source, phase.astype(complex)


def _popcount(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    count = np.zeros_like(a)
    while np.any(a):
        count += a & 1
        a >>= 1
    return count


def _as_pauli(p: PauliString | str) -> PauliString:
    return p if isinstance(p, PauliString) else PauliString(p)


def pauli_matrix(p: PauliString | str) -> np.ndarray:
    """Dense ``2^n x 2^n`` matrix of ``p``."""
    p = _as_pauli(p)
    out = np.ones((1, 1), dtype=complex)
    for c in p.letters:
        out = np.kron(out, _PAULI_2x2[c])
    return out


def _check_dim(p: PauliString, s: np.ndarray):
    if s.shape[-1] != 2**p.n_qubits:
        raise ValueError(
            f"state of length {s.shape[-1]} does not match {p.n_qubits}-qubit string {p}"
        )


def apply_pauli(p: PauliString | str, s: np.ndarray) -> np.ndarray:
    """Return ``P @ s`` using a bit-flip gather and a phase mask."""
    p = _as_pauli(p)
    s = np.asarray(s, dtype=complex)
    _check_dim(p, s)
    source, phase = p._action
    return phase * s[..., source]


def apply_rotation(p: PauliString | str, theta: float, s: np.ndarray) -> np.ndarray:
    """Return ``exp(-i theta P / 2) @ s``."""
    p = _as_pauli(p)
    s = np.asarray(s, dtype=complex)
    return np.cos(theta / 2) * s - 1j * np.sin(theta / 2) * apply_pauli(p, s)


@dataclass(frozen=True)
class OperatorPool:
    n_qubits: int
    max_weight: int
    members: tuple[PauliString, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    @cached_property
    def _stacked_action(self) -> tuple[np.ndarray, np.ndarray]:
        sources = np.stack([m._action[0] for m in self.members])
        phases = np.stack([m._action[1] for m in self.members])
        return sources, phases

    def apply_all(self, s: np.ndarray) -> np.ndarray:
        """Rows are ``P_c @ s`` for every member ``c``, in pool order."""
        sources, phases = self._stacked_action
        return phases * np.asarray(s, dtype=complex)[sources]


def pool_size(n_qubits: int, max_weight: int) -> int:
    return sum(comb(n_qubits, m) * 3**m for m in range(1, max_weight + 1))


def build_pool(n_qubits: int, max_weight: int) -> OperatorPool:
    """All Pauli strings with weight in ``1..max_weight``.

    Ordered by weight, then by the (lexicographic) tuple of occupied qubits,
    then by letters with ``X < Y < Z``.
    """
    if not 1 <= n_qubits <= MAX_POOL_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_POOL_QUBITS}], got {n_qubits}")
    if not 1 <= max_weight <= n_qubits:
        raise ValueError(f"max_weight must be in [1, {n_qubits}], got {max_weight}")
    members = []
    for w in range(1, max_weight + 1):
        for qubits in combinations(range(n_qubits), w):
            for word in product("XYZ", repeat=w):
                members.append(PauliString.from_sparse(n_qubits, dict(zip(qubits, word))))
    return OperatorPool(n_qubits, max_weight, tuple(members))
