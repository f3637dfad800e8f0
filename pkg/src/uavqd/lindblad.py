"""Vectorized Lindblad dynamics and the exact reference solver.

Vectorization is column-stacking: entry ``i + N*j`` of ``vec(rho)`` holds
``rho[i, j]``, so that ``vec(A B C) = (C^T kron A) vec(B)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

HERMITIAN_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """Hamiltonian, rated jump operators and named observables.

    ``jumps`` holds ``(rate, L)`` pairs; the dissipator is
    ``rate * (L rho L^+ - {L^+ L, rho} / 2)``.  ``time_unit`` only labels
    output; ``hamiltonian`` and rates must already share that unit.
    """

    hamiltonian: np.ndarray
    jumps: tuple[tuple[float, np.ndarray], ...] = ()
    observables: dict[str, np.ndarray] = field(default_factory=dict)
    time_unit: str = ""
    name: str = ""
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        h = np.asarray(self.hamiltonian, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("hamiltonian must be square")
        if not np.allclose(h, h.conj().T, atol=HERMITIAN_ATOL, rtol=0):
            raise ValueError("hamiltonian is not Hermitian")
        object.__setattr__(self, "hamiltonian", h)
        jumps = []
        for rate, op in self.jumps:
            op = np.asarray(op, dtype=complex)
            if rate < 0:
                raise ValueError(f"negative jump rate {rate}")
            if op.shape != h.shape:
                raise ValueError("jump operator shape does not match hamiltonian")
            jumps.append((float(rate), op))
        object.__setattr__(self, "jumps", tuple(jumps))
        obs = {}
        for name, op in self.observables.items():
            op = np.asarray(op, dtype=complex)
            if op.shape != h.shape:
                raise ValueError(f"observable {name!r} has the wrong shape")
            obs[name] = op
        object.__setattr__(self, "observables", obs)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def n_qubits(self) -> int:
        return max(1, math.ceil(math.log2(self.dim)))

    @property
    def padded_dim(self) -> int:
        return 2**self.n_qubits

    def pad(self, a: np.ndarray) -> np.ndarray:
        """Embed an ``N x N`` matrix into the top-left block of the qubit space."""
        out = np.zeros((self.padded_dim, self.padded_dim), dtype=complex)
        out[: self.dim, : self.dim] = a
        return out

    def padded(self) -> "LindbladModel":
        if self.padded_dim == self.dim:
            return self
        return LindbladModel(
            self.pad(self.hamiltonian),
            tuple((r, self.pad(op)) for r, op in self.jumps),
            {k: self.pad(v) for k, v in self.observables.items()},
            self.time_unit,
            self.name,
            self.parameters,
        )

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        """Lindblad right-hand side evaluated directly on a matrix."""
        h = self.hamiltonian
        out = -1j * (h @ rho - rho @ h)
        for rate, op in self.jumps:
            ld = op.conj().T
            ldl = ld @ op
            out += rate * (op @ rho @ ld - 0.5 * (ldl @ rho + rho @ ldl))
        return out


def vectorize(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    return rho.reshape(-1, order="F").astype(complex)


def devectorize(nu: np.ndarray, n: int | None = None) -> np.ndarray:
    nu = np.asarray(nu)
    if n is None:
        n = math.isqrt(nu.size)
    if n * n != nu.size:
        raise ValueError(f"vector of length {nu.size} is not an {n}x{n} matrix")
    return nu.reshape(n, n, order="F")


def split_hermitian(full: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(H_e, H_a)`` with ``full = H_e - i H_a``, both Hermitian."""
    full = np.asarray(full, dtype=complex)
    adj = full.conj().T
    return (full + adj) / 2, 1j * (full - adj) / 2


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    full: np.ndarray

    @cached_property
    def _parts(self):
        return split_hermitian(self.full)

    @property
    def hermitian_part(self) -> np.ndarray:
        return self._parts[0]

    @property
    def antihermitian_part(self) -> np.ndarray:
        return self._parts[1]

    @property
    def n_qubits(self) -> int:
        return int(round(math.log2(self.full.shape[0])))


def effective_hamiltonian_matrix(hamiltonian, jumps) -> np.ndarray:
    """``I x H - H^T x I + i sum_k [L* x L - (I x L^+L + L^T L* x I) / 2]``.

    Rates are folded in as ``sqrt(rate) * L``.
    """
    h = np.asarray(hamiltonian, dtype=complex)
    eye = np.eye(h.shape[0])
    full = np.kron(eye, h) - np.kron(h.T, eye)
    for rate, op in jumps:
        op = math.sqrt(rate) * np.asarray(op, dtype=complex)
        ldl = op.conj().T @ op
        full = full + 1j * (
            np.kron(op.conj(), op) - 0.5 * (np.kron(eye, ldl) + np.kron(ldl.T, eye))
        )
    return full


def build_effective_hamiltonian(m: LindbladModel) -> EffectiveHamiltonian:
    """Generator of ``d vec(rho)/dt = -i H_eff vec(rho)`` on the padded space."""
    p = m.padded()
    return EffectiveHamiltonian(effective_hamiltonian_matrix(p.hamiltonian, p.jumps))


def expectation(rho: np.ndarray, op: np.ndarray) -> float:
    rho = np.asarray(rho)
    op = np.asarray(op)
    if rho.shape != op.shape:
        raise ValueError(f"shape mismatch {rho.shape} vs {op.shape}")
    value = np.trace(op @ rho)
    if abs(value.imag) > 1e-9:
        raise ValueError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


@dataclass
class TrajectoryRecord:
    """Time series produced by the exact and variational solvers."""

    times: np.ndarray
    observables: dict[str, np.ndarray]
    frobenius_norm: np.ndarray
    trace: np.ndarray
    mclachlan_distance: np.ndarray | None = None
    ansatz_size: np.ndarray | None = None
    time_unit: str = ""
    metadata: dict = field(default_factory=dict)
    states: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.times)
        columns = [self.frobenius_norm, self.trace, *self.observables.values()]
        columns += [c for c in (self.mclachlan_distance, self.ansatz_size) if c is not None]
        if any(len(c) != n for c in columns):
            raise ValueError("all trajectory columns must match the time grid length")

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"time": self.times, **self.observables}
        cols["norm"] = self.frobenius_norm
        cols["trace"] = self.trace
        if self.mclachlan_distance is not None:
            cols["mclachlan_distance"] = self.mclachlan_distance
        if self.ansatz_size is not None:
            cols["ansatz_size"] = self.ansatz_size
        return cols

    def to_csv(self, path: str | Path):
        cols = self.columns()
        if self.time_unit:
            cols = {f"time[{self.time_unit}]" if k == "time" else k: v for k, v in cols.items()}
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for row in zip(*cols.values()):
                writer.writerow(_fmt(v) for v in row)

    @classmethod
    def from_csv(cls, path: str | Path) -> "TrajectoryRecord":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        time_unit = ""
        if rows[0][0].startswith("time[") and rows[0][0].endswith("]"):
            time_unit, rows[0][0] = rows[0][0][5:-1], "time"
        header, body = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
        cols = dict(zip(header, body.T))
        reserved = {"time", "norm", "trace", "mclachlan_distance", "ansatz_size"}
        size = cols.get("ansatz_size")
        return cls(
            times=cols["time"],
            observables={k: v for k, v in cols.items() if k not in reserved},
            frobenius_norm=cols["norm"],
            trace=cols["trace"],
            mclachlan_distance=cols.get("mclachlan_distance"),
            ansatz_size=None if size is None else size.astype(int),
            time_unit=time_unit,
        )

    def write_metadata(self, path: str | Path, extra: dict | None = None):
        meta = {"time_unit": self.time_unit, **self.metadata, **(extra or {})}
        Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


class SolverDivergence(RuntimeError):
    pass


def exact_evolve(
    m: LindbladModel,
    rho0: np.ndarray,
    t_grid: Sequence[float],
    substeps: int = 10,
) -> TrajectoryRecord:
    """Integrate the vectorized equation with fixed-step RK4.

    Each grid interval is split into ``substeps`` equal RK4 steps.  The
    returned record keeps the padded density matrices in ``states``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be a non-empty ascending sequence")
    if substeps < 10:
        raise ValueError("at least 10 substeps per grid interval are required")
    p = m.padded()
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape == (m.dim, m.dim):
        rho0 = m.pad(rho0)
    gen = -1j * effective_hamiltonian_matrix(p.hamiltonian, p.jumps)
    nu = vectorize(rho0)
    norm0 = np.linalg.norm(nu)

    def rk4(nu, h):
        k1 = gen @ nu
        k2 = gen @ (nu + 0.5 * h * k1)
        k3 = gen @ (nu + 0.5 * h * k2)
        k4 = gen @ (nu + h * k3)
        return nu + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    dim = p.dim
    states = np.empty((t_grid.size, dim, dim), dtype=complex)
    states[0] = rho0
    for i in range(1, t_grid.size):
        h = (t_grid[i] - t_grid[i - 1]) / substeps
        for _ in range(substeps):
            nu = rk4(nu, h)
        if np.linalg.norm(nu) > 10 * norm0:
            raise SolverDivergence(f"state norm exceeded 10x its initial value at t={t_grid[i]}")
        states[i] = devectorize(nu, dim)

    observables = {
        name: np.array([expectation(r, op) for r in states]) for name, op in p.observables.items()
    }
    return TrajectoryRecord(
        times=t_grid,
        observables=observables,
        frobenius_norm=np.linalg.norm(states.reshape(t_grid.size, -1), axis=1),
        trace=np.trace(states, axis1=1, axis2=2).real,
        time_unit=m.time_unit,
        metadata={"solver": "exact", "integrator": "rk4", "substeps": substeps},
        states=states,
    )
