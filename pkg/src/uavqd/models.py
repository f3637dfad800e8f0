"""Benchmark open-system models.

* Two-level amplitude damping (spontaneous emission ``|1> -> |0>``).
* Three-chromophore FMO network with ground and sink states.
* Dicke superradiance of a small emitter array with collective decay
  channels from the free-space dyadic Green's function.

Dicke units: hbar = c = lambda_0 = Gamma_0 = 1, so k_0 = omega_0 = 2 pi and
times are reported as Gamma_0 t.  Emitter qubits use ``|g> = |0>`` and
``|e> = |1>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .lindblad import LindbladModel

HBAR_EV_FS = 0.6582119569

FMO_HAMILTONIAN_EV = np.array(
    [
        [0, 0, 0, 0, 0],
        [0, 0.0267, -0.0129, 0.000632, 0],
        [0, -0.0129, 0.0273, 0.00404, 0],
        [0, 0.000632, 0.00404, 0, 0],
        [0, 0, 0, 0, 0],
    ]
)

FMO_RATES = {"alpha": 3.00e-3, "beta": 5.00e-7, "gamma_sink": 6.28e-3}
FMO_LABELS = ("ground", "site1", "site2", "site3", "sink")

AMPLITUDE_DAMPING_GAMMA = 1.52e9
AMPLITUDE_DAMPING_RHO0 = np.array([[0.25, math.sqrt(3) / 4], [math.sqrt(3) / 4, 0.75]])


def _proj(n: int, i: int, j: int) -> np.ndarray:
    out = np.zeros((n, n), dtype=complex)
    out[i, j] = 1
    return out


def amplitude_damping_model(gamma: float = AMPLITUDE_DAMPING_GAMMA, time_scale: float = 1e-9,
                            time_unit: str = "ns") -> LindbladModel:
    """Degenerate two-level system decaying ``|1> -> |0>``.

    ``gamma`` is in s^-1; the model clock ticks in units of ``time_scale``
    seconds.  The default (ns) keeps the rate O(1), which the adaptive
    threshold assumes since the McLachlan distance scales as rate squared.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return LindbladModel(
        hamiltonian=np.zeros((2, 2)),
        jumps=((gamma * time_scale, _proj(2, 0, 1)),),
        observables={"pop0": _proj(2, 0, 0), "pop1": _proj(2, 1, 1)},
        time_unit=time_unit,
        name="amplitude_damping",
        parameters={"gamma_per_s": gamma, "time_scale_s": time_scale},
    )


def amplitude_damping_exact(t: np.ndarray, gamma: float, rho0: np.ndarray = AMPLITUDE_DAMPING_RHO0):
    """Closed form ``(rho_11(t), rho_01(t))`` for rate ``gamma`` in model time units."""
    t = np.asarray(t, dtype=float)
    return rho0[1, 1] * np.exp(-gamma * t), rho0[0, 1] * np.exp(-gamma * t / 2)


FMO_TIME_UNITS = {"fs": 1.0, "ps": 1000.0}


def fmo_model(alpha: float = FMO_RATES["alpha"], beta: float = FMO_RATES["beta"],
              gamma_sink: float = FMO_RATES["gamma_sink"], time_unit: str = "ps") -> LindbladModel:
    """Five-level FMO network.

    Rates are given in fs^-1 and energies are converted from eV with
    ``E / hbar``.  Both are then expressed per ``time_unit``; picoseconds
    (the default) put the rates at O(1), matching the scale the adaptive
    threshold is meant for.  Basis: ``|0>`` ground, ``|1>..|3>``
    chromophores, ``|4>`` sink.
    """
    if min(alpha, beta, gamma_sink) < 0:
        raise ValueError("FMO rates must be non-negative")
    if time_unit not in FMO_TIME_UNITS:
        raise ValueError(f"time_unit must be one of {sorted(FMO_TIME_UNITS)}")
    scale = FMO_TIME_UNITS[time_unit]
    n = 5
    jumps = [(alpha * scale, _proj(n, i, i)) for i in (1, 2, 3)]
    jumps += [(beta * scale, _proj(n, 0, i)) for i in (1, 2, 3)]
    jumps.append((gamma_sink * scale, _proj(n, 4, 3)))
    return LindbladModel(
        hamiltonian=FMO_HAMILTONIAN_EV / HBAR_EV_FS * scale,
        jumps=tuple(jumps),
        observables={name: _proj(n, i, i) for i, name in enumerate(FMO_LABELS)},
        time_unit=time_unit,
        name="fmo",
        parameters={"alpha_per_fs": alpha, "beta_per_fs": beta, "gamma_sink_per_fs": gamma_sink,
                    "hbar_eV_fs": HBAR_EV_FS},
    )


def fmo_initial(site: int = 1) -> np.ndarray:
    if not 0 <= site < 5:
        raise ValueError("FMO site index must be in 0..4")
    return _proj(5, site, site)


@dataclass(frozen=True, eq=False)
class EmitterGeometry:
    positions: np.ndarray
    polarization: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    omega0: float = 2 * math.pi
    gamma0: float = 1.0

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.shape[1] != 3:
            raise ValueError("positions must be 3D vectors")
        pol = np.asarray(self.polarization, dtype=float)
        if abs(np.linalg.norm(pol) - 1) > 1e-12:
            raise ValueError("polarization must be a unit vector")
        for i in range(len(pos)):
            for j in range(i):
                if np.linalg.norm(pos[i] - pos[j]) == 0:
                    raise ValueError(f"emitters {j} and {i} coincide")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "polarization", pol)

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    @property
    def k0(self) -> float:
        return self.omega0  # c = 1

    @classmethod
    def chain(cls, n: int, spacing: float, **kw) -> "EmitterGeometry":
        """``n`` emitters along x, ``spacing`` in units of lambda_0."""
        return cls(np.array([[i * spacing, 0.0, 0.0] for i in range(n)]), **kw)

    @classmethod
    def grid(cls, n: int, spacing: float, **kw) -> "EmitterGeometry":
        """``n`` emitters filling a square grid in the xy plane row by row."""
        side = math.ceil(math.sqrt(n))
        pts = [[(i % side) * spacing, (i // side) * spacing, 0.0] for i in range(n)]
        return cls(np.array(pts), **kw)


def dicke_green(r: np.ndarray, k0: float) -> np.ndarray:
    """Free-space dyadic Green's function at separation vector ``r``."""
    r = np.asarray(r, dtype=float)
    dist = np.linalg.norm(r)
    if dist == 0:
        raise ValueError("Green's function is singular at zero separation")
    xi = k0 * dist
    rr = np.outer(r, r) / dist**2
    pref = np.exp(1j * xi) / (4 * math.pi * k0**2 * dist**3)
    return pref * ((xi**2 + 1j * xi - 1) * np.eye(3) + (-(xi**2) - 3j * xi + 3) * rr)


def dicke_couplings(g: EmitterGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Coherent couplings ``J`` and dissipative matrix ``Gamma~``.

    The dipole prefactor is fixed by ``Im G(r -> 0) = k0 / (6 pi)`` so that
    ``Gamma~_ii = Gamma_0``; ``J_ii`` is absorbed into ``omega_0`` and set to 0.
    """
    n = g.n_atoms
    scale = g.gamma0 * 6 * math.pi / g.k0
    p = g.polarization
    coupling = np.zeros((n, n))
    gamma = np.eye(n) * g.gamma0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            pgp = p @ dicke_green(g.positions[i] - g.positions[j], g.k0) @ p
            coupling[i, j] = -0.5 * scale * pgp.real
            gamma[i, j] = scale * pgp.imag
    return coupling, gamma


def _site_op(n: int, i: int, op: np.ndarray) -> np.ndarray:
    return reduce(np.kron, [op if q == i else np.eye(2) for q in range(n)])


SIGMA_GE = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e| with |g> = |0>


def lowering_ops(n: int) -> list[np.ndarray]:
    return [_site_op(n, i, SIGMA_GE) for i in range(n)]


@dataclass(frozen=True, eq=False)
class CollectiveChannels:
    gamma_matrix: np.ndarray
    decay_rates: np.ndarray
    eigenvectors: np.ndarray  # column nu is alpha_nu
    jump_operators: tuple[np.ndarray, ...]

    def emission_operator(self) -> np.ndarray:
        return sum(rate * op.conj().T @ op for rate, op in zip(self.decay_rates, self.jump_operators))


def collective_jump_ops(gamma_matrix: np.ndarray) -> CollectiveChannels:
    """Diagonalize ``Gamma~`` into collective channels ``L_nu = sum_i alpha_nu,i sigma^i_ge``.

    Rates are sorted descending; each eigenvector is signed so its
    largest-magnitude entry is positive.
    """
    gm = np.asarray(gamma_matrix, dtype=float)
    if not np.allclose(gm, gm.T, atol=1e-12, rtol=0):
        raise ValueError("Gamma matrix must be symmetric")
    rates, vecs = np.linalg.eigh(gm)
    if rates.min() < -1e-8:
        raise ValueError(f"negative collective decay rate {rates.min():.3e}")
    order = np.argsort(-rates, kind="stable")
    rates, vecs = rates[order], vecs[:, order]
    for nu in range(vecs.shape[1]):
        col = vecs[:, nu]
        if col[np.argmax(np.abs(col))] < 0:
            vecs[:, nu] = -col
    sig = lowering_ops(gm.shape[0])
    ops = tuple(sum(a * s for a, s in zip(vecs[:, nu], sig)) for nu in range(len(rates)))
    return CollectiveChannels(gm, rates, vecs, ops)


def dicke_channels(g: EmitterGeometry) -> CollectiveChannels:
    return collective_jump_ops(dicke_couplings(g)[1])


MAX_DICKE_ATOMS = 4


def dicke_model(g: EmitterGeometry, keep_omega0: bool = False) -> LindbladModel:
    """Emitter array in the frame rotating at ``omega_0``.

    Observables: ``n_exc`` (total excitation), ``exc<i>`` per site and the
    photon emission rate ``eta``.  ``keep_omega0=True`` retains the bare
    ``omega_0 sum_i sigma_ee`` term.
    """
    n = g.n_atoms
    if not 1 <= n <= MAX_DICKE_ATOMS:
        raise ValueError(f"at most {MAX_DICKE_ATOMS} emitters are supported")
    coupling, gamma = dicke_couplings(g)
    ch = collective_jump_ops(gamma)
    sig = lowering_ops(n)
    excited = [s.conj().T @ s for s in sig]
    h = sum(coupling[i, j] * sig[i].conj().T @ sig[j] for i in range(n) for j in range(n) if i != j)
    h = np.zeros((2**n, 2**n), dtype=complex) + h
    if keep_omega0:
        h = h + g.omega0 * sum(excited)
    observables = {"n_exc": sum(excited)}
    observables.update({f"exc{i}": e for i, e in enumerate(excited)})
    observables["eta"] = ch.emission_operator()
    return LindbladModel(
        hamiltonian=(h + h.conj().T) / 2,
        jumps=tuple((float(max(rate, 0.0)), op) for rate, op in zip(ch.decay_rates, ch.jump_operators)),
        observables=observables,
        time_unit="1/Gamma0",
        name="dicke",
        parameters={
            "positions": g.positions,
            "polarization": g.polarization,
            "omega0": g.omega0,
            "gamma0": g.gamma0,
            "keep_omega0": keep_omega0,
            "decay_rates": ch.decay_rates,
        },
    )


def all_excited(n_atoms: int) -> np.ndarray:
    """``|e...e><e...e|``."""
    return _proj(2**n_atoms, 2**n_atoms - 1, 2**n_atoms - 1)


def emission_rate(rho: np.ndarray, ch: CollectiveChannels) -> float:
    """``eta = < sum_nu Gamma_nu L_nu^+ L_nu >``."""
    op = ch.emission_operator()
    rho = np.asarray(rho)
    if rho.shape != op.shape:
        raise ValueError(f"shape mismatch {rho.shape} vs {op.shape}")
    return float(np.real(np.trace(op @ rho)))
