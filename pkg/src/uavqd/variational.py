"""Adaptive variational propagation of the vectorized density matrix.

The normalized vector ``vec(rho) / |vec(rho)|`` is represented by a product
of Pauli rotations acting on a fixed reference state.  Parameters move by
McLachlan's principle (``M theta_dot = V``), new rotations are appended
greedily from a pool whenever the residual exceeds a threshold, and the
discarded norm is accumulated separately from ``<H_a>``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .lindblad import (
    EffectiveHamiltonian,
    LindbladModel,
    TrajectoryRecord,
    build_effective_hamiltonian,
    devectorize,
    vectorize,
)
from .pauli import OperatorPool, PauliString, apply_pauli, apply_rotation

logger = logging.getLogger(__name__)

GaugeTerm = Literal["projected", "conjugated"]

IMPROVEMENT_TOL = 1e-12
RECONSTRUCTION_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class Ansatz:
    """``prod_l exp(-i theta_l P_l / 2) |reference>`` plus the tracked norm.

    Layer 0 acts first.  ``log_sq_norm`` is ``log |vec(rho)|^2``.
    """

    reference: np.ndarray
    generators: tuple[PauliString, ...] = ()
    thetas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    log_sq_norm: float = 0.0

    @classmethod
    def from_density_matrix(cls, rho: np.ndarray) -> "Ansatz":
        nu = vectorize(rho)
        norm = np.linalg.norm(nu)
        return cls(reference=nu / norm, log_sq_norm=2 * math.log(norm))

    @property
    def n_layers(self) -> int:
        return len(self.generators)

    @property
    def n_qubits(self) -> int:
        return int(round(math.log2(self.reference.size)))

    @property
    def layers(self) -> list[tuple[PauliString, float]]:
        return list(zip(self.generators, self.thetas))

    def append(self, p: PauliString, theta: float = 0.0) -> "Ansatz":
        return replace(self, generators=self.generators + (p,), thetas=np.append(self.thetas, theta))


def _layer_states(a: Ansatz) -> list[np.ndarray]:
    """States after 0, 1, ..., K layers."""
    states = [np.asarray(a.reference, dtype=complex)]
    for p, theta in zip(a.generators, a.thetas):
        states.append(apply_rotation(p, theta, states[-1]))
    return states


def ansatz_state(a: Ansatz) -> np.ndarray:
    return _layer_states(a)[-1]


def _tangents_from(a: Ansatz, states: list[np.ndarray]) -> np.ndarray:
    # row k is created after layer k and then carried through every later layer
    out = np.empty((a.n_layers, a.reference.size), dtype=complex)
    for k, (p, theta) in enumerate(zip(a.generators, a.thetas)):
        if k:
            out[:k] = apply_rotation(p, theta, out[:k])
        out[k] = -0.5j * apply_pauli(p, states[k + 1])
    return out


def tangent_state(a: Ansatz, k: int) -> np.ndarray:
    """``d|phi>/d theta_k``: a factor ``-i P_k / 2`` inserted after layer ``k``."""
    if not 0 <= k < a.n_layers:
        raise IndexError(f"layer index {k} out of range for {a.n_layers} layers")
    v = -0.5j * apply_pauli(a.generators[k], _layer_states(a)[k + 1])
    for q, theta in zip(a.generators[k + 1 :], a.thetas[k + 1 :]):
        v = apply_rotation(q, theta, v)
    return v


def tangent_states(a: Ansatz) -> np.ndarray:
    """All tangents as rows of a ``(K, 2^n)`` array."""
    return _tangents_from(a, _layer_states(a))


def _h_matrix(h: EffectiveHamiltonian | np.ndarray) -> np.ndarray:
    return h.full if isinstance(h, EffectiveHamiltonian) else np.asarray(h)


@dataclass
class _Frame:
    """Quantities at the current parameters shared by M/V, distance and adaptation."""

    phi: np.ndarray
    tangents: np.ndarray
    h_phi: np.ndarray
    h_mean: complex

    @classmethod
    def build(cls, a: Ansatz, h: np.ndarray) -> "_Frame":
        states = _layer_states(a)
        phi = states[-1]
        h_phi = h @ phi
        return cls(phi, _tangents_from(a, states), h_phi, np.vdot(phi, h_phi))


def _gauge(b_left: np.ndarray, b_right: np.ndarray, gauge: GaugeTerm) -> np.ndarray:
    # b = <t|phi>; "projected" is <phi|t_k><phi|t_j>, "conjugated" is <t_k|phi><phi|t_j>
    if gauge == "projected":
        return np.multiply.outer(b_left.conj(), b_right.conj())
    if gauge == "conjugated":
        return np.multiply.outer(b_left, b_right.conj())
    raise ValueError(f"unknown gauge term {gauge!r}")


def _assemble(f: _Frame, gauge: GaugeTerm) -> tuple[np.ndarray, np.ndarray]:
    t = f.tangents
    b = t.conj() @ f.phi
    m = 2 * np.real(t.conj() @ t.T + _gauge(b, b, gauge))
    m = (m + m.T) / 2
    v = 2 * np.imag(f.h_mean * b.conj() + t.conj() @ f.h_phi)
    return m, v


def assemble_M_V(
    a: Ansatz, h: EffectiveHamiltonian | np.ndarray, gauge: GaugeTerm = "projected"
) -> tuple[np.ndarray, np.ndarray]:
    """McLachlan matrix ``M`` (real symmetric) and force vector ``V``.

    ``M_kj = 2 Re(<d_k phi|d_j phi> + g_kj)`` where the gauge term ``g_kj`` is
    ``<phi|d_k phi><phi|d_j phi>`` by default.  For unit-norm states this is
    ``-a_k a_j`` with ``a_k = Im <phi|d_k phi>``, making ``M`` twice the Gram
    matrix of the tangents projected orthogonally to ``|phi>``.
    """
    h = _h_matrix(h)
    if h.shape[0] != a.reference.size:
        raise ValueError("effective Hamiltonian does not match the ansatz dimension")
    return _assemble(_Frame.build(a, h), gauge)


def _pinv_solve(m: np.ndarray, v: np.ndarray, cutoff: float) -> tuple[np.ndarray, int]:
    """Batched minimum-norm solve; returns solutions and numerical ranks."""
    u, s, vh = np.linalg.svd(m)
    smax = s[..., :1]
    keep = (s > cutoff * smax) & (smax > 0)
    inv = np.where(keep, 1 / np.where(keep, s, 1), 0)
    coeff = inv * np.einsum("...ji,...j->...i", u, v)
    return np.einsum("...ji,...j->...i", vh, coeff), keep.sum(axis=-1)


def _solve(m: np.ndarray, v: np.ndarray, cutoff: float) -> tuple[np.ndarray, int]:
    if m.size == 0:
        return np.zeros(0), 0
    x, rank = _pinv_solve(m, v, cutoff)
    return x, int(rank)


def solve_theta_dot(m: np.ndarray, v: np.ndarray, cutoff: float = 1e-8) -> np.ndarray:
    """Minimum-norm least-squares solution of ``M x = V`` by truncated SVD.

    Singular values below ``cutoff * s_max`` are discarded.  If none survive
    the zero vector is returned and a ``RuntimeWarning`` is emitted.
    """
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or v.shape != (m.shape[0],):
        raise ValueError("M must be square and V conforming")
    x, rank = _solve(m, v, cutoff)
    if m.size and rank == 0:
        warnings.warn("McLachlan matrix has no singular value above cutoff", RuntimeWarning)
    return x


def _residual_norm(r: np.ndarray, phi: np.ndarray, projected: bool) -> np.ndarray:
    sq = np.sum(np.abs(r) ** 2, axis=-1)
    if projected:
        sq = sq - np.abs(r @ phi.conj()) ** 2
    return np.maximum(sq, 0.0)


def _distance(f: _Frame, theta_dot: np.ndarray, projected: bool = True) -> float:
    r = theta_dot @ f.tangents + 1j * f.h_phi
    return float(_residual_norm(r, f.phi, projected))


def mclachlan_distance(
    a: Ansatz,
    h: EffectiveHamiltonian | np.ndarray,
    theta_dot: np.ndarray,
    projected: bool = True,
) -> float:
    """Squared residual ``| sum_k theta_dot_k |d_k phi> + i H_eff |phi> |^2``.

    With ``projected=True`` (the default) the component along ``|phi>`` is
    removed first.  That component is a global phase plus the norm-loss rate
    ``<H_a>``; the ansatz cannot represent the latter and the engine tracks it
    separately, so it is excluded from the adaptive trigger.
    """
    f = _Frame.build(a, _h_matrix(h))
    return _distance(f, np.asarray(theta_dot, dtype=float), projected)


@dataclass
class _Candidates:
    distances: np.ndarray
    vectors: np.ndarray


def _score_candidates(
    f: _Frame,
    m: np.ndarray,
    v: np.ndarray,
    theta_dot: np.ndarray,
    pool: OperatorPool,
    cutoff: float,
    gauge: GaugeTerm,
    screen: int | None = None,
    exclude: np.ndarray | None = None,
) -> _Candidates:
    """Optimal distance after appending each pool member at ``theta = 0``.

    With ``screen`` set, members are first ranked by the Schur-complement
    estimate of the distance reduction and only the best ``screen`` are
    solved exactly; the rest are reported as ``inf``.
    """
    k = m.shape[0]
    w = -0.5j * pool.apply_all(f.phi)
    b_t = f.tangents.conj() @ f.phi
    b_w = w.conj() @ f.phi
    cross = 2 * np.real(f.tangents.conj() @ w.T + _gauge(b_t, b_w, gauge))
    g_diag = b_w.conj() ** 2 if gauge == "projected" else np.abs(b_w) ** 2
    diag = 2 * np.real(np.sum(np.abs(w) ** 2, axis=1) + g_diag)
    v_new = 2 * np.imag(f.h_mean * b_w.conj() + w.conj() @ f.h_phi)
    n = len(pool)
    distances = np.full(n, np.inf)
    mask = np.ones(n, dtype=bool) if exclude is None else ~exclude
    if screen is not None and screen < mask.sum():
        gain = _schur_gain(m, theta_dot, cross, diag, v_new, cutoff)
        gain[~mask] = -np.inf
        order = np.argsort(-gain, kind="stable")[:screen]
        mask = np.zeros(n, dtype=bool)
        mask[order] = True
    idx = np.flatnonzero(mask)
    m_aug = np.empty((idx.size, k + 1, k + 1))
    m_aug[:, :k, :k] = m
    m_aug[:, :k, k] = cross.T[idx]
    m_aug[:, k, :k] = cross.T[idx]
    m_aug[:, k, k] = diag[idx]
    v_aug = np.empty((idx.size, k + 1))
    v_aug[:, :k] = v
    v_aug[:, k] = v_new[idx]
    x, _ = _pinv_solve(m_aug, v_aug, cutoff)
    r = x[:, :k] @ f.tangents + x[:, k : k + 1] * w[idx] + 1j * f.h_phi
    distances[idx] = _residual_norm(r, f.phi, True)
    return _Candidates(distances, w)


def _schur_gain(m, theta_dot, cross, diag, v_new, cutoff) -> np.ndarray:
    """Distance reduction ``(v_c - m_c . theta_dot)^2 / (2 s_c)`` per candidate."""
    if m.size:
        u, sv, vh = np.linalg.svd(m)
        keep = sv > cutoff * sv[0] if sv[0] > 0 else np.zeros_like(sv, dtype=bool)
        proj = (u[:, keep].T @ cross) / sv[keep, None]
        schur = diag - np.sum((vh[keep] @ cross) * proj, axis=0)
        resid = v_new - cross.T @ theta_dot
    else:
        schur, resid = diag, v_new
    ok = schur > 1e-12 * np.maximum(diag, 1e-300)
    return np.where(ok, resid**2 / (2 * np.where(ok, schur, 1)), 0.0)


@dataclass
class _AdaptResult:
    ansatz: Ansatz
    frame: _Frame
    m: np.ndarray
    v: np.ndarray
    theta_dot: np.ndarray
    rank: int
    distance: float
    added: list[PauliString]


def _adapt(
    a: Ansatz,
    f: _Frame,
    pool: OperatorPool,
    threshold: float,
    max_adds: int,
    cutoff: float,
    gauge: GaugeTerm,
    screen: int | None = None,
) -> _AdaptResult:
    m, v = _assemble(f, gauge)
    theta_dot, rank = _solve(m, v, cutoff)
    dist = _distance(f, theta_dot)
    added = []
    while dist > threshold and len(added) < max_adds:
        exclude = None
        if a.n_layers:
            exclude = np.array([p == a.generators[-1] for p in pool.members])
        cand = _score_candidates(f, m, v, theta_dot, pool, cutoff, gauge, screen, exclude)
        scores = cand.distances
        best = int(np.argmin(scores))
        if not scores[best] < dist - IMPROVEMENT_TOL:
            break
        p = pool[best]
        a = a.append(p)
        f = replace(f, tangents=np.vstack([f.tangents, cand.vectors[best]]))
        m, v = _assemble(f, gauge)
        theta_dot, rank = _solve(m, v, cutoff)
        dist = _distance(f, theta_dot)
        added.append(p)
    if max_adds and len(added) == max_adds and dist > threshold:
        warnings.warn(
            f"adaptation stopped after {max_adds} additions with distance {dist:.3e}",
            RuntimeWarning,
        )
    return _AdaptResult(a, f, m, v, theta_dot, rank, dist, added)


def adapt_ansatz(
    a: Ansatz,
    pool: OperatorPool,
    h: EffectiveHamiltonian | np.ndarray,
    threshold: float,
    max_adds: int = 10,
    cutoff: float = 1e-8,
    gauge: GaugeTerm = "projected",
    screen: int | None = None,
) -> Ansatz:
    """Greedily append pool members (at ``theta = 0``) while the optimal
    McLachlan distance exceeds ``threshold``.

    Every candidate is scored by solving the enlarged linear system; the
    lowest distance wins with ties going to the earlier pool member.  A
    candidate equal to the current last layer is skipped.  The loop stops
    after ``max_adds`` additions or when no candidate improves the distance.
    ``screen`` limits exact scoring to the most promising members (see
    ``EngineConfig.candidate_screen``).
    """
    if not len(pool):
        raise ValueError("operator pool is empty")
    f = _Frame.build(a, _h_matrix(h))
    return _adapt(a, f, pool, threshold, max_adds, cutoff, gauge, screen).ansatz


@dataclass
class EngineConfig:
    dt: float
    t_final: float
    adaptive_threshold: float
    pool: OperatorPool
    regularization_cutoff: float = 1e-8
    max_adds_per_step: int = 10
    gauge: GaugeTerm = "projected"
    integrator: Literal["euler", "rk2"] = "euler"
    # exact scoring only for this many Schur-ranked candidates; None scores all
    candidate_screen: int | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.adaptive_threshold > 0:
            raise ValueError("adaptive_threshold must be positive")
        if self.t_final < 0:
            raise ValueError("t_final must be non-negative")
        if self.max_adds_per_step < 0:
            raise ValueError("max_adds_per_step must be non-negative")
        if self.integrator not in ("euler", "rk2"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.gauge not in ("projected", "conjugated"):
            raise ValueError(f"unknown gauge term {self.gauge!r}")
        if self.candidate_screen is not None and self.candidate_screen < 1:
            raise ValueError("candidate_screen must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


@dataclass
class StepReport:
    distance: float
    added: list[str]
    delta_gamma: float
    rank: int
    singular: bool = False


def _step(a: Ansatz, h: np.ndarray, h_a: np.ndarray, cfg: EngineConfig) -> tuple[Ansatz, StepReport]:
    f = _Frame.build(a, h)
    res = _adapt(a, f, cfg.pool, cfg.adaptive_threshold, cfg.max_adds_per_step,
                 cfg.regularization_cutoff, cfg.gauge, cfg.candidate_screen)
    a, f, theta_dot = res.ansatz, res.frame, res.theta_dot
    h_a_mean = float(np.vdot(f.phi, h_a @ f.phi).real)
    if cfg.integrator == "rk2" and a.n_layers:
        mid = replace(a, thetas=a.thetas + 0.5 * cfg.dt * theta_dot)
        fm = _Frame.build(mid, h)
        m_mid, v_mid = _assemble(fm, cfg.gauge)
        theta_dot, _ = _solve(m_mid, v_mid, cfg.regularization_cutoff)
        h_a_mean = float(np.vdot(fm.phi, h_a @ fm.phi).real)
    delta_gamma = 2 * h_a_mean * cfg.dt
    new = replace(a, thetas=a.thetas + cfg.dt * theta_dot, log_sq_norm=a.log_sq_norm - delta_gamma)
    report = StepReport(
        distance=res.distance,
        added=[str(p) for p in res.added],
        delta_gamma=delta_gamma,
        rank=res.rank,
        singular=bool(a.n_layers and res.rank == 0),
    )
    return new, report


def step(a: Ansatz, h: EffectiveHamiltonian, cfg: EngineConfig) -> tuple[Ansatz, StepReport]:
    """Adapt, solve for ``theta_dot``, advance ``theta`` and the log-norm by ``dt``."""
    return _step(a, _h_matrix(h), h.antihermitian_part, cfg)


def reconstruct(a: Ansatz) -> tuple[np.ndarray, complex]:
    """Unnormalized density matrix ``e^{log_sq_norm/2} devec(phi)`` and its trace."""
    rho = math.exp(a.log_sq_norm / 2) * devectorize(ansatz_state(a))
    return rho, complex(np.trace(rho))


class ReconstructionError(RuntimeError):
    pass


def run(
    model: LindbladModel,
    rho0: np.ndarray,
    cfg: EngineConfig,
    output_stride: int = 1,
    reference: TrajectoryRecord | None = None,
) -> TrajectoryRecord:
    """Propagate ``rho0`` over ``[0, t_final]`` with the variational engine.

    Observables are read from the trace-renormalized reconstruction, which
    also removes any global phase of the ansatz state.  When ``reference``
    is given (same output grid), the running deviation is logged.
    """
    p = model.padded()
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape == (model.dim, model.dim):
        rho0 = model.pad(rho0)
    heff = build_effective_hamiltonian(model)
    if cfg.pool.n_qubits != heff.n_qubits:
        raise ValueError(
            f"pool acts on {cfg.pool.n_qubits} qubits but the vectorized model needs {heff.n_qubits}"
        )
    h, h_a = heff.full, heff.antihermitian_part
    a = Ansatz.from_density_matrix(rho0)

    n_steps = cfg.n_steps
    record_at = set(range(0, n_steps + 1, output_stride)) | {n_steps}
    times, norms, traces, dists, sizes = [], [], [], [], []
    obs = {name: [] for name in p.observables}
    for i in range(n_steps + 1):
        if i < n_steps:
            new, report = _step(a, h, h_a, cfg)
            if report.added:
                logger.debug("step %d: added %s, distance %.3e", i, report.added, report.distance)
        else:
            f = _Frame.build(a, h)
            m, v = _assemble(f, cfg.gauge)
            td, rank = _solve(m, v, cfg.regularization_cutoff)
            report = StepReport(_distance(f, td), [], 0.0, rank)
        if i in record_at:
            rho_t, tr = reconstruct(a)
            if abs(tr) < RECONSTRUCTION_FLOOR:
                raise ReconstructionError(f"reconstructed trace {abs(tr):.3e} at step {i}")
            rho = rho_t / tr
            rho = (rho + rho.conj().T) / 2
            t = i * cfg.dt
            times.append(t)
            norms.append(math.exp(a.log_sq_norm / 2))
            traces.append(abs(tr))
            dists.append(report.distance)
            sizes.append(a.n_layers + len(report.added))
            for name, op in p.observables.items():
                obs[name].append(float(np.real(np.trace(op @ rho))))
            if reference is not None:
                j = len(times) - 1
                dev = max(abs(obs[k][-1] - reference.observables[k][j]) for k in obs)
                logger.info("t=%g deviation from reference %.3e", t, dev)
        if i < n_steps:
            a = new
    return TrajectoryRecord(
        times=np.array(times),
        observables={k: np.array(v) for k, v in obs.items()},
        frobenius_norm=np.array(norms),
        trace=np.array(traces),
        mclachlan_distance=np.array(dists),
        ansatz_size=np.array(sizes, dtype=int),
        time_unit=model.time_unit,
        metadata={
            "solver": "uavqd",
            "dt": cfg.dt,
            "t_final": cfg.t_final,
            "adaptive_threshold": cfg.adaptive_threshold,
            "pool": {"n_qubits": cfg.pool.n_qubits, "max_weight": cfg.pool.max_weight},
            "regularization_cutoff": cfg.regularization_cutoff,
            "max_adds_per_step": cfg.max_adds_per_step,
            "gauge": cfg.gauge,
            "integrator": cfg.integrator,
            "candidate_screen": cfg.candidate_screen,
            "final_ansatz": [str(g) for g in a.generators],
        },
    )
