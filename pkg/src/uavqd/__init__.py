"""Adaptive variational simulation of Lindblad dynamics on vectorized density matrices."""

__version__ = "0.1.0"

from .decompose import GateSequence, decompose_rotation, gate_count, sequence_unitary
from .lindblad import (
    EffectiveHamiltonian,
    LindbladModel,
    SolverDivergence,
    TrajectoryRecord,
    build_effective_hamiltonian,
    devectorize,
    exact_evolve,
    expectation,
    vectorize,
)
from .models import (
    CollectiveChannels,
    EmitterGeometry,
    all_excited,
    amplitude_damping_exact,
    amplitude_damping_model,
    collective_jump_ops,
    dicke_channels,
    dicke_couplings,
    dicke_model,
    emission_rate,
    fmo_initial,
    fmo_model,
)
from .pauli import OperatorPool, PauliString, apply_pauli, apply_rotation, build_pool, pauli_matrix, pool_size
from .variational import (
    Ansatz,
    EngineConfig,
    ReconstructionError,
    StepReport,
    adapt_ansatz,
    ansatz_state,
    assemble_M_V,
    mclachlan_distance,
    reconstruct,
    run,
    solve_theta_dot,
    step,
    tangent_state,
)
