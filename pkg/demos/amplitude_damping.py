import numpy as np

from uavqd import (
    EngineConfig,
    amplitude_damping_exact,
    amplitude_damping_model,
    build_effective_hamiltonian,
    build_pool,
    run,
    vectorize,
)
from uavqd.models import AMPLITUDE_DAMPING_RHO0

# A single qubit decaying from |1> to |0> at gamma = 1.52e9 /s.
# The model clock ticks in nanoseconds, so the rate is 1.52.
model = amplitude_damping_model()
rho0 = AMPLITUDE_DAMPING_RHO0
print(np.round(rho0, 6))

# The density matrix becomes a 4-vector (column stacking) and the master
# equation becomes d nu/dt = -i H_eff nu on two qubits.
heff = build_effective_hamiltonian(model)
nu0 = vectorize(rho0)
print("|nu0| =", np.linalg.norm(nu0))

# H_eff is not Hermitian; its anti-Hermitian part drains the norm of nu.
h_a = heff.antihermitian_part
print("<H_a> at t=0:", np.vdot(nu0, h_a @ nu0).real, "(= 0.5625 gamma)")

# Start from the normalized vector with no layers, grow the ansatz from all
# one- and two-qubit Pauli strings whenever the McLachlan distance tops 1e-6.
cfg = EngineConfig(dt=0.04, t_final=1.0, adaptive_threshold=1e-6,
                   pool=build_pool(2, 2), integrator="rk2")
rec = run(model, rho0, cfg)

p1, coh = amplitude_damping_exact(rec.times, 1.52)
print(f"{'t [ns]':>7} {'pop1':>9} {'exact':>9} {'layers':>6}")
for t, p, q, k in zip(rec.times[::5], rec.observables["pop1"][::5], p1[::5], rec.ansatz_size[::5]):
    print(f"{t:7.2f} {p:9.5f} {q:9.5f} {k:6d}")

print("max deviation:", np.abs(rec.observables["pop1"] - p1).max())
print("generators used:", rec.metadata["final_ansatz"])
