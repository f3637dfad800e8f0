import time

import numpy as np

from uavqd import EngineConfig, build_pool, exact_evolve, fmo_initial, fmo_model, run

# Five levels: ground, three chromophores and a sink.  Energies come in eV,
# rates in 1/fs; the model is built on a picosecond clock.
model = fmo_model()
print(model.dim, "levels padded to", model.padded_dim, "->", 2 * model.n_qubits, "qubit vectors")

rho0 = fmo_initial(1)
t = np.linspace(0, 0.3, 31)
exact = exact_evolve(model, rho0, t)

# Weight-4 pool on six qubits: 1908 candidates per adaptation.
pool = build_pool(6, 4)
print("pool size", len(pool))

cfg = EngineConfig(dt=1e-3, t_final=0.3, adaptive_threshold=1e-3, pool=pool,
                   regularization_cutoff=1e-6, integrator="rk2")
start = time.perf_counter()
rec = run(model, rho0, cfg, output_stride=10)
print(f"variational run took {time.perf_counter() - start:.0f} s")

names = list(exact.observables)
print("t[fs] " + " ".join(f"{n:>7}" for n in names))
for i in range(0, len(t), 5):
    print(f"{1000 * t[i]:5.0f} " + " ".join(f"{rec.observables[n][i]:7.4f}" for n in names))

dev = {n: np.abs(rec.observables[n] - exact.observables[n]).max() for n in names}
print("max deviation per population:", {k: round(float(v), 4) for k, v in dev.items()})
print("ansatz grew to", rec.ansatz_size[-1], "layers")
