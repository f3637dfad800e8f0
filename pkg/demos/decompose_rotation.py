import numpy as np
from scipy.linalg import expm

from uavqd import decompose_rotation, gate_count, pauli_matrix, sequence_unitary

# exp(-i theta XYZI / 2): rotate X and Y onto Z, gather parity with CNOTs,
# apply one RZ, then undo.
seq = decompose_rotation("XYZI", 0.37)
print(seq.to_text())
print(gate_count(seq))

u = sequence_unitary(seq)
ref = expm(-0.5j * 0.37 * pauli_matrix("XYZI"))
print("max |U - exp(-i theta P/2)| =", np.abs(u - ref).max())

# Cost grows linearly with weight.
for k in range(1, 7):
    c = gate_count(decompose_rotation("Y" * k, 0.1))
    print(k, c, sum(c.values()))
