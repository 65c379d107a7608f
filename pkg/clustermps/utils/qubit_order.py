"""
The one place where dense amplitude vectors and per-qubit tensors are converted.

Convention: amplitude index = sum_k i_k * 2**k, i.e. bit k of the index is
qubit k (chain position k). Tensors have one axis per qubit, axis k = qubit k.
"""

import numpy as np


def amplitudes_to_tensor(amplitudes: np.ndarray, num_qubits: int) -> np.ndarray:
    # reshape puts the most significant bit (qubit n-1) on axis 0
    return np.asarray(amplitudes).reshape((2,) * num_qubits).transpose(
        tuple(reversed(range(num_qubits)))
    )


def tensor_to_amplitudes(tensor: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(
        tensor.transpose(tuple(reversed(range(tensor.ndim))))
    ).reshape(-1)


def basis_index(bits) -> int:
    """Amplitude index of the computational basis state |bits[0] bits[1] ...>."""
    return sum(int(b) << k for k, b in enumerate(bits))
