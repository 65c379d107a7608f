"""Fixed gate matrices and the unitarity check used by every gate entry point."""

import numpy as np

from clustermps.config import UNITARY_TOL
from clustermps.core.errors import ValidationError

I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)

PLUS = np.array([1, 1], dtype=np.complex128) / np.sqrt(2)
ZERO = np.array([1, 0], dtype=np.complex128)

# Two-qubit gates act on the basis index 2 * i_first + i_second.
CPHASE = np.diag([1, 1, 1, -1]).astype(np.complex128)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)


def phase(theta: float) -> np.ndarray:
    """diag(1, e^{i theta})."""
    return np.diag([1.0, np.exp(1j * theta)]).astype(np.complex128)


def xy_basis_change(theta: float) -> np.ndarray:
    """
    Unitary mapping |0> + e^{i theta}|1> to |0> and |0> - e^{i theta}|1> to |1>
    (up to normalization), i.e. H . diag(1, e^{-i theta}).
    """
    return H @ phase(-theta)


def j_gate(alpha: float) -> np.ndarray:
    """H . diag(1, e^{i alpha}); one step of a linear cluster wire."""
    return H @ phase(alpha)


def check_unitary(matrix: np.ndarray, dim: int, tol: float = UNITARY_TOL) -> np.ndarray:
    """
    Validates shape and unitarity, returning the matrix as complex128.

    Raises:
        ValidationError: If the matrix is not dim x dim or not unitary within tol.
    """
    m = np.asarray(matrix, dtype=np.complex128)
    if m.shape != (dim, dim):
        raise ValidationError(f"Expected a {dim}x{dim} matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("Gate contains NaN or Inf entries")
    deviation = np.max(np.abs(m.conj().T @ m - np.eye(dim)))
    if deviation > tol:
        raise ValidationError(f"Gate is not unitary (max |U^dag U - I| = {deviation:.3e})")
    return m
