import logging
from typing import Tuple

import numpy as np
import scipy.linalg

from clustermps.config import EPS_CLAMP, EPS_TRUNC
from clustermps.core.errors import InvariantViolation

logger = logging.getLogger(__name__)


def _svd(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    # gesdd occasionally fails to converge on ill-conditioned blocks; gesvd is
    # slower but robust.
    try:
        return scipy.linalg.svd(
            matrix, full_matrices=False, lapack_driver="gesdd", check_finite=False
        )
    except np.linalg.LinAlgError:
        logger.debug("gesdd did not converge on a %s block, retrying with gesvd", matrix.shape)
    try:
        return scipy.linalg.svd(
            matrix, full_matrices=False, lapack_driver="gesvd", check_finite=False
        )
    except np.linalg.LinAlgError as e:
        raise InvariantViolation(f"SVD failed with both LAPACK drivers: {e}")


def truncated_svd(
    matrix: np.ndarray, eps: float = EPS_TRUNC
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Schmidt-decomposes a 2D block and drops numerically-zero coefficients.

    The right singular vectors are the eigenvectors of the reduced density
    matrix rho = matrix^T conj(matrix) of the column index, and the squared
    singular values are its eigenvalues; working on the square root keeps
    small Schmidt coefficients accurate to machine precision.

    Args:
        matrix: Block of shape (rows, cols).
        eps: Singular values at or below this are removed.

    Returns:
        (u, s, vh) with s descending, strictly above eps and normalized so
        that sum(s**2) == 1.

    Raises:
        InvariantViolation: If every singular value is pruned.
    """
    u, s, vh = _svd(matrix)
    keep = int(np.count_nonzero(s > eps))
    if keep == 0:
        raise InvariantViolation(
            f"All Schmidt coefficients of a {matrix.shape} block are below {eps:g}"
        )
    u, s, vh = u[:, :keep], s[:keep], vh[:keep, :]
    return u, s / np.linalg.norm(s), vh


def clamped_eigvalsh(rho: np.ndarray, clamp: float = EPS_CLAMP) -> np.ndarray:
    """
    Eigenvalues of a Hermitian PSD matrix, descending, with rounding noise
    below zero clamped.

    Raises:
        InvariantViolation: If an eigenvalue is below -clamp.
    """
    values = scipy.linalg.eigvalsh(rho)[::-1]
    if values.size and values[-1] < -clamp:
        raise InvariantViolation(
            f"Reduced density matrix has eigenvalue {values[-1]:.3e} < -{clamp:g}"
        )
    return np.clip(values, 0.0, None)
