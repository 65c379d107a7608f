"""Shared numerical helpers for the test suite."""

import numpy as np
from scipy.stats import unitary_group

from clustermps.core.dense import fidelity, schmidt_spectrum
from clustermps.core.mps import MpsState


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return psi / np.linalg.norm(psi)


def random_qubit(rng: np.random.Generator) -> np.ndarray:
    return random_state(1, rng)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(dim, random_state=rng)


def align_phase(reference: np.ndarray, other: np.ndarray) -> np.ndarray:
    """other multiplied by the global phase that best matches reference."""
    overlap = np.vdot(other, reference)
    if abs(overlap) == 0.0:
        return other
    return other * (overlap / abs(overlap))


def assert_same_state(expected: np.ndarray, actual: np.ndarray, atol: float = 1e-10):
    assert expected.shape == actual.shape
    np.testing.assert_allclose(align_phase(expected, actual), expected, rtol=0.0, atol=atol)


def assert_fidelity_one(expected: np.ndarray, actual: np.ndarray, tol: float = 1e-9):
    assert expected.shape == actual.shape
    assert fidelity(expected, actual) >= 1.0 - tol


def padded_squares(a: np.ndarray, b: np.ndarray):
    size = max(a.size, b.size)
    pa, pb = np.zeros(size), np.zeros(size)
    pa[: a.size] = np.sort(a)[::-1] ** 2
    pb[: b.size] = np.sort(b)[::-1] ** 2
    return pa, pb


def assert_spectra_match(state: MpsState, psi: np.ndarray, atol: float = 1e-9):
    """Every bond's lambda^2 equals the dense reduced-density-matrix spectrum."""
    for k, lam in enumerate(state.bonds):
        exact, stored = padded_squares(schmidt_spectrum(psi, k + 1), lam)
        np.testing.assert_allclose(stored, exact, rtol=0.0, atol=atol, err_msg=f"bond {k}")
