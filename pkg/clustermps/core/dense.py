"""
Brute-force 2^n statevector oracle.

Deliberately plain: every function here is a direct matrix action on the
amplitude tensor so it can be trusted by reading. Bit k of an amplitude index
is qubit k (see utils/qubit_order.py).
"""

from typing import Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from clustermps.config import DENSE_LIMIT, EPS_PROB, EPS_TRUNC
from clustermps.core.cluster import ClusterSpec
from clustermps.core.errors import ValidationError
from clustermps.core.gates import CPHASE, PLUS
from clustermps.core.linalg import clamped_eigvalsh
from clustermps.core.mps import select_outcome
from clustermps.core.patterns import MeasurementPattern, correction_unitary, resolve_basis
from clustermps.utils.qubit_order import amplitudes_to_tensor, tensor_to_amplitudes


def _num_qubits(psi: np.ndarray) -> int:
    n = int(psi.size).bit_length() - 1
    if (1 << n) != psi.size:
        raise ValidationError(f"State vector length {psi.size} is not a power of two")
    if n > DENSE_LIMIT:
        raise ValidationError(f"{n} qubits exceeds the dense limit of {DENSE_LIMIT}")
    return n


def product_state(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Tensor product with vectors[k] on qubit k."""
    t = np.ones((), dtype=np.complex128)
    for v in vectors:
        v = np.asarray(v, dtype=np.complex128)
        t = np.multiply.outer(t, v / np.linalg.norm(v))
    return tensor_to_amplitudes(t)


def plus_state(n: int) -> np.ndarray:
    return product_state([PLUS] * n)


def dense_apply_single_qubit(psi: np.ndarray, k: int, u: np.ndarray) -> np.ndarray:
    n = _num_qubits(psi)
    t = amplitudes_to_tensor(psi, n)
    t = np.moveaxis(np.tensordot(u, t, axes=([1], [k])), 0, k)
    return tensor_to_amplitudes(t)


def dense_apply_two_qubit(psi: np.ndarray, a: int, b: int, gate: np.ndarray) -> np.ndarray:
    """Gate acts on the basis index 2 * i_a + i_b."""
    n = _num_qubits(psi)
    if a == b:
        raise ValidationError("Two-qubit gate needs two distinct qubits")
    t = amplitudes_to_tensor(psi, n)
    g = np.asarray(gate).reshape(2, 2, 2, 2)
    t = np.moveaxis(np.tensordot(g, t, axes=([2, 3], [a, b])), [0, 1], [a, b])
    return tensor_to_amplitudes(t)


def dense_cphase(psi: np.ndarray, a: int, b: int) -> np.ndarray:
    return dense_apply_two_qubit(psi, a, b, CPHASE)


def dense_measure(
    psi: np.ndarray,
    k: int,
    outcome: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, float, Optional[np.ndarray]]:
    """
    Born probabilities of qubit k and the normalized state of the other qubits
    after projecting onto outcome (sampled with rng when outcome is None).
    The projected state is None if no outcome is given or drawn.
    """
    n = _num_qubits(psi)
    t = amplitudes_to_tensor(psi, n)
    branches = [np.take(t, i, axis=k) for i in (0, 1)]
    p0, p1 = (float(np.sum(np.abs(b) ** 2)) for b in branches)
    if outcome is None and rng is not None:
        outcome = select_outcome(rng.random(), p0, p1)
    if outcome is None:
        return p0, p1, None
    p = (p0, p1)[outcome]
    if p <= EPS_PROB:
        raise ValidationError(f"Outcome {outcome} on qubit {k} has probability {p:.3e}")
    return p0, p1, tensor_to_amplitudes(branches[outcome]) / np.sqrt(p)


def schmidt_spectrum(psi: np.ndarray, k: int) -> np.ndarray:
    """
    Schmidt coefficients between qubits 0..k-1 and k..n-1, descending, from
    the eigenvalues of the smaller reduced density matrix (zeros included).
    """
    n = _num_qubits(psi)
    # Row-major flattening of the tensor: first k qubits form the row index.
    m = amplitudes_to_tensor(psi, n).reshape(2 ** k, -1)
    rho = m @ m.conj().T if m.shape[0] <= m.shape[1] else m.T @ m.conj()
    return np.sqrt(clamped_eigvalsh(rho))


def schmidt_rank(psi: np.ndarray, k: int, eps: float = EPS_TRUNC) -> int:
    n = _num_qubits(psi)
    s = np.linalg.svd(amplitudes_to_tensor(psi, n).reshape(2 ** k, -1), compute_uv=False)
    return int(np.count_nonzero(s > eps))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 for normalized vectors; insensitive to global phase."""
    return float(abs(np.vdot(a, b)) ** 2)


def dense_build_cluster(spec: ClusterSpec) -> np.ndarray:
    spec.validate()
    psi = product_state([spec.inputs.get(label, PLUS) for label in spec.labels()])
    for a, b in spec.edges:
        psi = dense_cphase(psi, spec.site_index(a), spec.site_index(b))
    return psi


def dense_replay(
    psi: np.ndarray,
    labels: Sequence[Hashable],
    pattern: MeasurementPattern,
    outcomes: Dict[Hashable, int],
) -> Tuple[np.ndarray, List[Hashable]]:
    """
    Runs pattern with forced outcomes and applies the corrections. Returns the
    state of the unmeasured qubits and their labels.
    """
    labels = list(labels)
    for step in pattern.steps:
        k = labels.index(step.target)
        psi = dense_apply_single_qubit(psi, k, resolve_basis(step, outcomes))
        _, _, psi = dense_measure(psi, k, outcomes[step.target])
        labels.pop(k)
    for c in pattern.corrections:
        psi = dense_apply_single_qubit(psi, labels.index(c.target), correction_unitary(c, outcomes))
    return psi, labels


def enumerate_branches(
    psi: np.ndarray,
    pattern: MeasurementPattern,
    labels: Optional[Sequence[Hashable]] = None,
) -> Dict[str, float]:
    """
    Probability of every outcome string of pattern (outcomes in step order).
    Branches with probability at or below EPS_PROB are not expanded.
    """
    n = _num_qubits(psi)
    labels = list(labels) if labels is not None else list(range(n))
    pattern.validate(labels)
    result: Dict[str, float] = {}

    def walk(state: np.ndarray, current: List[Hashable], outcomes: Dict, prefix: str, weight: float):
        if len(prefix) == len(pattern.steps):
            result[prefix] = weight
            return
        step = pattern.steps[len(prefix)]
        k = current.index(step.target)
        rotated = dense_apply_single_qubit(state, k, resolve_basis(step, outcomes))
        p = dense_measure(rotated, k)[:2]
        rest = current[:k] + current[k + 1:]
        for bit in (0, 1):
            if p[bit] <= EPS_PROB:
                continue
            post = dense_measure(rotated, k, bit)[2]
            walk(post, rest, {**outcomes, step.target: bit}, prefix + str(bit), weight * p[bit])

    walk(np.asarray(psi, dtype=np.complex128), labels, {}, "", 1.0)
    return result
