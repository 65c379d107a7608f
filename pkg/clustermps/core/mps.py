import json
import logging
from dataclasses import dataclass
from typing import Hashable, List, Optional, Sequence, Tuple

import numpy as np

from clustermps.config import (
    CANONICAL_TOL,
    DENSE_LIMIT,
    EPS_PROB,
    EPS_TRUNC,
    NORM_TOL,
    SCHEMA_VERSION,
)
from clustermps.core.errors import InvariantViolation, ValidationError
from clustermps.core.gates import I2, check_unitary
from clustermps.core.linalg import truncated_svd
from clustermps.utils.qubit_order import amplitudes_to_tensor, tensor_to_amplitudes

logger = logging.getLogger(__name__)

# Virtual bond vector at both chain ends.
_BOUNDARY = np.ones(1)


@dataclass(frozen=True)
class ChiProfile:
    """Schmidt numbers of every bond of a chain, in chain order."""

    bonds: Tuple[int, ...]

    @property
    def max_chi(self) -> int:
        return max(self.bonds, default=1)


def select_outcome(u: float, p0: float, p1: float, eps_prob: float = EPS_PROB) -> int:
    """
    Maps one uniform draw in [0, 1) to a measurement outcome.

    Outcomes whose probability is at or below eps_prob are never selected.
    """
    if p1 <= eps_prob:
        return 0
    if p0 <= eps_prob:
        return 1
    return 0 if u * (p0 + p1) < p0 else 1


class MpsState:
    """
    An n-qubit pure state in Vidal canonical (Gamma/lambda) form.

    sites[k] is the Gamma tensor of chain position k with shape
    (chi_left, chi_right, 2); bonds[k] holds the Schmidt coefficients between
    positions k and k+1 in descending order; labels[k] is the external
    identifier of the qubit currently at position k. Labels survive the
    removal of measured qubits, positions do not.

    Single-qubit and two-site gates mutate the state in place; projections
    return a new, shorter state.
    """

    def __init__(
        self,
        sites: Sequence[np.ndarray],
        bonds: Sequence[np.ndarray],
        labels: Optional[Sequence[Hashable]] = None,
    ):
        self.sites: List[np.ndarray] = [np.asarray(s, dtype=np.complex128) for s in sites]
        self.bonds: List[np.ndarray] = [np.asarray(b, dtype=np.float64) for b in bonds]
        self.labels: List[Hashable] = (
            list(labels) if labels is not None else list(range(len(self.sites)))
        )
        self._positions = {label: k for k, label in enumerate(self.labels)}
        self._check_shapes()

    def _check_shapes(self):
        n = len(self.sites)
        if len(self.bonds) != max(n - 1, 0):
            raise ValidationError(f"{n} sites need {max(n - 1, 0)} bonds, got {len(self.bonds)}")
        if len(self.labels) != n:
            raise ValidationError(f"{n} sites need {n} labels, got {len(self.labels)}")
        if len(self._positions) != n:
            raise ValidationError("Qubit labels must be unique")

        for k, gamma in enumerate(self.sites):
            if gamma.ndim != 3 or gamma.shape[2] != 2:
                raise ValidationError(f"Site {k} has shape {gamma.shape}, expected (chi_l, chi_r, 2)")
            if not np.all(np.isfinite(gamma)):
                raise ValidationError(f"Site {k} contains NaN or Inf")
            expected_left = self.bonds[k - 1].size if k > 0 else 1
            expected_right = self.bonds[k].size if k < n - 1 else 1
            if gamma.shape[:2] != (expected_left, expected_right):
                raise ValidationError(
                    f"Site {k} has bond dimensions {gamma.shape[:2]}, "
                    f"expected {(expected_left, expected_right)}"
                )

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def from_dense(
        cls,
        psi: np.ndarray,
        labels: Optional[Sequence[Hashable]] = None,
        eps: float = EPS_TRUNC,
        limit: int = DENSE_LIMIT,
    ) -> "MpsState":
        """
        Builds the canonical form of a dense state by sequential Schmidt
        decompositions, splitting off one qubit at a time from the left.

        Args:
            psi: Amplitude vector of length 2**n (bit k of the index is qubit k).
            labels: Optional qubit labels, defaults to 0..n-1.
            eps: Schmidt coefficients at or below this are dropped.
            limit: Largest accepted qubit count.

        Raises:
            ValidationError: If psi is empty, not a power of two in length,
                above the dense limit, or not normalized within NORM_TOL.
        """
        psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
        n = int(psi.size).bit_length() - 1
        if psi.size < 2 or (1 << n) != psi.size:
            raise ValidationError(f"State vector length {psi.size} is not 2**n with n >= 1")
        if n > limit:
            raise ValidationError(f"{n} qubits exceeds the dense limit of {limit}")
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"State is not normalized (norm = {norm:.12f})")

        # Row-major flattening of the tensor puts qubit 0 first.
        rest = amplitudes_to_tensor(psi / norm, n).reshape(1, -1)
        lam_prev = _BOUNDARY
        sites, bonds = [], []
        for _ in range(n - 1):
            chi_l = rest.shape[0]
            u, s, vh = truncated_svd(rest.reshape(chi_l * 2, -1), eps)
            sites.append((u.reshape(chi_l, 2, -1) / lam_prev[:, None, None]).transpose(0, 2, 1))
            bonds.append(s)
            rest = s[:, None] * vh
            lam_prev = s
        sites.append((rest.reshape(-1, 2) / lam_prev[:, None])[:, None, :])
        return cls(sites, bonds, labels)

    @classmethod
    def product(
        cls, vectors: Sequence[np.ndarray], labels: Optional[Sequence[Hashable]] = None
    ) -> "MpsState":
        """Product state with one normalized 2-vector per qubit; every chi is 1."""
        sites = []
        for k, v in enumerate(vectors):
            v = np.asarray(v, dtype=np.complex128).reshape(2)
            norm = np.linalg.norm(v)
            if norm == 0.0:
                raise ValidationError(f"Zero vector given for qubit {k}")
            sites.append((v / norm).reshape(1, 1, 2))
        return cls(sites, [_BOUNDARY.copy() for _ in range(max(len(sites) - 1, 0))], labels)

    def copy(self) -> "MpsState":
        return MpsState(
            [s.copy() for s in self.sites], [b.copy() for b in self.bonds], self.labels
        )

    # ------------------------------------------------------------------
    # Accessors
    # ------------------------------------------------------------------

    @property
    def num_sites(self) -> int:
        return len(self.sites)

    def __len__(self) -> int:
        return len(self.sites)

    def __repr__(self) -> str:
        return f"MpsState(n={self.num_sites}, chi={self.chi_profile().max_chi})"

    def position(self, label: Hashable) -> int:
        """Current chain position of the qubit with the given label."""
        try:
            return self._positions[label]
        except (KeyError, TypeError):
            raise ValidationError(f"No qubit labelled {label!r} in the state")

    def chi_profile(self) -> ChiProfile:
        return ChiProfile(tuple(b.size for b in self.bonds))

    def parameter_count(self) -> int:
        """Number of stored scalars, bounded by (2 chi^2 + chi) n."""
        return sum(s.size for s in self.sites) + sum(b.size for b in self.bonds)

    def _check_site(self, k: int):
        if not isinstance(k, (int, np.integer)) or not 0 <= k < self.num_sites:
            raise ValidationError(f"Site {k} is out of range for a {self.num_sites}-site chain")

    def left_lambda(self, k: int) -> np.ndarray:
        return self.bonds[k - 1] if k > 0 else _BOUNDARY

    def right_lambda(self, k: int) -> np.ndarray:
        return self.bonds[k] if k < self.num_sites - 1 else _BOUNDARY

    # ------------------------------------------------------------------
    # Dense conversion
    # ------------------------------------------------------------------

    def to_dense(self, limit: int = DENSE_LIMIT) -> np.ndarray:
        """
        Contracts the chain into the 2**n amplitude vector.

        Raises:
            ValidationError: If n exceeds the dense limit.
        """
        n = self.num_sites
        if n > limit:
            raise ValidationError(f"{n} qubits exceeds the dense limit of {limit}")
        if n == 0:
            return np.ones(1, dtype=np.complex128)

        # axes: (i_0, ..., i_k, alpha_k)
        t = self.sites[0][0].T
        for k in range(1, n):
            t = np.tensordot(t * self.bonds[k - 1], self.sites[k], axes=([-1], [0]))
            t = np.moveaxis(t, -1, -2)
        return tensor_to_amplitudes(t[..., 0])

    # ------------------------------------------------------------------
    # Gates
    # ------------------------------------------------------------------

    def apply_single_qubit(self, k: int, u: np.ndarray):
        """
        Absorbs a single-qubit unitary into Gamma of site k.

        Gamma'[:, :, i] = sum_j U[i, j] Gamma[:, :, j]; the bond vectors are
        untouched because a local unitary does not change any Schmidt spectrum.

        Raises:
            ValidationError: If k is invalid or u is not a 2x2 unitary.
        """
        self._check_site(k)
        u = check_unitary(u, 2)
        if np.array_equal(u, I2):
            return
        self.sites[k] = np.einsum("ij,abj->abi", u, self.sites[k])

    def apply_two_site_gate(self, k: int, gate: np.ndarray, eps: float = EPS_TRUNC):
        """
        Applies a 4x4 unitary to the adjacent sites (k, k+1) and restores the
        canonical form on bond k.

        The gate acts on the basis index 2 * i_k + i_{k+1}. Only sites k, k+1
        and bond k change; the bond dimension can at most double.

        Raises:
            ValidationError: If k, k+1 are not both valid sites or the gate is
                not unitary.
        """
        if not 0 <= k < self.num_sites - 1:
            raise ValidationError(
                f"Sites ({k}, {k + 1}) are not an adjacent pair in a {self.num_sites}-site chain"
            )
        g = check_unitary(gate, 4).reshape(2, 2, 2, 2)
        lam_l, lam_m, lam_r = self.left_lambda(k), self.bonds[k], self.right_lambda(k + 1)

        theta = np.einsum(
            "a,abi,b,bcj,c->aijc", lam_l, self.sites[k], lam_m, self.sites[k + 1], lam_r
        )
        theta = np.einsum("klij,aijc->aklc", g, theta)
        chi_l, chi_r = lam_l.size, lam_r.size
        u, s, vh = truncated_svd(theta.reshape(chi_l * 2, 2 * chi_r), eps)

        self.sites[k] = (u.reshape(chi_l, 2, -1) / lam_l[:, None, None]).transpose(0, 2, 1)
        self.sites[k + 1] = (vh.reshape(-1, 2, chi_r) / lam_r[None, None, :]).transpose(0, 2, 1)
        self.bonds[k] = s

    # ------------------------------------------------------------------
    # Measurement
    # ------------------------------------------------------------------

    def outcome_probabilities(self, k: int) -> Tuple[float, float]:
        """
        Born probabilities of a computational-basis measurement of site k.

        By orthonormality of the Schmidt vectors on both sides,
        p(i) = sum |lambda_left Gamma^i lambda_right|^2. The state is not modified.
        """
        self._check_site(k)
        a = self.left_lambda(k)[:, None, None] * self.sites[k] * self.right_lambda(k)[None, :, None]
        p = np.sum(np.abs(a) ** 2, axis=(0, 1))
        return float(p[0]), float(p[1])

    def project_and_update(
        self,
        k: int,
        outcome: int,
        eps: float = EPS_TRUNC,
        eps_prob: float = EPS_PROB,
        check: bool = False,
        tol: float = CANONICAL_TOL,
    ) -> "MpsState":
        """
        Projects site k onto a computational-basis outcome, removes the qubit
        and recomputes the canonical form of the remaining n-1 qubits.

        The post-measurement state is sum_ab A_ab |L_a>|R_b>, with A the
        renormalized lambda.Gamma^r.lambda block of site k and L/R the old
        Schmidt vectors either side of it. Its Schmidt decomposition fixes the
        new bond joining k-1 and k+1; from there one sweep runs right to the
        chain end and one runs left to the start, each step taking the Schmidt
        decomposition of the next lambda-weighted block expressed in the new
        basis of the previous step.

        Args:
            k: Chain position to measure.
            outcome: 0 or 1.
            eps: Schmidt-coefficient pruning threshold.
            eps_prob: Minimum admissible outcome probability.
            check: Verify the canonical form of the result.
            tol: Tolerance of that verification.

        Returns:
            A new MpsState without the measured qubit.

        Raises:
            ValidationError: If k is invalid, outcome is not a bit, or its
                probability is at or below eps_prob.
            InvariantViolation: If check is set and the result is not canonical.
        """
        self._check_site(k)
        if outcome not in (0, 1):
            raise ValidationError(f"Outcome must be 0 or 1, got {outcome!r}")
        p = self.outcome_probabilities(k)[outcome]
        if p <= eps_prob:
            raise ValidationError(
                f"Outcome {outcome} on site {k} has probability {p:.3e} <= {eps_prob:g}"
            )

        n = self.num_sites
        a = (
            self.left_lambda(k)[:, None]
            * self.sites[k][:, :, outcome]
            * self.right_lambda(k)[None, :]
            / np.sqrt(p)
        )
        u, s, vh = truncated_svd(a, eps)

        left_sites, left_bonds = self._sweep_left(k - 1, s, u, eps)
        right_sites, right_bonds = self._sweep_right(k + 1, s, vh, eps)
        joined = [s] if 0 < k < n - 1 else []

        result = MpsState(
            left_sites + right_sites,
            left_bonds + joined + right_bonds,
            self.labels[:k] + self.labels[k + 1:],
        )
        logger.debug(
            "Projected site %d (%r) onto %d with p=%.6f, chi now %s",
            k, self.labels[k], outcome, p, result.chi_profile().bonds,
        )
        if check and not result.check_canonical(tol):
            raise InvariantViolation(f"Canonical form lost after measuring site {k}")
        return result

    def measure(
        self, k: int, rng: np.random.Generator, **kwargs
    ) -> Tuple[int, "MpsState"]:
        """
        Samples a computational-basis outcome of site k and projects onto it.

        Consumes exactly one rng.random() draw. Keyword arguments are passed
        on to project_and_update.
        """
        p0, p1 = self.outcome_probabilities(k)
        outcome = select_outcome(rng.random(), p0, p1, kwargs.get("eps_prob", EPS_PROB))
        return outcome, self.project_and_update(k, outcome, **kwargs)

    def collapse_prefix(
        self, start: int, boundary: np.ndarray, eps: float = EPS_TRUNC
    ) -> "MpsState":
        """
        Canonical form of sum_a boundary[a] |R_a>, where R_a are the right
        Schmidt vectors of the bond left of position start.

        This is the state of qubits start..n-1 once every qubit before start
        has been projected and the projections accumulated into boundary.
        """
        if start == 0:
            return self.copy()
        if start == self.num_sites:
            return MpsState([], [], [])
        _, s, vh = truncated_svd(np.asarray(boundary, dtype=np.complex128).reshape(1, -1), eps)
        sites, bonds = self._sweep_right(start, s, vh, eps)
        return MpsState(sites, bonds, self.labels[start:])

    def _sweep_right(
        self, start: int, lam: np.ndarray, head: np.ndarray, eps: float
    ) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        # head[beta, a]: new Schmidt vector beta of the bond left of `start`
        # in the basis of the old ones; lam: its new coefficients.
        sites, bonds = [], []
        n = self.num_sites
        for j in range(start, n):
            lam_next = self.right_lambda(j)
            block = (
                lam[:, None, None]
                * np.einsum("ba,aci->bic", head, self.sites[j])
                * lam_next[None, None, :]
            )
            chi_l = lam.size
            u, s, vh = truncated_svd(block.reshape(chi_l * 2, -1), eps)
            sites.append((u.reshape(chi_l, 2, -1) / lam[:, None, None]).transpose(0, 2, 1))
            if j < n - 1:
                bonds.append(s)
            head, lam = vh, s
        return sites, bonds

    def _sweep_left(
        self, stop: int, lam: np.ndarray, tail: np.ndarray, eps: float
    ) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        # tail[a, beta]: new Schmidt vector beta of the bond right of `stop`
        # in the basis of the old ones.
        sites, bonds = [], []
        for j in range(stop, -1, -1):
            lam_prev = self.left_lambda(j)
            block = (
                lam_prev[:, None, None]
                * np.einsum("abi,bc->aci", self.sites[j], tail)
                * lam[None, :, None]
            )
            chi_r = lam.size
            u, s, vh = truncated_svd(block.reshape(block.shape[0], chi_r * 2), eps)
            sites.append(vh.reshape(-1, chi_r, 2) / lam[None, :, None])
            if j > 0:
                bonds.append(s)
            tail, lam = u, s
        sites.reverse()
        bonds.reverse()
        return sites, bonds

    # ------------------------------------------------------------------
    # Verification
    # ------------------------------------------------------------------

    def check_canonical(self, tol: float = CANONICAL_TOL) -> bool:
        """
        True iff every bond vector is positive, descending and normalized, and
        every site maps orthonormal Schmidt vectors to orthonormal Schmidt
        vectors in both directions:

            sum_{a,i} lam_l[a]^2 conj(G[a,b,i]) G[a,c,i] = delta_bc
            sum_{b,i} G[a,b,i] lam_r[b]^2 conj(G[c,b,i]) = delta_ac

        Together these are equivalent to the reduced density matrix of every
        bipartition being diag(lambda^2) in the Schmidt basis.
        """
        for lam in self.bonds:
            if lam.size == 0 or np.any(lam <= 0.0):
                return False
            if np.any(np.diff(lam) > tol):
                return False
            if abs(float(np.sum(lam ** 2)) - 1.0) > tol:
                return False

        for k, gamma in enumerate(self.sites):
            lam_l, lam_r = self.left_lambda(k), self.right_lambda(k)
            left = np.einsum("a,abi,aci->bc", lam_l ** 2, gamma.conj(), gamma)
            if not np.allclose(left, np.eye(left.shape[0]), rtol=0.0, atol=tol):
                return False
            right = np.einsum("abi,b,cbi->ac", gamma, lam_r ** 2, gamma.conj())
            if not np.allclose(right, np.eye(right.shape[0]), rtol=0.0, atol=tol):
                return False
        return True

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------

    def save(self, path: str) -> str:
        """
        Writes a versioned .npz dump and returns the path actually written
        (numpy appends .npz when missing).
        """
        arrays = {f"site_{k}": s for k, s in enumerate(self.sites)}
        arrays.update({f"bond_{k}": b for k, b in enumerate(self.bonds)})
        np.savez_compressed(
            path,
            schema=np.array(SCHEMA_VERSION),
            labels=np.array(json.dumps(self.labels)),
            **arrays,
        )
        return path if path.endswith(".npz") else path + ".npz"

    @classmethod
    def load(cls, path: str) -> "MpsState":
        with np.load(path, allow_pickle=False) as data:
            schema = int(data["schema"])
            if schema != SCHEMA_VERSION:
                raise ValidationError(f"Unsupported state dump schema {schema}")
            labels = json.loads(str(data["labels"]))
            n = len(labels)
            sites = [data[f"site_{k}"] for k in range(n)]
            bonds = [data[f"bond_{k}"] for k in range(max(n - 1, 0))]
        return cls(sites, bonds, labels)
