import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, List, Optional, Tuple, Union

import numpy as np

from clustermps.config import CANONICAL_TOL, EPS_PROB, EPS_TRUNC
from clustermps.core.errors import InvariantViolation, ValidationError
from clustermps.core.gates import check_unitary
from clustermps.core.mps import MpsState, select_outcome
from clustermps.core.patterns import (
    MeasurementPattern,
    correction_unitary,
    resolve_angle,
    resolve_basis,
)

logger = logging.getLogger(__name__)

FULL_UPDATE = "full_update"
IN_ORDER = "in_order"
MODES = (FULL_UPDATE, IN_ORDER)


@dataclass(frozen=True)
class StepRecord:
    target: Hashable
    plane: str
    theta: Optional[float]
    p0: float
    p1: float
    outcome: int
    chi_profile: Tuple[int, ...]
    elapsed_ms: float = field(compare=False)

    def to_dict(self, include_timings: bool = True) -> Dict[str, Any]:
        doc = {
            "target": self.target,
            "plane": self.plane,
            "theta": self.theta,
            "p0": self.p0,
            "p1": self.p1,
            "outcome": self.outcome,
            "chi_profile": list(self.chi_profile),
        }
        if include_timings:
            doc["elapsed_ms"] = self.elapsed_ms
        return doc


@dataclass
class SimulationRecord:
    mode: str
    steps: List[StepRecord]
    final_state: MpsState
    total_ms: float = 0.0

    @property
    def outcomes(self) -> Dict[Hashable, int]:
        return {s.target: s.outcome for s in self.steps}

    @property
    def outcome_string(self) -> str:
        return "".join(str(s.outcome) for s in self.steps)

    def to_dict(self, include_timings: bool = True) -> Dict[str, Any]:
        doc: Dict[str, Any] = {
            "mode": self.mode,
            "outcome_string": self.outcome_string,
            "steps": [s.to_dict(include_timings) for s in self.steps],
            "final_labels": list(self.final_state.labels),
            "final_chi_profile": list(self.final_state.chi_profile().bonds),
        }
        if include_timings:
            doc["total_ms"] = self.total_ms
        return doc


class _FullUpdateCursor:
    """Owns a private copy of the chain and rewrites it after every measurement."""

    def __init__(self, state: MpsState, runner: "PatternRunner"):
        self.state = state
        self.runner = runner
        self._site = -1

    def prepare(self, label: Hashable, u: np.ndarray) -> Tuple[float, float]:
        self._site = self.state.position(label)
        self.state.apply_single_qubit(self._site, u)
        return self.state.outcome_probabilities(self._site)

    def commit(self, outcome: int):
        r = self.runner
        self.state = self.state.project_and_update(
            self._site, outcome, eps=r.eps, eps_prob=r.eps_prob, check=r.check, tol=r.tol
        )

    def chi_profile(self) -> Tuple[int, ...]:
        return self.state.chi_profile().bonds

    def clone(self) -> "_FullUpdateCursor":
        twin = _FullUpdateCursor(self.state.copy(), self.runner)
        twin._site = self._site
        return twin

    def finish(self) -> MpsState:
        return self.state


class _InOrderCursor:
    """
    Measures a chain prefix without touching Gamma or lambda.

    After qubits 0..m-1 are measured the remaining state is
    sum_a boundary[a] |R_a>, where R_a are the right Schmidt vectors of bond
    m-1. Measuring qubit m only needs that vector and the tensors of site m;
    the canonical form of the rest is recovered once, in finish().
    """

    def __init__(self, state: MpsState, runner: "PatternRunner"):
        self.state = state
        self.runner = runner
        self.next = 0
        self.boundary = np.ones(1, dtype=np.complex128)
        self._branches: Optional[np.ndarray] = None
        self._bond_dims = state.chi_profile().bonds

    def prepare(self, label: Hashable, u: np.ndarray) -> Tuple[float, float]:
        k = self.state.position(label)
        if k != self.next:
            raise ValidationError(
                f"in_order mode expected chain position {self.next}, got {label!r} at {k}"
            )
        gamma = np.einsum("ij,abj->abi", check_unitary(u, 2), self.state.sites[k])
        # branches[i, b]: weight of |i>|R_b> in the unrenormalized projection
        self._branches = (
            np.einsum("a,abi->ib", self.boundary, gamma) * self.state.right_lambda(k)[None, :]
        )
        p = np.sum(np.abs(self._branches) ** 2, axis=1)
        return float(p[0]), float(p[1])

    def commit(self, outcome: int):
        v = self._branches[outcome]
        p = float(np.sum(np.abs(v) ** 2))
        if p <= self.runner.eps_prob:
            raise ValidationError(
                f"Outcome {outcome} on site {self.next} has probability {p:.3e}"
            )
        self.boundary = v / np.sqrt(p)
        self.next += 1

    def chi_profile(self) -> Tuple[int, ...]:
        # stored bonds of the unmeasured suffix; upper bounds of the true ranks
        return self._bond_dims[self.next:]

    def clone(self) -> "_InOrderCursor":
        twin = _InOrderCursor(self.state, self.runner)
        twin.next = self.next
        twin.boundary = self.boundary.copy()
        twin._branches = self._branches
        return twin

    def finish(self) -> MpsState:
        r = self.runner
        result = self.state.collapse_prefix(self.next, self.boundary, r.eps)
        if r.check and not result.check_canonical(r.tol):
            raise InvariantViolation("Canonical form lost while collapsing the measured prefix")
        return result


_Cursor = Union[_FullUpdateCursor, _InOrderCursor]


class PatternRunner:
    """
    Executes measurement patterns on an MpsState.

    full_update re-canonicalizes the whole chain after every measurement and
    accepts any measurement order. in_order requires the measured qubits to be
    the chain prefix measured left to right and only carries a boundary vector.
    Neither mode modifies the input state.
    """

    def __init__(
        self,
        mode: str = FULL_UPDATE,
        check: bool = False,
        eps: float = EPS_TRUNC,
        eps_prob: float = EPS_PROB,
        tol: float = CANONICAL_TOL,
    ):
        if mode not in MODES:
            raise ValidationError(f"Unknown mode {mode!r}, expected one of {MODES}")
        self.mode = mode
        self.check = check
        self.eps = eps
        self.eps_prob = eps_prob
        self.tol = tol

    def _start(self, state: MpsState, pattern: MeasurementPattern) -> _Cursor:
        pattern.validate(state.labels)
        if self.mode == FULL_UPDATE:
            return _FullUpdateCursor(state.copy(), self)

        positions = [state.position(t) for t in pattern.targets]
        if positions != list(range(len(positions))):
            raise ValidationError(
                "in_order mode needs the measured qubits to be the chain prefix in "
                f"ascending order, got positions {positions}"
            )
        return _InOrderCursor(state, self)

    def _finish(
        self, cursor: _Cursor, pattern: MeasurementPattern, outcomes: Dict[Hashable, int]
    ) -> MpsState:
        final = cursor.finish()
        for c in pattern.corrections:
            final.apply_single_qubit(final.position(c.target), correction_unitary(c, outcomes))
        return final

    def run(
        self,
        state: MpsState,
        pattern: MeasurementPattern,
        rng: Union[np.random.Generator, int, None] = None,
        progress_callback: Optional[Callable[[float], None]] = None,
    ) -> SimulationRecord:
        """
        Samples one run of the pattern.

        Args:
            state: Canonical input state; left unmodified.
            pattern: Measurements, outputs and corrections.
            rng: numpy Generator or seed. Exactly one rng.random() is drawn
                per step, in step order.
            progress_callback: Optional function that accepts a float (0.0 to 1.0).

        Returns:
            SimulationRecord with per-step probabilities, outcomes, chi
            profiles and timings, and the corrected state of the unmeasured qubits.

        Raises:
            ValidationError: If the pattern is invalid for the state or mode.
            InvariantViolation: If checking is enabled and canonical form is lost.
        """
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        cursor = self._start(state, pattern)
        outcomes: Dict[Hashable, int] = {}
        records: List[StepRecord] = []
        total = len(pattern.steps)
        t_run = time.perf_counter()

        for i, step in enumerate(pattern.steps):
            t_step = time.perf_counter()
            p0, p1 = cursor.prepare(step.target, resolve_basis(step, outcomes))
            outcome = select_outcome(rng.random(), p0, p1, self.eps_prob)
            cursor.commit(outcome)
            outcomes[step.target] = outcome
            elapsed = (time.perf_counter() - t_step) * 1000.0

            theta = None if step.basis.plane == "Z" else resolve_angle(step.basis, outcomes)
            records.append(StepRecord(
                step.target, step.basis.plane, theta, p0, p1, outcome, cursor.chi_profile(), elapsed
            ))
            logger.debug(
                "Step %d: %r p=(%.6f, %.6f) -> %d, chi %s",
                i, step.target, p0, p1, outcome, records[-1].chi_profile,
            )
            if progress_callback:
                progress_callback((i + 1) / total)

        final = self._finish(cursor, pattern, outcomes)
        record = SimulationRecord(self.mode, records, final, (time.perf_counter() - t_run) * 1000.0)
        logger.info(
            "Pattern finished in %s mode: %d measurements, outcomes %s, %.2f ms",
            self.mode, total, record.outcome_string or "(none)", record.total_ms,
        )
        return record

    def _explore(
        self,
        state: MpsState,
        pattern: MeasurementPattern,
        on_leaf: Callable[[_Cursor, Dict[Hashable, int], str, float], None],
    ):
        def walk(cursor: _Cursor, outcomes: Dict[Hashable, int], prefix: str, weight: float):
            if len(prefix) == len(pattern.steps):
                on_leaf(cursor, outcomes, prefix, weight)
                return
            step = pattern.steps[len(prefix)]
            p = cursor.prepare(step.target, resolve_basis(step, outcomes))
            for bit in (0, 1):
                if p[bit] <= self.eps_prob:
                    continue
                branch = cursor.clone()
                branch.commit(bit)
                walk(branch, {**outcomes, step.target: bit}, prefix + str(bit), weight * p[bit])

        walk(self._start(state, pattern), {}, "", 1.0)

    def branch_distribution(
        self, state: MpsState, pattern: MeasurementPattern
    ) -> Dict[str, float]:
        """
        Probability of every outcome string, exploring both outcomes of every
        step on independent clones. Outcomes at or below eps_prob are skipped.
        """
        result: Dict[str, float] = {}

        def record(cursor, outcomes, prefix, weight):
            result[prefix] = weight

        self._explore(state, pattern, record)
        return result

    def branch_states(
        self, state: MpsState, pattern: MeasurementPattern
    ) -> Dict[str, Tuple[float, MpsState]]:
        """Like branch_distribution, but also returns each branch's corrected output state."""
        result: Dict[str, Tuple[float, MpsState]] = {}

        def record(cursor, outcomes, prefix, weight):
            result[prefix] = (weight, self._finish(cursor, pattern, outcomes))

        self._explore(state, pattern, record)
        return result


def run_pattern(
    state: MpsState,
    pattern: MeasurementPattern,
    rng: Union[np.random.Generator, int, None] = None,
    mode: str = FULL_UPDATE,
    **kwargs,
) -> SimulationRecord:
    """Convenience wrapper: PatternRunner(mode, **kwargs).run(state, pattern, rng)."""
    return PatternRunner(mode, **kwargs).run(state, pattern, rng)
