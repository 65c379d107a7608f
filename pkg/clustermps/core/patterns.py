import math
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from clustermps.core.cluster import ClusterSpec
from clustermps.core.errors import ValidationError
from clustermps.core.gates import I2, X, Z, check_unitary, xy_basis_change
from clustermps.utils.file_utils import complex_from_json, complex_to_json, load_json

PLANES = ("XY", "Z", "U")


def _label(value: Any) -> Hashable:
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise ValidationError(f"Qubit label must be a string or integer, got {value!r}")
    return value


def _labels(values: Any) -> Tuple[Hashable, ...]:
    if isinstance(values, (str, dict)):
        raise ValidationError(f"Expected a list of qubit labels, got {values!r}")
    return tuple(_label(v) for v in values)


@dataclass(frozen=True)
class MeasurementBasis:
    """
    Single-qubit measurement basis with feed-forward.

    plane "Z" is the computational basis. plane "XY" measures in
    {|0> +- e^{i theta}|1>}, outcome 0 being the + state. plane "U" measures in
    frame^dagger applied to that XY basis. The effective angle is
    (-1)^(xor of sign_deps outcomes) * theta + (xor of pi_deps outcomes) * pi.
    """

    plane: str = "XY"
    theta: float = 0.0
    sign_deps: Tuple[Hashable, ...] = ()
    pi_deps: Tuple[Hashable, ...] = ()
    frame: Optional[np.ndarray] = field(default=None, compare=False)

    def dependencies(self) -> Tuple[Hashable, ...]:
        return tuple(self.sign_deps) + tuple(self.pi_deps)


@dataclass(frozen=True)
class MeasurementStep:
    target: Hashable
    basis: MeasurementBasis = MeasurementBasis()


@dataclass(frozen=True)
class CorrectionStep:
    """Z^(xor z_deps) . X^(xor x_deps) on an output qubit after all measurements."""

    target: Hashable
    x_deps: Tuple[Hashable, ...] = ()
    z_deps: Tuple[Hashable, ...] = ()


def _parity(labels: Iterable[Hashable], outcomes: Mapping[Hashable, int]) -> int:
    bit = 0
    for label in labels:
        if label not in outcomes:
            raise ValidationError(f"Outcome of {label!r} is referenced before it is measured")
        bit ^= int(outcomes[label])
    return bit


def resolve_angle(basis: MeasurementBasis, outcomes: Mapping[Hashable, int]) -> float:
    sign = -1.0 if _parity(basis.sign_deps, outcomes) else 1.0
    shift = math.pi if _parity(basis.pi_deps, outcomes) else 0.0
    return sign * basis.theta + shift


def resolve_basis(step: MeasurementStep, outcomes: Mapping[Hashable, int]) -> np.ndarray:
    """
    Unitary U such that measuring step.target in its basis equals applying U
    and then measuring in the computational basis.

    Raises:
        ValidationError: If a referenced outcome is missing.
    """
    basis = step.basis
    if basis.plane == "Z":
        _parity(basis.dependencies(), outcomes)
        return I2
    u = xy_basis_change(resolve_angle(basis, outcomes))
    if basis.plane == "U":
        u = u @ basis.frame
    return u


def correction_unitary(correction: CorrectionStep, outcomes: Mapping[Hashable, int]) -> np.ndarray:
    u = I2
    if _parity(correction.x_deps, outcomes):
        u = X @ u
    if _parity(correction.z_deps, outcomes):
        u = Z @ u
    return u


@dataclass
class MeasurementPattern:
    """
    Ordered adaptive measurements, the output qubits left unmeasured, and the
    byproduct corrections applied to those outputs at the end.
    """

    steps: List[MeasurementStep] = field(default_factory=list)
    outputs: List[Hashable] = field(default_factory=list)
    corrections: List[CorrectionStep] = field(default_factory=list)

    @property
    def targets(self) -> List[Hashable]:
        return [s.target for s in self.steps]

    def validate(self, labels: Optional[Sequence[Hashable]] = None):
        """
        Checks feed-forward causality, unique targets, disjoint outputs,
        well-formed bases and corrections, and (if given) that every referenced
        qubit exists.

        Raises:
            ValidationError: On the first problem found.
        """
        measured: Set[Hashable] = set()
        for i, step in enumerate(self.steps):
            basis = step.basis
            if basis.plane not in PLANES:
                raise ValidationError(f"Step {i}: unknown plane {basis.plane!r}, expected one of {PLANES}")
            if not math.isfinite(basis.theta):
                raise ValidationError(f"Step {i}: angle must be finite")
            if basis.plane == "U":
                if basis.frame is None:
                    raise ValidationError(f"Step {i}: plane 'U' needs a unitary frame")
                check_unitary(basis.frame, 2)
            elif basis.frame is not None:
                raise ValidationError(f"Step {i}: a frame is only allowed on plane 'U'")
            for dep in basis.dependencies():
                if dep not in measured:
                    raise ValidationError(
                        f"Step {i} ({step.target!r}) depends on {dep!r}, which is not measured earlier"
                    )
            if step.target in measured:
                raise ValidationError(f"Qubit {step.target!r} is measured twice")
            measured.add(step.target)

        if len(set(self.outputs)) != len(self.outputs):
            raise ValidationError("Output qubits must be unique")
        overlap = measured.intersection(self.outputs)
        if overlap:
            raise ValidationError(f"Output qubits {sorted(map(str, overlap))} are also measured")

        corrected = set()
        for c in self.corrections:
            if c.target not in self.outputs:
                raise ValidationError(f"Correction targets {c.target!r}, which is not an output")
            if c.target in corrected:
                raise ValidationError(f"Output {c.target!r} has more than one correction")
            corrected.add(c.target)
            for dep in tuple(c.x_deps) + tuple(c.z_deps):
                if dep not in measured:
                    raise ValidationError(f"Correction on {c.target!r} depends on unmeasured {dep!r}")

        if labels is not None:
            known = set(labels)
            for label in list(measured) + list(self.outputs):
                if label not in known:
                    raise ValidationError(f"Pattern refers to unknown qubit {label!r}")

    # -- JSON -----------------------------------------------------------

    @classmethod
    def from_json(cls, doc: Dict[str, Any]) -> "MeasurementPattern":
        """
        Parses {"steps": [{"target", "basis": {"plane", "theta", "sign_deps",
        "pi_deps", "unitary"?}}], "outputs": [...], "corrections"?: [...]}.
        Omitted "outputs" means no output qubits are declared.
        """
        if not isinstance(doc, dict):
            raise ValidationError("Pattern must be a JSON object")
        try:
            steps = []
            for raw in doc.get("steps", []):
                b = raw.get("basis", {})
                frame = complex_from_json(b["unitary"]) if "unitary" in b else None
                steps.append(MeasurementStep(
                    target=_label(raw["target"]),
                    basis=MeasurementBasis(
                        plane=str(b.get("plane", "XY")),
                        theta=float(b.get("theta", 0.0)),
                        sign_deps=_labels(b.get("sign_deps", [])),
                        pi_deps=_labels(b.get("pi_deps", [])),
                        frame=frame,
                    ),
                ))
            corrections = [
                CorrectionStep(
                    _label(c["target"]), _labels(c.get("x_deps", [])), _labels(c.get("z_deps", []))
                )
                for c in doc.get("corrections", [])
            ]
            outputs = list(_labels(doc.get("outputs", [])))
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise ValidationError(f"Malformed pattern: {e!r}")
        pattern = cls(steps, outputs, corrections)
        pattern.validate()
        return pattern

    @classmethod
    def from_file(cls, path: str) -> "MeasurementPattern":
        return cls.from_json(load_json(path))

    def to_json(self) -> Dict[str, Any]:
        steps = []
        for s in self.steps:
            basis: Dict[str, Any] = {
                "plane": s.basis.plane,
                "theta": s.basis.theta,
                "sign_deps": list(s.basis.sign_deps),
                "pi_deps": list(s.basis.pi_deps),
            }
            if s.basis.frame is not None:
                basis["unitary"] = complex_to_json(s.basis.frame)
            steps.append({"target": s.target, "basis": basis})
        doc: Dict[str, Any] = {"steps": steps, "outputs": list(self.outputs)}
        if self.corrections:
            doc["corrections"] = [
                {"target": c.target, "x_deps": list(c.x_deps), "z_deps": list(c.z_deps)}
                for c in self.corrections
            ]
        return doc


# ----------------------------------------------------------------------
# Hand-built patterns
# ----------------------------------------------------------------------


def wire_pattern(angles: Sequence[float], labels: Sequence[Hashable]) -> MeasurementPattern:
    """
    Pattern for a linear wire of len(angles) + 1 qubits whose first qubit holds
    the input. With J(a) = H . diag(1, e^{ia}), the corrected output is
    J(angles[-1]) ... J(angles[0]) applied to the input.

    Args:
        angles: One rotation per measured qubit.
        labels: Qubit labels along the wire, input first.
    """
    if len(labels) != len(angles) + 1:
        raise ValidationError(f"{len(angles)} angles need {len(angles) + 1} wire qubits")
    x_set: Set[Hashable] = set()
    z_set: Set[Hashable] = set()
    steps = []
    for label, alpha in zip(labels, angles):
        # J(a) X^x Z^z = Z^x X^z J((-1)^x a): flip the angle when x is odd
        flips = tuple(q for q in labels if q in x_set)
        steps.append(MeasurementStep(label, MeasurementBasis("XY", -float(alpha), flips)))
        # X^s Z^x X^z = X^(s+z) Z^x up to a global phase
        x_set, z_set = z_set ^ {label}, x_set
    output = labels[-1]
    correction = CorrectionStep(
        output,
        tuple(q for q in labels if q in x_set),
        tuple(q for q in labels if q in z_set),
    )
    return MeasurementPattern(steps, [output], [correction])


def teleportation_pattern(length: int = 3) -> MeasurementPattern:
    """X measurements along a 1 x length wire (length odd) move the input to the last qubit."""
    if length < 1 or length % 2 == 0:
        raise ValidationError(f"Teleportation needs an odd wire length, got {length}")
    return wire_pattern([0.0] * (length - 1), ClusterSpec.linear(length).labels())


def rotation_pattern(angles: Sequence[float]) -> MeasurementPattern:
    return wire_pattern(angles, ClusterSpec.linear(len(angles) + 1).labels())


def cnot_cluster_spec(control: np.ndarray, target: np.ndarray) -> ClusterSpec:
    """
    2 x 3 cluster implementing CNOT: two wires with one extra edge from the
    middle of the target wire to the end of the control wire.
    """
    edges = (
        ((0, 0), (1, 0)), ((1, 0), (2, 0)),
        ((0, 1), (1, 1)), ((1, 1), (2, 1)),
        ((1, 1), (2, 0)),
    )
    return ClusterSpec(2, 3, edges, horizontal_range=1,
                       inputs={"c0r0": np.asarray(control), "c0r1": np.asarray(target)})


def cnot_pattern() -> MeasurementPattern:
    """
    X measurements of the first two columns of cnot_cluster_spec; the corrected
    outputs (c2r0, c2r1) carry CNOT (control c2r0) applied to the inputs.
    """
    steps = [MeasurementStep(t, MeasurementBasis("XY", 0.0)) for t in ("c0r0", "c0r1", "c1r0", "c1r1")]
    corrections = [
        CorrectionStep("c2r0", x_deps=("c1r0",), z_deps=("c0r0", "c0r1")),
        CorrectionStep("c2r1", x_deps=("c1r1", "c1r0"), z_deps=("c0r1",)),
    ]
    return MeasurementPattern(steps, ["c2r0", "c2r1"], corrections)


def sequential_pattern(
    labels: Sequence[Hashable], thetas: Sequence[float], outputs: Sequence[Hashable] = ()
) -> MeasurementPattern:
    """XY measurements of labels in the given order, without feed-forward."""
    steps = [MeasurementStep(q, MeasurementBasis("XY", float(t))) for q, t in zip(labels, thetas)]
    return MeasurementPattern(steps, list(outputs))
