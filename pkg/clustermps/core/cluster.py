import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from clustermps.config import EPS_TRUNC
from clustermps.core.errors import ValidationError
from clustermps.core.gates import CPHASE, PLUS, SWAP
from clustermps.core.mps import MpsState
from clustermps.utils.file_utils import complex_from_json, complex_to_json, load_json

logger = logging.getLogger(__name__)

Site = Tuple[int, int]  # (column, row)
Edge = Tuple[Site, Site]


def site_label(site: Site) -> str:
    col, row = site
    return f"c{col}r{row}"


def _normalize_edge(edge: Iterable[Iterable[int]]) -> Edge:
    a, b = (tuple(int(v) for v in end) for end in edge)
    if len(a) != 2 or len(b) != 2:
        raise ValidationError(f"Edge endpoints must be (col, row) pairs, got {edge!r}")
    return (a, b) if a <= b else (b, a)


def _grid_edges(width: int, length: int) -> List[Edge]:
    edges = []
    for col in range(length):
        for row in range(width):
            if row + 1 < width:
                edges.append(((col, row), (col, row + 1)))
            if col + 1 < length:
                edges.append(((col, row), (col + 1, row)))
    return edges


@dataclass
class ClusterSpec:
    """
    A width x length grid of qubits with CPHASE edges.

    Qubits are ordered column by column, top to bottom: the chain position of
    (col, row) is col * width + row. horizontal_range is the declared maximum
    column distance of any edge; vertical distance is unrestricted. When
    nearest_neighbour is set and no edges are given, the full nearest-neighbour
    grid is generated. inputs maps qubit labels to single-qubit states that
    replace |+> before entangling.
    """

    width: int
    length: int
    edges: Tuple[Edge, ...] = ()
    horizontal_range: int = 1
    nearest_neighbour: bool = False
    inputs: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.nearest_neighbour and not self.edges:
            self.edges = tuple(_grid_edges(self.width, self.length))
        else:
            self.edges = tuple(_normalize_edge(e) for e in self.edges)

    # -- constructors ---------------------------------------------------

    @classmethod
    def grid(cls, width: int, length: int, **kwargs) -> "ClusterSpec":
        return cls(width, length, horizontal_range=1 if length > 1 else 0,
                   nearest_neighbour=True, **kwargs)

    @classmethod
    def linear(cls, length: int, **kwargs) -> "ClusterSpec":
        return cls.grid(1, length, **kwargs)

    @classmethod
    def grid_with_diagonals(cls, width: int, length: int, **kwargs) -> "ClusterSpec":
        """Nearest-neighbour grid plus both diagonals of every unit cell (range 1)."""
        edges = _grid_edges(width, length)
        for col in range(length - 1):
            for row in range(width - 1):
                edges.append(((col, row), (col + 1, row + 1)))
                edges.append(((col, row + 1), (col + 1, row)))
        return cls(width, length, tuple(edges), horizontal_range=1, **kwargs)

    @classmethod
    def from_json(cls, doc: Dict[str, Any]) -> "ClusterSpec":
        """
        Parses {"width", "length", "range", "edges", "nearest_neighbour", "inputs"?}.

        Raises:
            ValidationError: If the document is malformed.
        """
        if not isinstance(doc, dict):
            raise ValidationError("Cluster spec must be a JSON object")
        try:
            width, length = int(doc["width"]), int(doc["length"])
            horizontal_range = int(doc["range"])
            nearest = bool(doc.get("nearest_neighbour", False))
            raw_edges = doc.get("edges", [])
            edges = tuple(
                ((int(a["col"]), int(a["row"])), (int(b["col"]), int(b["row"])))
                for a, b in raw_edges
            )
            inputs = {str(k): complex_from_json(v) for k, v in doc.get("inputs", {}).items()}
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"Malformed cluster spec: {e!r}")
        if nearest and edges:
            raise ValidationError("Explicit edges must be empty when nearest_neighbour is true")
        return cls(width, length, edges, horizontal_range, nearest, inputs)

    @classmethod
    def from_file(cls, path: str) -> "ClusterSpec":
        return cls.from_json(load_json(path))

    def to_json(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {
            "width": self.width,
            "length": self.length,
            "range": self.horizontal_range,
            "nearest_neighbour": self.nearest_neighbour,
            "edges": [] if self.nearest_neighbour else [
                [{"col": a[0], "row": a[1]}, {"col": b[0], "row": b[1]}] for a, b in self.edges
            ],
        }
        if self.inputs:
            doc["inputs"] = {k: complex_to_json(v) for k, v in self.inputs.items()}
        return doc

    # -- geometry -------------------------------------------------------

    @property
    def num_qubits(self) -> int:
        return self.width * self.length

    def site_index(self, site: Site) -> int:
        col, row = site
        return col * self.width + row

    def labels(self) -> List[str]:
        return [site_label((col, row)) for col in range(self.length) for row in range(self.width)]

    def ordered_edges(self) -> List[Edge]:
        """
        Edges in construction order: by the column of the rightmost endpoint,
        then by chain position, so entanglement is only ever created at the
        frontier of the part built so far.
        """
        def key(edge: Edge):
            a, b = edge
            ia, ib = self.site_index(a), self.site_index(b)
            return (max(a[0], b[0]), max(ia, ib), min(ia, ib))

        return sorted(self.edges, key=key)

    def range_violations(self) -> List[Edge]:
        return [(a, b) for a, b in self.edges if abs(a[0] - b[0]) > self.horizontal_range]

    def validate(self):
        """
        Checks grid bounds, self-edges, duplicate edges and input states.
        Declared-range violations are reported by verify_chi_bound instead.

        Raises:
            ValidationError: On the first problem found.
        """
        if self.width < 1 or self.length < 1:
            raise ValidationError(f"Grid must be at least 1x1, got {self.width}x{self.length}")
        if self.horizontal_range < 0:
            raise ValidationError(f"Range must be >= 0, got {self.horizontal_range}")
        seen = set()
        for a, b in self.edges:
            for col, row in (a, b):
                if not (0 <= col < self.length and 0 <= row < self.width):
                    raise ValidationError(f"Edge endpoint {(col, row)} lies outside the grid")
            if a == b:
                raise ValidationError(f"Self-edge on {a}")
            if (a, b) in seen:
                raise ValidationError(f"Duplicate edge {a}-{b}")
            seen.add((a, b))
        labels = set(self.labels())
        for label, vec in self.inputs.items():
            if label not in labels:
                raise ValidationError(f"Input given for unknown qubit {label!r}")
            if np.shape(vec) != (2,) or np.linalg.norm(vec) == 0.0:
                raise ValidationError(f"Input for {label!r} must be a non-zero 2-vector")

    def chi_bound(self) -> Tuple[int, str]:
        """
        Upper bound on every bond's Schmidt number and the rule that produced it.

        Nearest-neighbour grids: 2^d. Range-r grids: 2^ceil((r + 1/2) d).
        Both are capped by 2^floor(n/2), the bound for any n-qubit chain.
        """
        if self.nearest_neighbour:
            exponent, rule = self.width, "2^d"
        else:
            exponent = math.ceil((self.horizontal_range + 0.5) * self.width)
            rule = "2^ceil((r+1/2)d)"
        cap = self.num_qubits // 2
        if cap < exponent:
            return 2 ** cap, "2^floor(n/2)"
        return 2 ** exponent, rule


def apply_cphase(state: MpsState, a: int, b: int, eps: float = EPS_TRUNC):
    """
    CPHASE between chain positions a and b.

    Distant pairs are brought together with adjacent SWAPs, entangled, and
    the SWAPs are undone, so every qubit ends where it started.

    Raises:
        ValidationError: If a == b or either position is invalid.
    """
    if a == b:
        raise ValidationError(f"CPHASE needs two distinct sites, got {a} twice")
    lo, hi = sorted((a, b))
    for j in range(hi - 1, lo, -1):
        state.apply_two_site_gate(j, SWAP, eps)
    state.apply_two_site_gate(lo, CPHASE, eps)
    for j in range(lo + 1, hi):
        state.apply_two_site_gate(j, SWAP, eps)


def build_cluster(
    spec: ClusterSpec,
    monitor: Optional[Callable[[MpsState], None]] = None,
    eps: float = EPS_TRUNC,
) -> MpsState:
    """
    Prepares every qubit in |+> (or its input state) and applies the CPHASE
    edges in construction order.

    Args:
        spec: Validated cluster geometry.
        monitor: Optional callback invoked with the state after every edge.
        eps: Schmidt-coefficient pruning threshold.

    Returns:
        The cluster state in canonical form, labelled "c{col}r{row}".
    """
    spec.validate()
    labels = spec.labels()
    state = MpsState.product([spec.inputs.get(label, PLUS) for label in labels], labels)

    peak = 1
    for a, b in spec.ordered_edges():
        apply_cphase(state, spec.site_index(a), spec.site_index(b), eps)
        peak = max(peak, state.chi_profile().max_chi)
        if monitor:
            monitor(state)

    guard = 2 ** (spec.width + 1)
    if spec.nearest_neighbour and peak > guard:
        logger.warning(
            "Intermediate chi %d exceeded 2^(d+1) = %d while building a %dx%d grid",
            peak, guard, spec.width, spec.length,
        )
    logger.info(
        "Built %dx%d cluster: %d qubits, %d edges, final chi %d, peak chi %d",
        spec.width, spec.length, spec.num_qubits, len(spec.edges),
        state.chi_profile().max_chi, peak,
    )
    return state


@dataclass(frozen=True)
class BondCheck:
    bond: int
    chi: int
    bound: int

    @property
    def ok(self) -> bool:
        return self.chi <= self.bound


@dataclass
class ChiBoundReport:
    bound: int
    rule: str
    bonds: List[BondCheck]
    range_violations: List[Edge]

    @property
    def max_chi(self) -> int:
        return max((b.chi for b in self.bonds), default=1)

    @property
    def offending_bonds(self) -> List[int]:
        return [b.bond for b in self.bonds if not b.ok]

    @property
    def passed(self) -> bool:
        return not self.offending_bonds and not self.range_violations

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "bound": self.bound,
            "rule": self.rule,
            "max_chi": self.max_chi,
            "chi_profile": [b.chi for b in self.bonds],
            "offending_bonds": self.offending_bonds,
            "range_violations": [[site_label(a), site_label(b)] for a, b in self.range_violations],
        }


def verify_chi_bound(spec: ClusterSpec, state: MpsState) -> ChiBoundReport:
    """Compares every bond's Schmidt number with the bound of the ClusterSpec; never mutates state."""
    bound, rule = spec.chi_bound()
    checks = [BondCheck(k, chi, bound) for k, chi in enumerate(state.chi_profile().bonds)]
    report = ChiBoundReport(bound, rule, checks, spec.range_violations())
    if not report.passed:
        logger.info(
            "Bound %s = %d violated at bonds %s, range violations %s",
            rule, bound, report.offending_bonds, report.range_violations,
        )
    return report
