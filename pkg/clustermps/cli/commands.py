import argparse
import json
import logging
from typing import Any, Dict, TextIO

import numpy as np

from clustermps.config import DEFAULT_SEED, DENSE_LIMIT, SCHEMA_VERSION, VERIFY_TOL
from clustermps.core.benchmark import run_benchmark, write_csv
from clustermps.core.cluster import ClusterSpec, build_cluster, verify_chi_bound
from clustermps.core.dense import (
    dense_build_cluster,
    dense_replay,
    fidelity,
    schmidt_rank,
    schmidt_spectrum,
)
from clustermps.core.engine import FULL_UPDATE, MODES, PatternRunner, SimulationRecord
from clustermps.core.errors import InvariantViolation, ValidationError
from clustermps.core.mps import MpsState
from clustermps.core.patterns import MeasurementPattern
from clustermps.utils.file_utils import (
    ensure_parent_dir,
    get_unique_filepath,
    json_digest,
    load_json,
)
from clustermps.utils.system_utils import environment_summary

logger = logging.getLogger(__name__)

UINT64_MAX = 2 ** 64 - 1


def uint64(text: str) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be a decimal integer, got {text!r}")
    if not 0 <= value <= UINT64_MAX:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64 - 1], got {value}")
    return value


def int_list(text: str):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def emit_json(doc: Dict[str, Any], out: TextIO):
    json.dump(doc, out, indent=2)
    out.write("\n")


class BaseCommand:
    """
    Base class for subcommands to share common functionality.
    """

    name = ""
    help = ""

    def add_arguments(self, parser: argparse.ArgumentParser):
        pass  # To be overridden

    def execute(self, args: argparse.Namespace, out: TextIO) -> int:
        raise NotImplementedError

    def load_spec(self, path: str) -> ClusterSpec:
        spec = ClusterSpec.from_file(path)
        spec.validate()
        return spec


class BuildCommand(BaseCommand):
    name = "build"
    help = "Build a cluster state and write it as a .npz dump"

    def add_arguments(self, parser):
        parser.add_argument("spec", help="ClusterSpec JSON file")
        parser.add_argument("out", help="Output .npz path (made unique if it exists)")

    def execute(self, args, out):
        spec = self.load_spec(args.spec)
        state = build_cluster(spec)

        ensure_parent_dir(args.out)
        path = state.save(get_unique_filepath(args.out))
        profile = state.chi_profile()
        emit_json({
            "schema": SCHEMA_VERSION,
            "path": path,
            "num_qubits": state.num_sites,
            "chi_profile": list(profile.bonds),
            "max_chi": profile.max_chi,
            "parameter_count": state.parameter_count(),
        }, out)
        return 0


class RunCommand(BaseCommand):
    name = "run"
    help = "Run a measurement pattern on a cluster and print a RunReport"

    def add_arguments(self, parser):
        parser.add_argument("spec", help="ClusterSpec JSON file")
        parser.add_argument("pattern", help="MeasurementPattern JSON file")
        parser.add_argument("--seed", type=uint64, default=DEFAULT_SEED,
                            help="64-bit unsigned seed (default: %(default)s)")
        parser.add_argument("--mode", choices=MODES, default=FULL_UPDATE)
        parser.add_argument("--verify", action="store_true",
                            help=f"Cross-check against the dense oracle (n <= {DENSE_LIMIT})")
        parser.add_argument("--check", action="store_true",
                            help="Verify canonical form after every measurement")

    def execute(self, args, out):
        spec_doc = load_json(args.spec)
        pattern_doc = load_json(args.pattern)
        spec = ClusterSpec.from_json(spec_doc)
        spec.validate()
        pattern = MeasurementPattern.from_json(pattern_doc)
        if args.verify and spec.num_qubits > DENSE_LIMIT:
            raise ValidationError(
                f"--verify needs n <= {DENSE_LIMIT}, the cluster has {spec.num_qubits} qubits"
            )

        state = build_cluster(spec)
        rng = np.random.default_rng(args.seed)
        record = PatternRunner(args.mode, check=args.check).run(state, pattern, rng)

        report = self.report(record, spec_doc, pattern_doc, args.seed)
        if args.verify:
            report["verification"] = self.verify(spec, pattern, record)
        emit_json(report, out)
        return 0

    def report(
        self, record: SimulationRecord, spec_doc: Any, pattern_doc: Any, seed: int
    ) -> Dict[str, Any]:
        doc = {
            "schema": SCHEMA_VERSION,
            "inputs": {
                "spec_sha256": json_digest(spec_doc),
                "pattern_sha256": json_digest(pattern_doc),
                "seed": seed,
            },
        }
        doc.update(record.to_dict(include_timings=False))
        doc["timings"] = {
            "per_step_ms": [s.elapsed_ms for s in record.steps],
            "total_ms": record.total_ms,
        }
        doc["environment"] = environment_summary()
        return doc

    def verify(
        self, spec: ClusterSpec, pattern: MeasurementPattern, record: SimulationRecord
    ) -> Dict[str, Any]:
        psi, labels = dense_replay(dense_build_cluster(spec), spec.labels(), pattern, record.outcomes)
        if labels != record.final_state.labels:
            raise InvariantViolation(
                f"Output qubits differ: dense {labels}, mps {record.final_state.labels}"
            )
        f = fidelity(psi, record.final_state.to_dense())
        logger.info("Dense cross-check fidelity %.12f", f)
        if 1.0 - f > VERIFY_TOL:
            raise InvariantViolation(
                f"Dense cross-check failed: fidelity {f:.12f} on outcomes {record.outcome_string!r}"
            )
        return {"fidelity": f, "outputs": labels}


class VerifyCommand(BaseCommand):
    name = "verify"
    help = "Build a cluster and check the chi bound, canonical form and dense spectra"

    def add_arguments(self, parser):
        parser.add_argument("spec", help="ClusterSpec JSON file")
        parser.add_argument("--tol", type=float, default=1e-9,
                            help="Tolerance of the canonical and spectrum checks")

    def execute(self, args, out):
        spec = self.load_spec(args.spec)
        state = build_cluster(spec)
        report = verify_chi_bound(spec, state)

        doc = {"schema": SCHEMA_VERSION, "num_qubits": spec.num_qubits}
        doc.update(report.to_dict())
        doc["canonical"] = state.check_canonical(args.tol)
        passed = report.passed and doc["canonical"]

        if spec.num_qubits <= DENSE_LIMIT:
            dense = self.dense_checks(spec, state, args.tol)
            doc["dense"] = dense
            passed = passed and dense["passed"]
        else:
            doc["dense"] = None
            logger.info("Skipping dense checks for %d qubits", spec.num_qubits)

        doc["passed"] = passed
        emit_json(doc, out)
        return 0 if passed else 1

    def dense_checks(self, spec: ClusterSpec, state: MpsState, tol: float) -> Dict[str, Any]:
        psi = dense_build_cluster(spec)
        f = fidelity(psi, state.to_dense())
        worst = 0.0
        rank_mismatches = []
        for k, lam in enumerate(state.bonds):
            exact = schmidt_spectrum(psi, k + 1)
            size = max(exact.size, lam.size)
            padded = np.zeros((2, size))
            padded[0, :exact.size] = exact ** 2
            padded[1, :lam.size] = lam ** 2
            worst = max(worst, float(np.max(np.abs(padded[0] - padded[1]))))
            if schmidt_rank(psi, k + 1) != lam.size:
                rank_mismatches.append(k)
        return {
            "passed": abs(1.0 - f) <= tol and worst <= tol and not rank_mismatches,
            "fidelity": f,
            "max_spectrum_error": worst,
            "rank_mismatches": rank_mismatches,
        }


class BenchCommand(BaseCommand):
    name = "bench"
    help = "Time patterns over grid sizes and write a CSV table"

    def add_arguments(self, parser):
        parser.add_argument("--widths", type=int_list, default=[1, 2])
        parser.add_argument("--lengths", type=int_list, default=[8, 16, 32])
        parser.add_argument("--mode", choices=MODES, default="in_order")
        parser.add_argument("--repeats", type=int, default=1)
        parser.add_argument("--seed", type=uint64, default=DEFAULT_SEED)
        parser.add_argument("--parallel", action="store_true",
                            help="Run (d, l) cells on a thread pool")
        parser.add_argument("--out", default=None, help="CSV path (default: stdout)")

    def execute(self, args, out):
        rows = run_benchmark(
            args.widths, args.lengths, args.mode, args.repeats, args.seed, args.parallel,
            progress_callback=self.report_progress,
        )
        if args.out:
            ensure_parent_dir(args.out)
            path = get_unique_filepath(args.out)
            with open(path, "w", newline="", encoding="utf-8") as fh:
                write_csv(rows, fh)
            logger.info("Wrote %d rows to %s", len(rows), path)
        else:
            write_csv(rows, out)
        return 0

    def report_progress(self, fraction: float):
        logger.info("bench %3.0f%%", fraction * 100)


COMMANDS = (BuildCommand, RunCommand, VerifyCommand, BenchCommand)
