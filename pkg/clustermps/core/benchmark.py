import csv
import logging
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Callable, Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from clustermps.core.cluster import ClusterSpec, build_cluster
from clustermps.core.engine import IN_ORDER, PatternRunner
from clustermps.core.errors import ValidationError
from clustermps.core.patterns import MeasurementPattern, sequential_pattern

logger = logging.getLogger(__name__)


@dataclass
class BenchRow:
    d: int
    l: int
    n: int
    mode: str
    max_chi: int
    total_ms: float
    per_step_ms: float
    fit_exponent: float = math.nan


CSV_COLUMNS = [f.name for f in fields(BenchRow)]


def bench_pattern(spec: ClusterSpec, seed: int = 0) -> MeasurementPattern:
    """
    XY measurements of every qubit outside the last column, in chain order,
    at seeded random angles. The last column is left as output.
    """
    measured = spec.labels()[: spec.width * (spec.length - 1)]
    thetas = np.random.default_rng(seed).uniform(0.0, 2.0 * math.pi, size=len(measured))
    outputs = spec.labels()[len(measured):]
    return sequential_pattern(measured, thetas, outputs)


def time_cell(
    width: int, length: int, mode: str = IN_ORDER, repeats: int = 1, seed: int = 0
) -> BenchRow:
    """
    Builds one d x l grid (untimed) and times `repeats` runs of bench_pattern.

    Returns:
        BenchRow whose times are medians over the repeats.
    """
    if repeats < 1:
        raise ValidationError(f"repeats must be >= 1, got {repeats}")
    spec = ClusterSpec.grid(width, length)
    state = build_cluster(spec)
    pattern = bench_pattern(spec, seed)
    runner = PatternRunner(mode)

    totals = [runner.run(state, pattern, seed).total_ms for _ in range(repeats)]
    total = statistics.median(totals)
    steps = max(len(pattern.steps), 1)
    row = BenchRow(width, length, spec.num_qubits, mode, state.chi_profile().max_chi,
                   total, total / steps)
    logger.debug("Timed %dx%d %s: %.3f ms (median of %d)", width, length, mode, total, repeats)
    return row


def fit_exponent(lengths: Sequence[int], times_ms: Sequence[float]) -> float:
    """Least-squares slope of log(time) against log(l); nan with fewer than two lengths."""
    if len(set(lengths)) < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(lengths), np.log(np.maximum(times_ms, 1e-9)), 1)
    return float(slope)


def run_benchmark(
    widths: Sequence[int],
    lengths: Sequence[int],
    mode: str = IN_ORDER,
    repeats: int = 1,
    seed: int = 0,
    parallel: bool = False,
    progress_callback: Optional[Callable[[float], None]] = None,
) -> List[BenchRow]:
    """
    Times every (d, l) cell and annotates each row with the scaling exponent
    fitted over all lengths of its width.

    Args:
        widths: Grid widths d.
        lengths: Grid lengths l.
        mode: Pattern execution mode.
        repeats: Runs per cell; times are medians.
        seed: Seed for angles and outcomes.
        parallel: Spread cells over a thread pool. A single run is never split.
        progress_callback: Optional function that accepts a float (0.0 to 1.0).
    """
    cells: List[Tuple[int, int]] = [(d, l) for d in widths for l in lengths]
    if not cells:
        raise ValidationError("At least one width and one length are required")

    rows: List[BenchRow] = []
    if parallel:
        with ThreadPoolExecutor() as pool:
            futures = [pool.submit(time_cell, d, l, mode, repeats, seed) for d, l in cells]
            for i, future in enumerate(futures):
                rows.append(future.result())
                if progress_callback:
                    progress_callback((i + 1) / len(cells))
    else:
        for i, (d, l) in enumerate(cells):
            rows.append(time_cell(d, l, mode, repeats, seed))
            if progress_callback:
                progress_callback((i + 1) / len(cells))

    by_width: Dict[int, List[BenchRow]] = {}
    for row in rows:
        by_width.setdefault(row.d, []).append(row)
    for d, group in by_width.items():
        exponent = fit_exponent([r.l for r in group], [r.total_ms for r in group])
        for r in group:
            r.fit_exponent = exponent
        logger.info("d=%d %s: fitted time-vs-l exponent %.3f", d, mode, exponent)
    return rows


def write_csv(rows: Sequence[BenchRow], stream: TextIO):
    writer = csv.DictWriter(stream, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow(asdict(row))
