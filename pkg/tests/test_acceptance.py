"""
End-to-end checks of the simulator against the dense oracle, the chi
bounds of grid clusters, adaptive-measurement correctness and run-time
scaling. Slow scaling checks carry the `slow` marker.
"""

import time

import numpy as np
import pytest

from clustermps.config import EPS_PROB
from clustermps.core.benchmark import run_benchmark, time_cell
from clustermps.core.cluster import ClusterSpec, build_cluster, verify_chi_bound
from clustermps.core.dense import (
    dense_apply_single_qubit,
    dense_apply_two_qubit,
    dense_build_cluster,
    dense_measure,
    enumerate_branches,
    fidelity,
    product_state,
)
from clustermps.core.engine import FULL_UPDATE, IN_ORDER, MODES, PatternRunner
from clustermps.core.gates import CNOT, j_gate
from clustermps.core.mps import MpsState
from clustermps.core.patterns import (
    cnot_cluster_spec,
    cnot_pattern,
    rotation_pattern,
    sequential_pattern,
    teleportation_pattern,
)
from tests.helpers import (
    assert_same_state,
    assert_spectra_match,
    random_qubit,
    random_state,
    random_unitary,
)

TOL = 1e-9


def _prefix_pattern(spec, seed):
    """XY measurements of every column but the last, in chain order."""
    labels = spec.labels()
    count = spec.width * (spec.length - 1)
    thetas = np.random.default_rng(seed).uniform(0, 2 * np.pi, size=count)
    return sequential_pattern(labels[:count], thetas, labels[count:])


# ---- oracle equivalence ----


def test_randomized_oracle_trials():
    rng = np.random.default_rng(500)
    for trial in range(500):
        n = int(rng.integers(2, 11))
        psi = random_state(n, rng)
        state = MpsState.from_dense(psi)
        assert state.check_canonical(TOL), f"trial {trial}: from_dense"

        k = int(rng.integers(n))
        u = random_unitary(2, rng)
        state.apply_single_qubit(k, u)
        psi = dense_apply_single_qubit(psi, k, u)

        j = int(rng.integers(n - 1))
        g = random_unitary(4, rng)
        state.apply_two_site_gate(j, g)
        psi = dense_apply_two_qubit(psi, j, j + 1, g)
        assert state.check_canonical(TOL), f"trial {trial}: two-site gate"

        m = int(rng.integers(n))
        basis = random_unitary(2, rng)
        state.apply_single_qubit(m, basis)
        psi = dense_apply_single_qubit(psi, m, basis)
        p0, p1, _ = dense_measure(psi, m)
        assert state.outcome_probabilities(m) == pytest.approx((p0, p1), abs=TOL)

        for outcome, p in enumerate((p0, p1)):
            if p <= EPS_PROB:
                continue
            post = state.project_and_update(m, outcome, check=True, tol=TOL)
            _, _, expected = dense_measure(psi, m, outcome)
            assert_same_state(expected, post.to_dense(), atol=TOL)


# ---- chi bounds ----


@pytest.mark.parametrize(
    "width, length",
    [(d, l) for d in (1, 2, 3) for l in range(d + 1, 7)],
)
def test_nearest_neighbour_grid_reaches_its_bound(width, length):
    spec = ClusterSpec.grid(width, length)
    state = build_cluster(spec)
    assert state.chi_profile().max_chi == 2 ** width
    assert verify_chi_bound(spec, state).passed
    assert state.check_canonical(TOL)
    assert_spectra_match(state, dense_build_cluster(spec), atol=TOL)


@pytest.mark.parametrize("length", range(2, 7))
def test_diagonal_grid_respects_range_bound(length):
    spec = ClusterSpec.grid_with_diagonals(2, length)
    state = build_cluster(spec)
    assert state.chi_profile().max_chi <= 8
    assert verify_chi_bound(spec, state).passed
    assert state.check_canonical(TOL)
    assert_spectra_match(state, dense_build_cluster(spec), atol=TOL)


# ---- branch completeness and mode equivalence ----


@pytest.mark.parametrize("width, length", [(1, 5), (2, 3)])
@pytest.mark.parametrize("mode", MODES)
def test_branch_trees_are_complete(width, length, mode):
    spec = ClusterSpec.grid(width, length)
    pattern = _prefix_pattern(spec, seed=width * 10 + length)
    dist = PatternRunner(mode, check=True).branch_distribution(build_cluster(spec), pattern)
    exact = enumerate_branches(dense_build_cluster(spec), pattern, spec.labels())
    assert sum(dist.values()) == pytest.approx(1.0, abs=TOL)
    assert dist.keys() == exact.keys()
    for key, p in exact.items():
        assert dist[key] == pytest.approx(p, abs=TOL)


@pytest.mark.parametrize("width, length", [(1, 8), (2, 6)])
def test_modes_are_equivalent(width, length):
    spec = ClusterSpec.grid(width, length)
    state = build_cluster(spec)
    pattern = _prefix_pattern(spec, seed=length)

    full = PatternRunner(FULL_UPDATE).branch_distribution(state, pattern)
    fast = PatternRunner(IN_ORDER).branch_distribution(state, pattern)
    assert full.keys() == fast.keys()
    for key in full:
        assert fast[key] == pytest.approx(full[key], abs=TOL)

    for seed in range(5):
        a = PatternRunner(FULL_UPDATE, check=True).run(state, pattern, seed)
        b = PatternRunner(IN_ORDER, check=True).run(state, pattern, seed)
        assert a.outcome_string == b.outcome_string
        assert fidelity(a.final_state.to_dense(), b.final_state.to_dense()) >= 1 - TOL


# ---- adaptive measurement correctness ----


@pytest.mark.parametrize("mode", MODES)
def test_teleportation_over_random_inputs(mode):
    rng = np.random.default_rng(61)
    runner = PatternRunner(mode, check=True)
    for trial in range(50):
        psi_in = random_qubit(rng)
        state = build_cluster(ClusterSpec.linear(3, inputs={"c0r0": psi_in}))
        record = runner.run(state, teleportation_pattern(), trial)
        assert fidelity(psi_in, record.final_state.to_dense()) >= 1 - TOL


@pytest.mark.parametrize("mode", MODES)
def test_rotations_over_random_inputs(mode):
    rng = np.random.default_rng(62)
    runner = PatternRunner(mode, check=True)
    for trial in range(50):
        angles = rng.uniform(-np.pi, np.pi, size=int(rng.integers(1, 5)))
        psi_in = random_qubit(rng)
        expected = psi_in
        for alpha in angles:
            expected = j_gate(alpha) @ expected
        state = build_cluster(ClusterSpec.linear(len(angles) + 1, inputs={"c0r0": psi_in}))
        record = runner.run(state, rotation_pattern(angles), trial)
        assert fidelity(expected, record.final_state.to_dense()) >= 1 - TOL


def test_rotation_holds_on_every_branch():
    rng = np.random.default_rng(63)
    angles = [0.7, -2.2, 1.3]
    psi_in = random_qubit(rng)
    expected = psi_in
    for alpha in angles:
        expected = j_gate(alpha) @ expected
    state = build_cluster(ClusterSpec.linear(4, inputs={"c0r0": psi_in}))
    branches = PatternRunner(FULL_UPDATE, check=True).branch_states(state, rotation_pattern(angles))
    assert sum(w for w, _ in branches.values()) == pytest.approx(1.0, abs=TOL)
    for weight, final in branches.values():
        assert fidelity(expected, final.to_dense()) >= 1 - TOL


@pytest.mark.parametrize("mode", MODES)
def test_cnot_over_random_inputs(mode):
    rng = np.random.default_rng(64)
    runner = PatternRunner(mode, check=True)
    for trial in range(50):
        control, target = random_qubit(rng), random_qubit(rng)
        expected = dense_apply_two_qubit(product_state([control, target]), 0, 1, CNOT)
        state = build_cluster(cnot_cluster_spec(control, target))
        record = runner.run(state, cnot_pattern(), trial)
        assert record.final_state.labels == ["c2r0", "c2r1"]
        assert fidelity(expected, record.final_state.to_dense()) >= 1 - TOL


# ---- scaling ----


@pytest.mark.slow
def test_in_order_time_is_linear_in_length():
    rows = run_benchmark([2], [8, 16, 32, 64, 128], mode=IN_ORDER, repeats=3)
    assert [r.n for r in rows] == [16, 32, 64, 128, 256]
    assert all(r.max_chi == 4 for r in rows)
    assert rows[0].fit_exponent <= 1.3


@pytest.mark.slow
def test_width_three_full_update_finishes():
    start = time.perf_counter()
    row = time_cell(3, 64, FULL_UPDATE)
    assert row.max_chi == 8
    assert time.perf_counter() - start < 60.0


@pytest.mark.slow
def test_full_update_time_grows_at_most_quadratically():
    short = time_cell(2, 32, FULL_UPDATE, repeats=3)
    long = time_cell(2, 64, FULL_UPDATE, repeats=3)
    assert long.total_ms <= 6.0 * short.total_ms


@pytest.mark.slow
def test_per_step_cost_increases_with_width():
    rows = run_benchmark([1, 2, 3], [32], mode=FULL_UPDATE, repeats=3)
    per_step = [r.per_step_ms for r in rows]
    assert per_step == sorted(per_step)
