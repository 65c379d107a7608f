import io
import json

import pytest

from clustermps.cli import commands
from clustermps.cli.app import EXIT_INVARIANT, EXIT_OK, EXIT_VALIDATION, ClusterSimApp
from clustermps.core.cluster import ClusterSpec
from clustermps.core.errors import InvariantViolation
from clustermps.core.mps import MpsState
from clustermps.utils.file_utils import json_digest, load_json


def run_cli(*argv):
    out = io.StringIO()
    code = ClusterSimApp().run([str(a) for a in argv], stdout=out)
    return code, out.getvalue()


def write_json(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


# ---- build ----


def test_build_writes_dump(demos, tmp_path):
    code, text = run_cli("build", demos / "grid_2x4.json", tmp_path / "out" / "grid.npz")
    assert code == EXIT_OK
    doc = json.loads(text)
    assert doc["num_qubits"] == 8
    assert doc["max_chi"] == 4
    assert doc["chi_profile"] == [2, 4, 4, 4, 4, 4, 2]
    assert MpsState.load(doc["path"]).labels == ClusterSpec.grid(2, 4).labels()


def test_build_never_overwrites(demos, tmp_path):
    target = tmp_path / "grid.npz"
    _, first = run_cli("build", demos / "linear_1x5.json", target)
    _, second = run_cli("build", demos / "linear_1x5.json", target)
    assert json.loads(first)["path"] == str(target)
    assert json.loads(second)["path"] == str(tmp_path / "grid_1.npz")


def test_malformed_json_is_a_validation_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    assert run_cli("build", bad, tmp_path / "x.npz")[0] == EXIT_VALIDATION


def test_missing_file_is_a_validation_error(tmp_path):
    assert run_cli("build", tmp_path / "nope.json", tmp_path / "x.npz")[0] == EXIT_VALIDATION


def test_invalid_spec_is_a_validation_error(tmp_path):
    spec = write_json(tmp_path / "spec.json", {"width": 0, "length": 2, "range": 1})
    assert run_cli("build", spec, tmp_path / "x.npz")[0] == EXIT_VALIDATION


def test_invariant_violation_exit_code(demos, tmp_path, monkeypatch):
    def broken(spec):
        raise InvariantViolation("lost canonical form")

    monkeypatch.setattr(commands, "build_cluster", broken)
    assert run_cli("build", demos / "grid_2x4.json", tmp_path / "x.npz")[0] == EXIT_INVARIANT


# ---- run ----


def test_run_is_deterministic(demos):
    argv = ("run", demos / "linear_1x5.json", demos / "linear_1x5_xpattern.json", "--seed", "7")
    code_a, a = run_cli(*argv)
    code_b, b = run_cli(*argv)
    assert code_a == code_b == EXIT_OK
    doc_a, doc_b = json.loads(a), json.loads(b)
    doc_a.pop("timings")
    doc_b.pop("timings")
    assert doc_a == doc_b
    assert len(doc_a["outcome_string"]) == 4
    assert doc_a["final_labels"] == ["c4r0"]


def test_run_report_identifies_inputs(demos):
    spec, pattern = demos / "linear_1x5.json", demos / "linear_1x5_xpattern.json"
    _, text = run_cli("run", spec, pattern, "--seed", "18446744073709551615", "--mode", "in_order")
    doc = json.loads(text)
    assert doc["inputs"] == {
        "spec_sha256": json_digest(load_json(str(spec))),
        "pattern_sha256": json_digest(load_json(str(pattern))),
        "seed": 2 ** 64 - 1,
    }
    assert doc["mode"] == "in_order"
    assert len(doc["timings"]["per_step_ms"]) == 4
    assert "numpy" in doc["environment"]
    assert "verification" not in doc


def test_run_in_order_rejects_unordered_pattern(demos, tmp_path):
    pattern = write_json(tmp_path / "p.json", {
        "steps": [{"target": "c2r0"}, {"target": "c0r0"}],
        "outputs": ["c4r0"],
    })
    code, text = run_cli("run", demos / "linear_1x5.json", pattern, "--mode", "in_order")
    assert code == EXIT_VALIDATION
    assert text == ""
    assert run_cli("run", demos / "linear_1x5.json", pattern)[0] == EXIT_OK


@pytest.mark.parametrize("mode", ["full_update", "in_order"])
def test_run_teleport_with_verification(demos, mode):
    code, text = run_cli(
        "run", demos / "teleport_spec.json", demos / "teleport_pattern.json",
        "--mode", mode, "--verify", "--check", "--seed", "3",
    )
    assert code == EXIT_OK
    doc = json.loads(text)
    assert doc["verification"]["outputs"] == ["c2r0"]
    assert doc["verification"]["fidelity"] == pytest.approx(1.0, abs=1e-9)


def test_run_cnot_with_verification(demos):
    code, text = run_cli("run", demos / "cnot_spec.json", demos / "cnot_pattern.json", "--verify")
    assert code == EXIT_OK
    assert json.loads(text)["verification"]["fidelity"] == pytest.approx(1.0, abs=1e-9)


def test_run_rejects_list_target(demos, tmp_path):
    pattern = write_json(tmp_path / "p.json", {"steps": [{"target": ["c0r0"]}]})
    code, text = run_cli("run", demos / "linear_1x5.json", pattern)
    assert code == EXIT_VALIDATION
    assert text == ""


def test_run_verify_mismatch_is_an_invariant_violation(demos, monkeypatch):
    replay = commands.dense_replay

    def reversed_replay(*args):
        psi, labels = replay(*args)
        return psi[::-1], labels

    monkeypatch.setattr(commands, "dense_replay", reversed_replay)
    code, text = run_cli(
        "run", demos / "teleport_spec.json", demos / "teleport_pattern.json",
        "--verify", "--seed", "3",
    )
    assert code == EXIT_INVARIANT
    assert text == ""


def test_run_verify_output_mismatch_is_an_invariant_violation(demos, monkeypatch):
    replay = commands.dense_replay

    def relabelled_replay(*args):
        psi, _ = replay(*args)
        return psi, ["c1r0"]

    monkeypatch.setattr(commands, "dense_replay", relabelled_replay)
    code, _ = run_cli(
        "run", demos / "teleport_spec.json", demos / "teleport_pattern.json", "--verify",
    )
    assert code == EXIT_INVARIANT


def test_verify_flag_refuses_large_clusters(tmp_path):
    spec = write_json(tmp_path / "spec.json", ClusterSpec.grid(3, 7).to_json())
    pattern = write_json(tmp_path / "p.json", {"steps": []})
    assert run_cli("run", spec, pattern, "--verify")[0] == EXIT_VALIDATION
    assert run_cli("run", spec, pattern)[0] == EXIT_OK


@pytest.mark.parametrize("seed", ["-1", "18446744073709551616", "abc", "1.5"])
def test_bad_seed_rejected(demos, seed):
    code, _ = run_cli("run", demos / "linear_1x5.json", demos / "linear_1x5_xpattern.json", "--seed", seed)
    assert code == EXIT_VALIDATION


# ---- verify ----


def test_verify_grid(demos):
    code, text = run_cli("verify", demos / "grid_3x5.json")
    assert code == EXIT_OK
    doc = json.loads(text)
    assert doc["passed"] and doc["canonical"]
    assert (doc["bound"], doc["rule"], doc["max_chi"]) == (8, "2^d", 8)
    assert doc["dense"]["rank_mismatches"] == []
    assert doc["dense"]["fidelity"] == pytest.approx(1.0, abs=1e-9)


def test_verify_diagonal_grid(demos):
    code, text = run_cli("verify", demos / "grid_2x5_diagonal.json")
    assert code == EXIT_OK
    doc = json.loads(text)
    assert doc["bound"] == 8
    assert doc["max_chi"] <= 8


def test_verify_reports_range_violation(demos):
    code, text = run_cli("verify", demos / "range_violation.json")
    assert code == EXIT_VALIDATION
    doc = json.loads(text)
    assert not doc["passed"]
    assert doc["range_violations"] == [["c0r1", "c3r1"]]


# ---- bench ----


def test_bench_to_stdout():
    code, text = run_cli("bench", "--widths", "1", "--lengths", "4,8")
    assert code == EXIT_OK
    lines = text.splitlines()
    assert lines[0] == "d,l,n,mode,max_chi,total_ms,per_step_ms,fit_exponent"
    assert len(lines) == 3
    assert lines[1].startswith("1,4,4,in_order,2,")


def test_bench_to_file(tmp_path):
    target = tmp_path / "bench.csv"
    code, text = run_cli("bench", "--widths", "2", "--lengths", "3", "--mode", "full_update",
                         "--out", target)
    assert code == EXIT_OK
    assert text == ""
    assert target.read_text(encoding="utf-8").splitlines()[1].startswith("2,3,6,full_update,4,")


@pytest.mark.parametrize("value", ["", "0,4", "x"])
def test_bench_rejects_bad_lengths(value):
    assert run_cli("bench", "--lengths", value)[0] == EXIT_VALIDATION


# ---- parser ----


def test_help_exits_cleanly():
    assert run_cli("--help")[0] == EXIT_OK


def test_missing_subcommand():
    assert run_cli()[0] == EXIT_VALIDATION
