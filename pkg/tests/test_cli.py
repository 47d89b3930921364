"""Command line behavior: subcommands, exit codes, artifacts."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import pytest

from psrelief import dsl
from psrelief.cli import main
from psrelief.io import load_matrix_csv

INSTANCES = Path(__file__).parent.parent / "instances"
DERIVED = str(INSTANCES / "derived_1x1.json")


def data_path(name: str) -> str:
    return str(resources.files("psrelief").joinpath("data", name))


class TestSolve:
    def test_solve_derived_instance(self, tmp_path, capsys):
        out = tmp_path / "q.json"
        code = main(["solve", "--instance", DERIVED, "--variant", "simplified",
                     "--tol", "1e-5", "--format", "json", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["result"]["converged"] is True
        assert abs(payload["result"]["q"][0][0] - 0.5) < 1e-3
        assert payload["manifest"]["command"] == "solve"

    def test_non_convergence_exit_code(self, tmp_path):
        out = tmp_path / "q.json"
        code = main(["solve", "--instance", DERIVED, "--tol", "1e-12",
                     "--max-iter", "5", "--format", "json", "--out", str(out)])
        assert code == 1
        assert json.loads(out.read_text())["result"]["converged"] is False

    def test_missing_instance_is_input_error(self, capsys):
        code = main(["solve", "--instance", "/nonexistent.json"])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_bad_json_reports_position(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"m": 1,\n  "n": ]')
        code = main(["solve", "--instance", str(bad)])
        assert code == 2
        err = capsys.readouterr().err
        assert ":2:" in err

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["solve", "--instance", DERIVED, "--wibble"])
        assert exc.value.code == 2


class TestSimulateOracleAgreement:
    def test_same_q_tables(self, tmp_path):
        sim_out = tmp_path / "sim.json"
        ora_out = tmp_path / "ora.json"
        assert main(["simulate", "--instance", DERIVED, "--p", "3",
                     "--max-iter", "300", "--format", "json", "--out", str(sim_out)]) == 0
        assert main(["oracle", "--instance", DERIVED, "--p", "3",
                     "--max-iter", "300", "--format", "json", "--out", str(ora_out)]) == 0
        sim = json.loads(sim_out.read_text())["result"]
        ora = json.loads(ora_out.read_text())["result"]
        assert sim["q"] == ora["q"]
        assert sim["iterations"] == ora["iterations"]


class TestBuild:
    def test_emitted_system_parses(self, tmp_path, capsys):
        out = tmp_path / "system.psys"
        assert main(["build", "--instance", DERIVED, "--p", "2",
                     "--emit", str(out)]) == 0
        assert "membranes" in capsys.readouterr().out
        parsed = dsl.parse(out.read_text())
        assert parsed.ok


class TestCompare:
    def test_case_study_statistics(self, tmp_path):
        out = tmp_path / "stats.json"
        code = main(["compare",
                     "--candidate", data_path("katrina_psystem.csv"),
                     "--reference", data_path("katrina_reference.csv"),
                     "--format", "json", "--out", str(out)])
        assert code == 0
        result = json.loads(out.read_text())["result"]
        assert abs(result["average"] - 1.98) <= 0.01
        assert abs(result["median"] - 0.82) <= 0.01
        assert abs(result["max"] - 7.89) <= 0.01

    def test_dimension_mismatch_is_input_error(self, capsys):
        code = main(["compare",
                     "--candidate", data_path("example1_psystem.csv"),
                     "--reference", data_path("example2_reference.csv")])
        assert code == 2


class TestTrace:
    def test_trace_psys_file(self, tmp_path):
        psys = tmp_path / "sys.psys"
        psys.write_text(
            "membrane 1\ninit 1: a^3 d\n"
            "rule r1: [a^2 -> b]'0 @ 1\nrule r2: [a -> c]'0 @ 1\nrule r3: [d -> e]'0 @ 1\n"
            "prio r1 > r2\n"
        )
        out = tmp_path / "trace.txt"
        assert main(["trace", "--psys", str(psys), "--out", str(out)]) == 0
        assert out.read_text().splitlines() == [
            "step=1 membrane=1 rule=r1 count=1",
            "step=1 membrane=1 rule=r2 count=1",
            "step=1 membrane=1 rule=r3 count=1",
        ]

    def test_trace_requires_some_input(self, capsys):
        assert main(["trace"]) == 2


class TestDeterminism:
    def test_same_manifest_byte_identical(self, tmp_path):
        outs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            assert main(["solve", "--instance", DERIVED, "--timestamp", "2026-01-01T00:00:00",
                         "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_csv_round_trip_lossless(self, tmp_path):
        out = tmp_path / "q.csv"
        assert main(["solve", "--instance", DERIVED, "--timestamp", "t0",
                     "--out", str(out)]) == 0
        q = load_matrix_csv(out)
        code = main(["solve", "--instance", DERIVED, "--timestamp", "t0",
                     "--format", "json", "--out", str(tmp_path / "q.json")])
        assert code == 0
        ref = json.loads((tmp_path / "q.json").read_text())["result"]["q"]
        assert q.tolist() == ref
