import csv
import json

import pytest
import yaml

import src.cli as cli
import src.fermi as fermi
from src.cli import EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_PARTIAL_SCAN, EXIT_SELFTEST_FAILED, main
from src.eos import gas_pressure
from src.selftest import run_checks

TRIVIAL = {"mu_tilde": -50.0, "T_tilde": 1.0, "z": 0.0}


def write_config(tmp_path, data, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def run(command, tmp_path, data=None, *extra, out="out"):
    argv = [command, "--out", str(tmp_path / out)]
    if data is not None:
        argv += ["--config", write_config(tmp_path, data, name=f"{out}.yaml")]
    return main(argv + list(extra))


# ---------------------------------------------------------------------------
# eos-table
# ---------------------------------------------------------------------------


def test_eos_table_single_point(tmp_path):
    code = run("eos-table", tmp_path, {"eos": {"mu": [0.0], "T": [1.0], "B": [1.0]}})
    assert code == EXIT_OK
    rows = read_csv(tmp_path / "out" / "eos_table.csv")
    assert rows[0] == ["mu", "T", "B", "pressure", "density", "lower_bound", "upper_bound"]
    assert len(rows) == 2
    assert float(rows[1][3]) == pytest.approx(float(gas_pressure(0.0, 1.0, 1.0)), rel=1e-15)
    lower, pressure, upper = float(rows[1][5]), float(rows[1][3]), float(rows[1][6])
    assert lower <= pressure <= upper


def test_eos_table_empty_range_writes_header_only(tmp_path):
    code = run("eos-table", tmp_path, {"eos": {"mu": [], "T": [1.0], "B": [0.0]}})
    assert code == EXIT_OK
    assert len(read_csv(tmp_path / "out" / "eos_table.csv")) == 1


def test_eos_table_rows_are_sorted(tmp_path):
    eos = {"mu": [2.0, -1.0, 0.0], "T": [1.0, 0.1, 5.0], "B": [10.0, 0.0, 1.0]}
    assert run("eos-table", tmp_path, {"eos": eos}) == EXIT_OK
    rows = read_csv(tmp_path / "out" / "eos_table.csv")[1:]
    assert len(rows) == 27
    keys = [tuple(float(value) for value in row[:3]) for row in rows]
    assert keys == sorted(keys)


def test_eos_table_without_config(tmp_path):
    assert run("eos-table", tmp_path) == EXIT_OK
    assert len(read_csv(tmp_path / "out" / "eos_table.csv")) == 1


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def test_solve_writes_density_and_report(tmp_path):
    code = run("solve", tmp_path, {"scaled": TRIVIAL, "grid": {"n": 64}})
    assert code == EXIT_OK
    rows = read_csv(tmp_path / "out" / "density.csv")
    assert rows[0] == ["r", "value"]
    assert len(rows) == 65
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["converged"] is True
    assert report["spec_version"] == 1
    assert report["problem"]["nodes"] == 64
    assert "timestamp" in report


def test_solve_is_deterministic(tmp_path):
    config = {"scaled": TRIVIAL, "grid": {"n": 64}}
    assert run("solve", tmp_path, config, out="first") == EXIT_OK
    assert run("solve", tmp_path, config, out="second") == EXIT_OK
    first = json.loads((tmp_path / "first" / "report.json").read_text())
    second = json.loads((tmp_path / "second" / "report.json").read_text())
    first.pop("timestamp")
    second.pop("timestamp")
    assert first == second
    assert (tmp_path / "first" / "density.csv").read_bytes() == (tmp_path / "second" / "density.csv").read_bytes()


def test_solve_non_convergence_exit_code(tmp_path):
    config = {
        "scaled": {"mu_tilde": 0.0, "T_tilde": 0.5, "beta": 1.0},
        "grid": {"n": 100},
        "solver": {"max_iter": 1},
    }
    assert run("solve", tmp_path, config) == EXIT_NOT_CONVERGED
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["converged"] is False
    assert report["iterations"] == 1
    assert (tmp_path / "out" / "density.csv").exists()


def test_solve_emits_unscaled_values(tmp_path):
    config = {"physical": {"Z": 8.0, "B": 16.0, "T": 2.0}, "grid": {"n": 100}, "solver": {"anderson_depth": 5}}
    code = run("solve", tmp_path, config, "--emit-unscaled")
    assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    unscaled = report["unscaled"]
    assert unscaled["length_scale"] == pytest.approx(0.378929, abs=1e-6)
    assert unscaled["pressure"] == pytest.approx(64.0 / unscaled["length_scale"] * report["pressure"], rel=1e-12)
    assert (tmp_path / "out" / "density_unscaled.csv").exists()


def test_invalid_config_exits_with_one(tmp_path):
    config = {"scaled": {"mu_tilde": 0.0, "T_tilde": 0.0}}
    assert run("solve", tmp_path, config) == EXIT_CONFIG
    assert not (tmp_path / "out" / "report.json").exists()


def test_missing_config_file(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "absent.yaml")]) == EXIT_CONFIG


def test_negative_tolerance_scale(tmp_path):
    assert run("selftest", tmp_path, None, "--tolerance-scale", "-1") == EXIT_CONFIG


def test_setup_error_exits_with_one(tmp_path):
    config = {"scaled": {"mu_tilde": 0.0, "T_tilde": 0.5}, "grid": {"n": 100, "r_max": 1.0}}
    assert run("solve", tmp_path, config) == EXIT_CONFIG


# ---------------------------------------------------------------------------
# scan
# ---------------------------------------------------------------------------


def test_single_member_scan_notes_missing_fit(tmp_path):
    config = {"scaled": TRIVIAL, "grid": {"n": 64}, "scan": {"betas": [10.0], "max_workers": 1}}
    assert run("scan", tmp_path, config) == EXIT_OK
    rows = read_csv(tmp_path / "out" / "scan.csv")
    assert rows[0] == ["beta", "pressure", "limit_pressure", "rel_gap", "converged", "error"]
    assert [row[0] for row in rows[1:]] == ["10.0", "inf"]
    summary = json.loads((tmp_path / "out" / "scan_summary.json").read_text())
    assert summary["decay_exponent"] is None
    assert "insufficient points" in summary["note"]
    assert summary["complete"] is True


def test_partial_scan_exit_code(tmp_path):
    config = {
        "scaled": {"mu_tilde": 0.0, "T_tilde": 0.5},
        "grid": {"n": 100},
        "solver": {"max_iter": 1},
        "scan": {"betas": [1.0, 2.0]},
    }
    assert run("scan", tmp_path, config) == EXIT_PARTIAL_SCAN
    rows = read_csv(tmp_path / "out" / "scan.csv")
    assert len(rows) == 4
    assert all(row[4] == "false" for row in rows[1:])


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------


@pytest.fixture
def broken_sommerfeld(monkeypatch):
    """Double the first correction of the large-argument expansion."""
    original = fermi._sommerfeld_coefficients

    def broken(k):
        coefficients = original(k)
        return (coefficients[0], 2.0 * coefficients[1]) + coefficients[2:]

    monkeypatch.setattr(fermi, "_sommerfeld_coefficients", broken)


def test_mutation_is_detected(broken_sommerfeld):
    (result,) = run_checks(names=["fermi_asymptotic"])
    assert not result.passed
    assert result.measured > 1e-6


def test_selftest_failure_exit_code(tmp_path, monkeypatch, broken_sommerfeld, capsys):
    monkeypatch.setattr(
        cli, "run_checks", lambda tolerance_scale: run_checks(tolerance_scale, names=["fermi_asymptotic"])
    )
    assert run("selftest", tmp_path) == EXIT_SELFTEST_FAILED
    assert "0/1 checks passed" in capsys.readouterr().out


def test_zero_tolerance_scale_fails(tmp_path, monkeypatch):
    monkeypatch.setattr(
        cli, "run_checks", lambda tolerance_scale: run_checks(tolerance_scale, names=["eos_dos_form"])
    )
    assert run("selftest", tmp_path, None, "--tolerance-scale", "0") == EXIT_SELFTEST_FAILED


@pytest.mark.slow
def test_full_selftest_passes(tmp_path, capsys):
    assert run("selftest", tmp_path) == EXIT_OK
    output = capsys.readouterr().out
    assert "SELF-TEST RESULTS" in output
    assert "❌" not in output


def test_automatic_log_file(tmp_path):
    assert run("eos-table", tmp_path, {"logging": {"file": "auto"}}) == EXIT_OK
    logs = list((tmp_path / "out").glob("mtf_eos-table_*.log"))
    assert len(logs) == 1
    assert "mtf eos-table" in logs[0].read_text(encoding="utf-8")
