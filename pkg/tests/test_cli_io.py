from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from cavbistab import cli
from cavbistab import io as cio
from cavbistab.dynamics import IntegrationError
from cavbistab.params import collective
from cavbistab.phases import phase_diagram
from cavbistab.spectra import branch_follow, scan_spectrum

LAB = ["--gN", "1.2", "--gamma", "0.0022", "--natoms", "200000"]


def test_spectrum_example_csv(tmp_path):
    out = tmp_path / "spectrum.csv"
    rc = cli.run(["spectrum", *LAB, "--neta", "12100", "--axis", "delta_a", "--range", "-2.2:2.2:2001", "--delta-ca", "0", "-o", str(out)])
    assert rc == 0
    meta, columns, rows = cio.read_csv(out)
    assert columns == ["x", "branch_id", "n", "T", "p_excited", "stability"]
    assert meta["command"] == "spectrum"
    branches = {int(r[1]) for r in rows}
    assert len(branches) == 3
    assert {r[5] for r in rows} <= {"stable", "unstable", "marginal"}
    info = json.loads((tmp_path / "spectrum.csv.run.json").read_text())
    assert info["wall_time_s"] >= 0


def test_boundaries_json(capsys):
    assert cli.run(["boundaries", *LAB]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert len(payload["data"]) == 7
    assert payload["data"]["min_center_s_eta"] == pytest.approx(4889.3, rel=1e-4)
    assert payload["metadata"]["params"]["n_atoms"] == 200000


def test_hysteresis_and_bifurcation_commands(tmp_path):
    out = tmp_path / "hyst.csv"
    rc = cli.run(["hysteresis", *LAB, "--axis", "pump", "--range", "1e3:3e6:800", "--scale", "log", "--no-stability", "-o", str(out)])
    assert rc == 0
    meta, traces = cio.read_hysteresis_csv(out)
    jumps = {t.direction: t.jump_points for t in traces}
    assert jumps["up"][0] == pytest.approx(4.296e5, rel=0.02)
    assert jumps["down"][0] == pytest.approx(5243, rel=0.02)
    out = tmp_path / "bif.json"
    assert cli.run(["bifurcation", *LAB, "--range", "1e2:1e7:400", "--format", "json", "-o", str(out)]) == 0
    meta, data = cio.read_json(out)
    assert data


def test_dynamics_command(tmp_path):
    out = tmp_path / "traj.csv"
    rc = cli.run(["dynamics", "--gN", "2", "--gamma", "0.5", "--natoms", "50", "--neta", "2", "--t-end", "5", "--samples", "11", "-o", str(out)])
    assert rc == 0
    _, columns, rows = cio.read_csv(out)
    assert columns == list(cio.TRAJECTORY_COLUMNS)
    assert len(rows) == 11
    assert float(rows[0][1]) == 0.0


def test_negative_range_and_config_override(tmp_path):
    cfg = tmp_path / "lab.cfg"
    cfg.write_text("# laboratory set\ngN = 1.2\ngamma = 0.0022\nnatoms = 200000\nneta = 5\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.run(["spectrum", "--config", str(cfg), "--range", "-2:2:101", "-o", str(a)]) == 0
    assert cli.run(["spectrum", "--config", str(cfg), "--neta", "12100", "--range", "-2:2:101", "-o", str(b)]) == 0
    meta_a, _, rows_a = cio.read_csv(a)
    meta_b, _, _ = cio.read_csv(b)
    assert meta_a["params"]["eta_plus"] == pytest.approx(np.sqrt(5))
    assert meta_b["params"]["eta_plus"] == pytest.approx(110.0)
    assert float(rows_a[0][0]) == -2.0


@pytest.mark.parametrize(
    "argv",
    [
        ["spectrum", "--gamma", "0.1", "--natoms", "10"],  # no coupling
        ["spectrum", "--g", "0.1", "--gN", "1", "--gamma", "0.1", "--natoms", "10"],
        ["spectrum", *LAB, "--range", "1:0:10"],
        ["spectrum", *LAB, "--range", "nonsense"],
        ["spectrum", *LAB, "--config", "/nonexistent/file"],
        ["spectrum", "--gN", "1", "--gamma", "-1", "--natoms", "10"],
        ["frobnicate"],
    ],
)
def test_configuration_errors_exit_2(argv):
    assert cli.run(argv) == 2


def test_numerical_failure_exits_3(monkeypatch):
    def boom(*args, **kwargs):
        raise IntegrationError("step size underflow", None, 1.5)

    monkeypatch.setattr(cli, "integrate", boom)
    assert cli.run(["dynamics", "--gN", "2", "--gamma", "0.5", "--natoms", "50", "--neta", "2"]) == 3


def test_diagram_independent_of_worker_count(tmp_path):
    outs = []
    for threads in ("1", "4"):
        out = tmp_path / f"d{threads}.csv"
        argv = ["phase-diagram", "--gN", "12.4", "--natoms", "10000", "--gamma-range", "1e-3:10:10", "--neta-range", "1:1e7:10", "--threads", threads, "-o", str(out)]
        assert cli.run(argv) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    meta, diagram = cio.read_diagram_csv(tmp_path / "d1.csv")
    assert diagram.shape == (10, 10)


def test_thread_count_from_environment(monkeypatch):
    from cavbistab.phases import resolve_workers

    monkeypatch.setenv("CAVBISTAB_THREADS", "3")
    assert resolve_workers(None) == 3
    assert resolve_workers(2) == 2
    monkeypatch.delenv("CAVBISTAB_THREADS")
    assert resolve_workers(None) == 1


def test_spectrum_round_trip(tmp_path, lab):
    branches = scan_spectrum(lab.with_n_eta(1e4), "delta_a", np.linspace(-2, 2, 401))
    path = tmp_path / "s.csv"
    cio.write_spectrum_csv(path, branches, {"note": "x"})
    meta, back = cio.read_spectrum_csv(path)
    assert meta["note"] == "x" and meta["axis"] == "delta_a"
    assert len(back) == len(branches)
    for a, b in zip(branches, back):
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.n, b.n)
        np.testing.assert_array_equal(a.stability, b.stability)
    again = cio.branches_from_json(json.loads(cio.dumps(cio.spectrum_json(branches))))
    np.testing.assert_array_equal(again[1].T, branches[1].T)


def test_hysteresis_round_trip(tmp_path, lab):
    branches = scan_spectrum(lab.with_n_eta(1e4), "delta_a", np.linspace(-2, 2, 401), with_stability=False)
    traces = [branch_follow(branches, "up", "max", 0.0), branch_follow(branches, "down", "max", 0.0)]
    path = tmp_path / "h.csv"
    cio.write_hysteresis_csv(path, traces, {})
    _, back = cio.read_hysteresis_csv(path)
    for a, b in zip(traces, back):
        assert a.direction == b.direction
        np.testing.assert_array_equal(a.n, b.n)
        assert a.jump_points == b.jump_points


def test_diagram_round_trip(tmp_path):
    p = collective(12.4, 0.1, 10_000)
    diagram = phase_diagram(p, np.logspace(-3, 1, 4), np.logspace(0, 7, 5), threads=1)
    path = tmp_path / "d.csv"
    cio.write_diagram_csv(path, diagram, cio.diagram_metadata(diagram))
    _, back = cio.read_diagram_csv(path)
    assert back.labels.tolist() == diagram.labels.tolist()
    np.testing.assert_array_equal(back.max_population, diagram.max_population)
    np.testing.assert_array_equal(back.n_eta, diagram.n_eta)


def test_float_format_is_lossless():
    for x in (0.1, 1 / 3, 1e-300, 6.02214076e23):
        assert float(cio.fmt(x)) == x


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cavbistab", "--version"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.strip()
