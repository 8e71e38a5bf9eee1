from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from qedmd import cli
from qedmd.dmd import SampleRecord, dump_samples


def run(tmp_path, sub, scenario=None, name="out", extra=()):
    args = [sub, "--out", str(tmp_path / name)]
    if scenario is not None:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(scenario))
        args += ["--scenario", str(path)]
    return cli.main(args + list(extra)), tmp_path / name


def read_csv(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def test_cost_logical_default(tmp_path, capsys):
    code, out = run(tmp_path, "cost-logical")
    assert code == cli.EXIT_OK
    rows = {r["name"]: r for r in read_csv(out / "logical.csv")}
    assert int(rows["logical_qubits"]["value"]) == 74
    assert float(rows["t_count"]["value"]) / 2.654e12 == pytest.approx(1, abs=0.1)
    summary = json.loads(capsys.readouterr().out)
    assert summary["status"] == "ok" and summary["qubits"] == 74


def test_provenance_header(tmp_path):
    code, out = run(tmp_path, "cost-logical", extra=["--seed", "5"])
    head = (out / "logical.csv").read_text().splitlines()[:5]
    assert head[0] == "# tool=qedmd"
    assert "# seed=5" in head and "# subcommand=cost-logical" in head
    payload = json.loads((out / "logical.json").read_text())
    assert payload["provenance"]["seed"] == 5


def test_reruns_are_byte_identical(tmp_path):
    scenario = {"model": {"sites": 4, "U": 12.0}, "dmd": {"eps_target": 0.5, "ansatz": ["total-spin-spin"]}}
    a = run(tmp_path, "dmd-fit", scenario, "a")[1]
    b = run(tmp_path, "dmd-fit", scenario, "b")[1]
    for name in ("couplings.csv", "fit.json", "samples.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_dmd_fit_on_synthesized_heisenberg_samples(tmp_path):
    rng = np.random.default_rng(0)
    d = rng.uniform(-1.5, 0.5, size=12)
    samples = [SampleRecord(f"s{i}", np.array([d[i]]), float(0.33 * d[i] - 1.0), "low-energy",
                            ("total-spin-spin",)) for i in range(12)]
    dump_samples(samples, tmp_path / "samples.json")
    code, out = run(tmp_path, "dmd-fit", {"dmd": {"samples": str(tmp_path / "samples.json")}})
    assert code == cli.EXIT_OK
    report = json.loads((out / "fit.json").read_text())
    assert report["residual_max"] < 1e-9
    assert report["fit"]["couplings"][0] == pytest.approx(0.33)


def test_dmd_discover_default(tmp_path):
    code, out = run(tmp_path, "dmd-discover", {"model": {"U": 12.0}, "dmd": {"eps_target": 4 / 144}})
    assert code == cli.EXIT_OK
    result = json.loads((out / "discovery.json").read_text())
    assert result["verdict"]["case"] == "B2-true-positive"
    assert result["fit"]["labels"] == ["total-spin-spin"]
    assert (out / "trace.jsonl").read_text().count("\n") >= 1


def test_model_ed(tmp_path):
    code, out = run(tmp_path, "model-ed", {"model": {"sites": 2, "U": 8.0, "sectors": [[1, 1]]}})
    assert code == cli.EXIT_OK
    rows = read_csv(out / "spectrum.csv")
    assert len(rows) == 4
    assert float(rows[0]["eigenvalue"]) == pytest.approx((8 - np.hypot(8, 4)) / 2)


def test_reproduce_table2(tmp_path):
    code, out = run(tmp_path, "reproduce-table2")
    assert code == cli.EXIT_OK
    rows = read_csv(out / "table2.csv")
    assert len(rows) == 5 * 2 + 48 * 3
    assert set(rows[0]) >= {"value", "reference", "deviation", "units"}
    q = [r for r in rows if r["quantity"] == "logical_qubits"]
    assert all(float(r["deviation"]) == 0 for r in q)


def test_cost_physical_default(tmp_path):
    code, out = run(tmp_path, "cost-physical")
    assert code == cli.EXIT_OK
    rows = {r["quantity"]: r for r in read_csv(out / "physical.csv")}
    assert int(rows["logical_qubits"]["value"]) == 74
    assert int(rows["distance"]["value"]) == 33
    assert float(rows["runtime"]["value"]) == float(rows["consumption_time"]["value"])
    assert float(rows["failure_logical"]["value"]) <= 0.01


def test_error_sweep_with_spin_ansatz(tmp_path):
    scenario = {"model": {"sites": 2, "U": 8.0, "sectors": [[1, 1]]},
                "dmd": {"pool": ["total-double-occupancy", "total-hopping"], "cutoff": 100.0},
                "error": {"target": 0.05}}
    code, out = run(tmp_path, "error-sweep", scenario)
    assert code == cli.EXIT_OK
    rows = read_csv(out / "sweep.csv")
    assert len(rows) == 22
    assert all(float(r["observed"]) <= float(r["bound"]) for r in rows)


def test_bounds_extrapolate_small(tmp_path):
    scenario = {"bounds": {"sizes": [2, 4, 6], "ground_sizes": [2, 4, 6], "targets": [10]}}
    code, out = run(tmp_path, "bounds-extrapolate", scenario)
    assert code == cli.EXIT_OK
    res = json.loads((out / "extrapolation.json").read_text())
    assert res["targets"][0]["target_sites"] == 10
    assert len(read_csv(out / "edge_series.csv")) == 3


def test_project_sim_small(tmp_path):
    scenario = {"model": {"sites": 4, "geometry": "ladder", "U": 8.0}, "projector": {"trials": 5, "eps": [1e-2]}}
    code, out = run(tmp_path, "project-sim", scenario)
    assert code == cli.EXIT_OK
    assert (out / "trials.csv").exists() and (out / "projector.json").exists()


@pytest.mark.parametrize(
    "scenario",
    [{"bogus": 1}, {"model": {"colour": "red"}}, {"model": 3}, {"seed": -1}],
)
def test_schema_errors_exit_2(tmp_path, scenario):
    assert run(tmp_path, "cost-logical", scenario)[0] == cli.EXIT_SCHEMA


def test_unreadable_scenario_exit_2(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    assert cli.main(["cost-logical", "--scenario", str(tmp_path / "bad.json"), "--out", str(tmp_path)]) == 2


def test_missing_target_exit_2(tmp_path):
    assert run(tmp_path, "dmd-discover")[0] == cli.EXIT_SCHEMA


def test_dimension_cap_exit_4(tmp_path):
    assert run(tmp_path, "model-ed", {"model": {"dim_cap": 2}})[0] == cli.EXIT_RESOURCE


def test_unreachable_distance_exit_3(tmp_path):
    scenario = {"physical": {"p_phys": 9e-3, "distillery": "(15-to-1)_{13,5,5}(15-to-1)_{32,12,14}"}}
    assert run(tmp_path, "cost-physical", scenario)[0] == cli.EXIT_INVARIANT


def test_rank_deficient_fit_exit_3(tmp_path):
    samples = [SampleRecord(f"s{i}", np.array([float(i), 2.0 * i]), float(i), "low-energy", ("a", "b"))
               for i in range(5)]
    dump_samples(samples, tmp_path / "s.json")
    assert run(tmp_path, "dmd-fit", {"dmd": {"samples": str(tmp_path / "s.json")}})[0] == cli.EXIT_INVARIANT


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qedmd", "cost-logical", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["qubits"] == 74
    bad = subprocess.run([sys.executable, "-m", "qedmd", "nonsense"], capture_output=True, text=True)
    assert bad.returncode == 2
