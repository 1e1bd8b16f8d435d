import json
import math

import numpy as np
import pytest

from nonlocal_heat import cli
from nonlocal_heat.io import read_field_json


def base_config(out_dir, **overrides):
    cfg = {
        "domain": {"dim": 1, "lengths": [1.0], "n": [49]},
        "time": {"T": 0.1, "steps": 100, "scheme": "implicit_euler"},
        "potential": {"name": "quadratic", "params": []},
        "initial": {"name": "sine_mode", "params": {"k": 1, "amplitude": 0.5}},
        "fixedpoint": {"tol": 1e-10, "max_iter": 200, "damping": 1.0},
        "output": {"dir": str(out_dir), "formats": ["csv", "json"]},
        "mode": "solve",
        "seed": 0,
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def test_solve_zero_datum(tmp_path):
    out = tmp_path / "out"
    cfg = base_config(out)
    cfg["initial"] = {"name": "constant", "params": {"value": 0.0}}
    code = cli.run(write_config(tmp_path, cfg), quiet=True)
    assert code == 0
    ut = read_field_json(out / "ut.json")
    assert np.all(ut.values == 0.0)
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] is True
    assert report["iterations"] == 1
    assert (out / "config.json").exists()
    assert (out / "ut.csv").exists()
    assert (out / "trajectory.csv").exists()


def test_solve_heat_closed_form(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = base_config(out)
    cfg["domain"]["n"] = [199]
    cfg["time"]["steps"] = 1000
    cfg["potential"] = {"name": "zero", "params": []}
    cfg["initial"]["params"]["amplitude"] = 1.0
    code = cli.run(write_config(tmp_path, cfg))
    assert code == 0
    summary = capsys.readouterr().out.strip()
    assert "converged=True" in summary and "elliptic_residual=" in summary
    ut = read_field_json(out / "ut.json")
    coeff = -math.expm1(-math.pi**2 * 0.1) / math.pi**2
    assert np.max(ut.values) == pytest.approx(coeff, rel=1e-3)
    report = json.loads((out / "report.json").read_text())
    assert report["verification"]["solution_bounds"]["passed"] is True
    assert report["verification"]["energy"]["bound_ok"] is True


def test_invalid_steps_names_field(tmp_path, capsys):
    cfg = base_config(tmp_path / "out")
    cfg["time"]["steps"] = 1
    code = cli.run(write_config(tmp_path, cfg), quiet=True)
    assert code == 3
    assert "time.steps" in capsys.readouterr().err


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: c["domain"].update(dim=3),
        lambda c: c["domain"].update(n=[0]),
        lambda c: c["time"].update(T=-1.0),
        lambda c: c["potential"].update(name="mystery"),
        lambda c: c["initial"].update(name="spike"),
        lambda c: c["fixedpoint"].update(damping=2.0),
        lambda c: c["output"].update(formats=["xml"]),
        lambda c: c.update(mode="meditate"),
        lambda c: c.update(seed="zero"),
    ],
)
def test_invalid_configs_exit_3(tmp_path, mutate):
    cfg = base_config(tmp_path / "out")
    mutate(cfg)
    assert cli.run(write_config(tmp_path, cfg), quiet=True) == 3


def test_missing_config_exits_3(tmp_path):
    assert cli.run(tmp_path / "nope.json", quiet=True) == 3


def test_sign_check_rejects_signed_datum(tmp_path):
    cfg = base_config(tmp_path / "out")
    cfg["initial"] = {"name": "sine_mode", "params": {"k": 2}, "sign_check": True}
    assert cli.run(write_config(tmp_path, cfg), quiet=True) == 3


def test_nonconvergence_exits_2_with_artifacts(tmp_path):
    out = tmp_path / "out"
    cfg = base_config(out)
    cfg["fixedpoint"]["max_iter"] = 1
    cfg["initial"]["params"]["amplitude"] = 1.0
    code = cli.run(write_config(tmp_path, cfg), quiet=True)
    assert code == 2
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] is False
    assert len(report["residual_history"]) == 1
    assert (out / "ut.json").exists()


def test_reports_are_reproducible(tmp_path):
    cfg1 = base_config(tmp_path / "a")
    cfg2 = base_config(tmp_path / "b")
    assert cli.run(write_config(tmp_path, cfg1, "c1.json"), quiet=True) == 0
    assert cli.run(write_config(tmp_path, cfg2, "c2.json"), quiet=True) == 0
    a = (tmp_path / "a" / "report.json").read_bytes()
    b = (tmp_path / "b" / "report.json").read_bytes()
    # the output dir is the only difference between the configs
    assert json.loads(a)["files"] == json.loads(b)["files"]
    ja, jb = json.loads(a), json.loads(b)
    assert ja == jb


def test_probe_mode(tmp_path):
    out = tmp_path / "out"
    cfg = base_config(out, mode="probe")
    cfg["fixedpoint"]["starts"] = 4
    code = cli.run(write_config(tmp_path, cfg), quiet=True)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["probe"]["all_converged"] is True
    assert report["probe"]["max_pairwise_relative"] <= 1e-8
    assert len(report["probe"]["starts"]) == 4
    assert report["probe"]["generator"] == "numpy-pcg64"
    assert report["threshold"]["applicable"] is True
    assert (out / "ut.json").exists()


def test_probe_reproducible_with_seed(tmp_path):
    cfg1 = base_config(tmp_path / "a", mode="probe")
    cfg2 = base_config(tmp_path / "b", mode="probe")
    assert cli.run(write_config(tmp_path, cfg1, "c1.json"), seed=11, quiet=True) == 0
    assert cli.run(write_config(tmp_path, cfg2, "c2.json"), seed=11, quiet=True) == 0
    a = json.loads((tmp_path / "a" / "report.json").read_text())
    b = json.loads((tmp_path / "b" / "report.json").read_text())
    assert a == b


def test_convergence_study_spatial(tmp_path):
    out = tmp_path / "out"
    cfg = base_config(out, mode="convergence_study")
    cfg["potential"] = {"name": "zero", "params": []}
    cfg["domain"]["n"] = [49]
    cfg["time"]["steps"] = 100
    cfg["study"] = {"levels": 3, "refine": "space_time"}
    code = cli.run(write_config(tmp_path, cfg), quiet=True)
    assert code == 0
    lines = (out / "study.csv").read_text().splitlines()
    assert lines[0] == (
        "level,n,h,dt,uT_error_vs_finest,elliptic_residual,energy_mismatch,observed_order"
    )
    assert len(lines) == 4
    order = float(lines[3].split(",")[-1])
    assert 1.8 <= order <= 2.2
    # errors vs finest decrease, finest row is zero
    errs = [float(line.split(",")[4]) for line in lines[1:]]
    assert errs[0] > errs[1] > errs[2] == 0.0


def test_convergence_study_zero_datum_reports_na(tmp_path):
    out = tmp_path / "out"
    cfg = base_config(out, mode="convergence_study")
    cfg["initial"] = {"name": "constant", "params": {"value": 0.0}}
    cfg["study"] = {"levels": 2}
    assert cli.run(write_config(tmp_path, cfg), quiet=True) == 0
    lines = (out / "study.csv").read_text().splitlines()
    assert all(line.endswith("n/a") for line in lines[1:])


def test_sweep_amplitude_products_increase(tmp_path):
    out = tmp_path / "out"
    cfg = base_config(out, mode="sweep")
    cfg["sweep"] = {"axis": "amplitude", "values": [0.5, 0.1, 1.0]}
    code = cli.run(write_config(tmp_path, cfg), quiet=True)
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "value,converged,iterations,threshold_product,final_residual,error"
    values = [float(line.split(",")[0]) for line in lines[1:]]
    assert values == sorted(values)  # rows sorted by value
    products = [float(line.split(",")[3]) for line in lines[1:]]
    assert products[0] < products[1] < products[2]
    # oracle: product = 2 T^2 A^2 / pi^2 (amplitude sampled on the grid)
    sup = math.sin(math.pi * 0.5)  # grid contains x = 1/2 for n = 49
    expected = 2 * 0.1**2 * (0.1 * sup) ** 2 / math.pi**2
    assert products[0] == pytest.approx(expected, rel=1e-12)
    assert all(line.split(",")[1] == "True" for line in lines[1:])


def test_sweep_constant_potential_zero_products(tmp_path):
    out = tmp_path / "out"
    cfg = base_config(out, mode="sweep")
    cfg["potential"] = {"name": "constant", "params": [2.0]}
    cfg["sweep"] = {"axis": "T", "values": [0.05, 0.1]}
    assert cli.run(write_config(tmp_path, cfg), quiet=True) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert all(float(line.split(",")[3]) == 0.0 for line in lines[1:])
    assert all(line.split(",")[1] == "True" for line in lines[1:])


def test_sweep_empty_values_exit_3(tmp_path):
    cfg = base_config(tmp_path / "out", mode="sweep")
    cfg["sweep"] = {"axis": "T", "values": []}
    assert cli.run(write_config(tmp_path, cfg), quiet=True) == 3


def test_mode_and_out_overrides(tmp_path):
    cfg = base_config(tmp_path / "ignored", mode="sweep")
    cfg["sweep"] = {"axis": "T", "values": [0.05]}
    override_out = tmp_path / "actual"
    code = cli.run(write_config(tmp_path, cfg), mode="solve", out=override_out, quiet=True)
    assert code == 0
    assert (override_out / "report.json").exists()
    assert not (tmp_path / "ignored").exists()


def test_from_file_initial(tmp_path):
    out1 = tmp_path / "first"
    cfg = base_config(out1)
    assert cli.run(write_config(tmp_path, cfg, "c1.json"), quiet=True) == 0
    # feed the computed integral back in as a datum
    out2 = tmp_path / "second"
    cfg2 = base_config(out2)
    cfg2["initial"] = {
        "name": "from_file",
        "params": {"path": str(out1 / "ut.json"), "scale": 2.0},
    }
    assert cli.run(write_config(tmp_path, cfg2, "c2.json"), quiet=True) == 0
    first = read_field_json(out1 / "ut.json")
    report = json.loads((out2 / "report.json").read_text())
    assert report["s0"] == pytest.approx(0.1 * 2.0 * np.max(np.abs(first.values)))


def test_gaussian_initial_2d(tmp_path):
    out = tmp_path / "out"
    cfg = base_config(out)
    cfg["domain"] = {"dim": 2, "lengths": [1.0, 1.0], "n": [9, 9]}
    cfg["time"]["steps"] = 20
    cfg["initial"] = {
        "name": "gaussian",
        "params": {"center": [0.5, 0.5], "width": 0.15, "amplitude": 1.0},
        "sign_check": True,
    }
    code = cli.run(write_config(tmp_path, cfg), quiet=True)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] is True
    assert report["verification"]["solution_bounds"]["positivity_ok"] is True


def test_io_failure_exits_4(tmp_path):
    blocker = tmp_path / "blocked"
    blocker.write_text("a file where the output directory should go")
    cfg = base_config(blocker)
    assert cli.run(write_config(tmp_path, cfg), quiet=True) == 4


def test_sweep_threaded_matches_sequential(tmp_path, monkeypatch):
    cfgs, outs = [], []
    for name in ("seq", "par"):
        out = tmp_path / name
        cfg = base_config(out, mode="sweep")
        cfg["sweep"] = {"axis": "amplitude", "values": [0.1, 0.3, 0.5]}
        cfgs.append(write_config(tmp_path, cfg, f"{name}.json"))
        outs.append(out)
    monkeypatch.delenv(cli.THREADS_ENV, raising=False)
    assert cli.run(cfgs[0], quiet=True) == 0
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    assert cli.run(cfgs[1], quiet=True) == 0
    assert (outs[0] / "sweep.csv").read_text() == (outs[1] / "sweep.csv").read_text()


def test_bin_format_writes_trajectory(tmp_path):
    from nonlocal_heat.io import read_trajectory_bin

    out = tmp_path / "out"
    cfg = base_config(out)
    cfg["output"]["formats"] = ["json", "bin"]
    assert cli.run(write_config(tmp_path, cfg), quiet=True) == 0
    times, states, n = read_trajectory_bin(out / "trajectory.bin")
    assert n == (49,)
    assert times[0] == 0.0 and times[-1] == pytest.approx(0.1)
    assert states.shape == (101, 49)
    report = json.loads((out / "report.json").read_text())
    assert report["files"]["trajectory_bin"] == "trajectory.bin"


def test_main_entry_point(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = base_config(out)
    path = write_config(tmp_path, cfg)
    assert cli.main([str(path), "--quiet"]) == 0
    assert cli.main([str(path), "--out", str(tmp_path / "o2"), "--seed", "5"]) == 0
    assert "converged=True" in capsys.readouterr().out
