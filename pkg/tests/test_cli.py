import json
import math
from pathlib import Path

import numpy as np
import pytest

from wolffpot.cli import main, run
from wolffpot.measures import ConfigError
from wolffpot.potentials import dirac_wolff_closed_form


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


BILATERAL_DIRAC = {
    "command": "bilateral",
    "seed": 11,
    "params": {"n": 3, "p": 2.0},
    "sigma": {"type": "zero", "dim": 3},
    "omega": {"type": "dirac", "location": [0.0, 0.0, 0.0]},
    "constants": {"c": 0.5, "beta": 0.1},
    "points": [[0.5, 0.0, 0.0], [0.0, 1.25, 0.0], [0.3, 0.4, 0.0]],
}


def test_bilateral_dirac_closed_form(tmp_path):
    cfg = write_config(tmp_path, BILATERAL_DIRAC)
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "data.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    for line in lines[1:]:
        vals = dict(zip(header, line.split(",")))
        x = np.array([float(vals["x0"]), float(vals["x1"]), float(vals["x2"])])
        expected = dirac_wolff_closed_form(1.0, float(np.linalg.norm(x)), 2.0, 3)
        for col in ("lower", "upper", "v"):
            assert float(vals[col]) == pytest.approx(expected, rel=1e-9)
    report = json.loads((out / "report.json").read_text())
    assert report["flags"] == []


def test_determinism_byte_identical(tmp_path):
    cfg_dict = dict(BILATERAL_DIRAC)
    cfg_dict["points"] = {"count": 6, "ball": {"center": [0, 0, 0], "radius": 2.0},
                          "seed": 5, "avoid_origin": 0.1}
    cfg = write_config(tmp_path, cfg_dict)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["--config", str(cfg), "--out", str(out1), "--seed", "42"]) == 0
    assert main(["--config", str(cfg), "--out", str(out2), "--seed", "42"]) == 0
    assert (out1 / "data.csv").read_bytes() == (out2 / "data.csv").read_bytes()


def test_carleson_atomic_divergence_exit_1(tmp_path):
    cfg = write_config(tmp_path, {
        "command": "carleson",
        "params": {"n": 2, "p": 1.5},
        "sigma": {"type": "point_masses", "points": [[0.37, 0.52]], "masses": [1.0]},
        "lattice": {"max_level": 0, "depth": 4},
    })
    out = tmp_path / "out"
    code = main(["--config", str(cfg), "--out", str(out)])
    assert code == 1
    report = json.loads((out / "report.json").read_text())
    assert "carleson-condition-divergent" in report["flags"]


def test_malformed_json_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["--config", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_missing_field_exit_2(tmp_path):
    cfg = write_config(tmp_path, {"command": "potential", "params": {"n": 3}})
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_unknown_command_exit_2(tmp_path):
    cfg = write_config(tmp_path, {"command": "nope"})
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_potential_command(tmp_path):
    cfg = write_config(tmp_path, {
        "command": "potential",
        "params": {"n": 3, "p": 2.0},
        "sigma": {"type": "dirac", "location": [0, 0, 0]},
        "points": [[0.5, 0.0, 0.0]],
    })
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out)]) == 0
    line = (out / "data.csv").read_text().strip().splitlines()[1].split(",")
    assert float(line[3]) == pytest.approx(2.0)  # riesz
    assert float(line[4]) == pytest.approx(2.0)  # wolff


def test_capacity_command_divergent_atom(tmp_path):
    cfg = write_config(tmp_path, {
        "command": "capacity",
        "params": {"n": 3, "p": 2.0},
        "sigma": {"type": "dirac", "location": [0, 0, 0]},
    })
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out)]) == 1


def test_gauge_command(tmp_path):
    cfg = write_config(tmp_path, {
        "command": "gauge",
        "params": {"n": 3, "p": 2.0},
        "sigma": {"type": "radial", "center": [0, 0, 0],
                  "profile": [{"kind": "uniform_ball", "radius": 1.0, "total": 0.3}]},
        "grid": {"points": 900},
        "constants": {"c": 1.5},
    })
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["result"]["riccati_residual"] < 1e-3


def test_baseline_regression_flow(tmp_path):
    cfg = write_config(tmp_path, BILATERAL_DIRAC)
    out1 = tmp_path / "base"
    assert main(["--config", str(cfg), "--out", str(out1)]) == 0
    out2 = tmp_path / "check"
    assert main(["--config", str(cfg), "--out", str(out2),
                 "--baseline", str(out1 / "report.json")]) == 0


def test_refine_flag(tmp_path):
    cfg = write_config(tmp_path, BILATERAL_DIRAC)
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out), "--refine", "2.0"]) == 0


def test_supersolution_command(tmp_path, eps_ball_sigma):
    cfg = write_config(tmp_path, {
        "command": "supersolution",
        "params": {"n": 3, "p": 2.0},
        "constants": {"beta": 0.1},
        "sigma": {"type": "radial", "center": [0, 0, 0], "integration_cells": 8,
                  "profile": [{"kind": "uniform_ball", "radius": 1.0, "total": 0.05}]},
        "omega": {"type": "dirac", "location": [0, 0, 0]},
        "points": [[0.5, 0.0, 0.0], [1.2, 0.3, 0.0]],
    })
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["result"]["obstacle_ok"] is True
    assert report["result"]["tail_finite"] is True
