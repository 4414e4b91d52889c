import json

import numpy as np
import pytest

from dfctrack.casestudy import DESIGN_1, DESIGN_2, PLANT
from dfctrack.cli import main
from dfctrack.config import ConfigError, controller_to_dict, load_config, parse_config, plant_to_dict

PLANT_CFG = plant_to_dict(PLANT)


def _write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def _run(tmp_path, command, data, *extra):
    return main([command, "--config", _write(tmp_path, data), "--out", str(tmp_path / "out"), *extra])


def test_spectrum_design1(tmp_path, capsys):
    code = _run(tmp_path, "spectrum", {"plant": PLANT_CFG, "controller": controller_to_dict(DESIGN_1)})
    assert code == 0
    assert "abscissa -1.53" in capsys.readouterr().out
    assert (tmp_path / "out" / "roots.csv").read_text().startswith("re,im,residual\n")


def test_spectrum_zero_gain_is_unstable(tmp_path, capsys):
    ctrl = {"K": [[0, 0]], "K1": [[0]], "tau": 0.5}
    assert _run(tmp_path, "spectrum", {"plant": PLANT_CFG, "controller": ctrl}) == 2
    assert "abscissa 1.5" in capsys.readouterr().out


def test_ragged_matrix_names_field(tmp_path, capsys):
    bad = dict(PLANT_CFG, A=[[3.0, -3.75], [1.0]])
    assert _run(tmp_path, "spectrum", {"plant": bad}) == 1
    assert "plant.A" in capsys.readouterr().err


def test_json_syntax_error_reports_line(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "plant": {\n    "A": [[1, 2],\n  }\n}')
    assert main(["spectrum", "--config", str(path)]) == 1
    assert "line" in capsys.readouterr().err


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        parse_config({"plant": PLANT_CFG, "bogus": 1})
    with pytest.raises(ConfigError, match="controller"):
        parse_config({"plant": PLANT_CFG, "controller": dict(controller_to_dict(DESIGN_1), gain=2)})


def test_dimension_cross_check():
    ctrl = dict(controller_to_dict(DESIGN_1), K=[[1.0, 2.0, 3.0]])
    with pytest.raises(ConfigError):
        parse_config({"plant": PLANT_CFG, "controller": ctrl})


def test_simulate_zero_signals_writes_zero_csv(tmp_path):
    data = {"plant": PLANT_CFG, "controller": controller_to_dict(DESIGN_2), "sim": {"horizon": 2.0}}
    assert _run(tmp_path, "simulate", data, "--plots") == 0
    rows = np.loadtxt(tmp_path / "out" / "trajectory.csv", delimiter=",", skiprows=1)
    assert np.all(rows[:, 1:] == 0)
    for q in "yue":
        assert (tmp_path / "out" / f"trajectory_{q}.svg").exists()


def test_simulate_design2_settles(tmp_path, capsys):
    signals = {
        "r": [{"t_start": 0, "coeffs": [1.0], "direction": [1.0]}],
        "d1": [{"t_start": 10, "coeffs": [0, 0, 0.02], "direction": [1, 1]}],
        "d2": [{"t_start": 15, "coeffs": [0.5], "direction": [1, 1]},
               {"t_start": 30, "coeffs": [0, 0.05], "direction": [1, 1]}],
    }
    data = {"plant": PLANT_CFG, "controller": controller_to_dict(DESIGN_2), "signals": signals}
    assert _run(tmp_path, "simulate", data) == 0
    rows = np.loadtxt(tmp_path / "out" / "trajectory.csv", delimiter=",", skiprows=1)
    assert abs(rows[-1, -1]) < 1e-3


def test_simulate_unstable_exits_3(tmp_path):
    ctrl = {"K": [[0, 0]], "K1": [[0]], "tau": 0.5}
    data = {"plant": PLANT_CFG, "controller": ctrl,
            "signals": {"d2": [{"t_start": 0, "coeffs": [1.0], "direction": [1.0, 0.0]}]}}
    assert _run(tmp_path, "simulate", data) == 3


def test_predict_writes_report(tmp_path):
    data = {"plant": PLANT_CFG, "controller": controller_to_dict(DESIGN_2)}
    assert _run(tmp_path, "predict", data) == 0
    text = (tmp_path / "out" / "prediction.csv").read_text()
    assert "d1_max_rejected_laplace_order,3" in text
    assert "ramp_reference_tracked,True" in text


def test_predict_unstable_exits_2(tmp_path):
    ctrl = {"K": [[0, 0]], "K1": [[0]], "tau": 0.5}
    assert _run(tmp_path, "predict", {"plant": PLANT_CFG, "controller": ctrl}) == 2


TUNE = {"free_parameters": ["K[0,0]", "K[0,1]", "K1[0,0]", "tau"],
        "bounds": [[-10, 10], [-10, 10], [-10, 10], [0.01, 2]],
        "threshold": -1.0, "max_iterations": 5000, "seed": 0}


def test_tune_round_trip_and_determinism(tmp_path):
    ctrl = {"K": [[0, 0]], "K1": [[0]], "tau": 1.0, "p": 1}
    data = {"plant": PLANT_CFG, "controller": ctrl, "tune": TUNE}
    assert _run(tmp_path, "tune", data, "--seed", "1") == 0
    out = tmp_path / "out"
    first = (out / "trace.csv").read_text()
    tuned = load_config(out / "tuned.json")
    assert main(["spectrum", "--config", str(out / "tuned.json"), "--out", str(tmp_path / "s")]) == 0
    assert _run(tmp_path, "tune", data, "--seed", "1") == 0
    assert (out / "trace.csv").read_text() == first
    again = load_config(out / "tuned.json")
    assert np.array_equal(tuned.controller.K, again.controller.K)
    assert tuned.controller.tau == again.controller.tau


def test_tune_inverted_bounds_exit_1(tmp_path):
    tune = dict(TUNE, bounds=[[-10, 10], [-10, 10], [-10, 10], [2.0, 0.5]])
    assert _run(tmp_path, "tune", {"plant": PLANT_CFG, "tune": tune}) == 1


def test_tune_failure_exit_4_keeps_trace(tmp_path):
    tune = dict(TUNE, threshold=-50.0, max_iterations=30)
    assert _run(tmp_path, "tune", {"plant": PLANT_CFG, "tune": tune}) == 4
    assert (tmp_path / "out" / "trace.csv").exists()


def test_missing_config_flag():
    assert main(["spectrum"]) == 1
