import numpy as np

from dfctrack.casestudy import DESIGN_2, PLANT, reference_step
from dfctrack.core import build_closed_loop
from dfctrack.plotting import line_chart, trajectory_plots
from dfctrack.reproduce import write_atomic
from dfctrack.simulator import simulate


def test_write_atomic_overwrites_without_leftovers(tmp_path):
    target = tmp_path / "table.csv"
    target.write_text("stale contents\n")
    write_atomic(target, "fresh\n")
    assert target.read_text() == "fresh\n"
    assert [p.name for p in tmp_path.iterdir()] == ["table.csv"]


def test_svg_output_is_deterministic(tmp_path):
    t = np.linspace(0, 1, 50)
    a = line_chart(t, np.sin(t), ["sin"], tmp_path / "a.svg")
    b = line_chart(t, np.sin(t), ["sin"], tmp_path / "b.svg")
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().lstrip().startswith("<?xml")


def test_trajectory_plots_one_file_per_quantity(tmp_path):
    traj = simulate(build_closed_loop(PLANT, DESIGN_2), DESIGN_2, r=reference_step(), horizon=2.0)
    paths = trajectory_plots(traj, tmp_path, stem="run")
    assert sorted(p.name for p in paths) == ["run_e.svg", "run_u.svg", "run_y.svg"]
