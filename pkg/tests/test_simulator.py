import numpy as np
import pytest
from scipy.linalg import expm

from dfctrack.casestudy import DESIGN_1, DESIGN_2, PLANT, d1_step_ramp, reference_step
from dfctrack.core import DelayedFeedbackController, Plant, build_closed_loop
from dfctrack.signals import Signal
from dfctrack.simulator import default_step, simulate, simulate_from, steady_state_error
from dfctrack.spectrum import spectral_abscissa

STABLE = Plant([[-1.0, 2.0], [-2.0, -1.0]], [[1.0], [0.0]], [[1.0, 0.0]])
STATIC = DelayedFeedbackController([[0.5, 0.0]], [[0.0]], [[0.0]], tau=1.0, tau_q=0.0, p=0)
G0 = np.array([1.0, -0.5, 0.0])


def _oracle_error(step):
    cl = build_closed_loop(STABLE, STATIC)
    traj = simulate_from(cl, STATIC, G0, horizon=5.0, step=step)
    exact = np.array([expm(cl.A0 * t) @ G0 for t in traj.times])
    return np.max(np.abs(np.column_stack([traj.x, traj.q]) - exact))


def test_zero_inputs_give_zero_trajectory():
    traj = simulate(build_closed_loop(PLANT, DESIGN_2), DESIGN_2, horizon=5.0)
    for arr in (traj.x, traj.q, traj.u, traj.y, traj.e):
        assert np.all(arr == 0)


def test_matches_matrix_exponential():
    assert _oracle_error(0.01) < 1e-8


def test_fourth_order_step_halving():
    ratio = _oracle_error(0.1) / _oracle_error(0.05)
    assert 12 <= ratio <= 20


def test_deterministic():
    cl = build_closed_loop(PLANT, DESIGN_1)
    a = simulate(cl, DESIGN_1, r=reference_step(), d1=d1_step_ramp(), horizon=10.0)
    b = simulate(cl, DESIGN_1, r=reference_step(), d1=d1_step_ramp(), horizon=10.0)
    assert a.to_csv() == b.to_csv()


def test_integral_state_integrates_error():
    cl = build_closed_loop(PLANT, DESIGN_1)
    traj = simulate(cl, DESIGN_1, r=reference_step(), horizon=10.0)
    dq = np.gradient(traj.q[:, 0], traj.times)
    assert np.max(np.abs(dq[5:-5] - traj.e[5:-5, 0])) < 1e-3


def test_non_invasive_at_steady_state():
    cl = build_closed_loop(PLANT, DESIGN_2)
    traj = simulate(cl, DESIGN_2, r=reference_step(), horizon=60.0)
    # equilibrium of the plant alone with y = r
    n = PLANT.n
    M = np.block([[PLANT.A, PLANT.B], [PLANT.C, np.zeros((1, 1))]])
    x_u = np.linalg.solve(M, np.r_[np.zeros(n), 1.0])
    assert np.allclose(traj.x[-1], x_u[:n], atol=1e-8)
    assert traj.u[-1, 0] == pytest.approx(x_u[n], abs=1e-8)


def test_open_loop_divergence_flagged_early():
    ctrl = DelayedFeedbackController([[0.0, 0.0]], [[0.0]], [[0.0]], tau=1.0, p=1)
    cl = build_closed_loop(PLANT, ctrl)
    traj = simulate_from(cl, ctrl, [1.0, 0.0, 0.0], horizon=60.0)
    assert traj.diverged
    assert traj.times[-1] < 20.0
    assert steady_state_error(traj).error is None


def test_stability_agrees_with_spectrum(rng):
    checked = 0
    while checked < 8:
        ctrl = DelayedFeedbackController(rng.uniform(-4, 4, (1, 2)), rng.uniform(-4, 4, (1, 1)), [[0.0]],
                                         tau=float(rng.uniform(0.1, 1.0)), p=1)
        cl = build_closed_loop(PLANT, ctrl)
        alpha = spectral_abscissa(cl)
        if abs(alpha) < 0.1:
            continue
        checked += 1
        traj = simulate_from(cl, ctrl, [1.0, 0.0, 0.0], horizon=40.0)
        g = np.linalg.norm(np.column_stack([traj.x, traj.q]), axis=1)
        grew = traj.diverged or g[-1] > g[0]
        assert grew == (alpha > 0), (ctrl, alpha)


def test_step_bounds():
    cl = build_closed_loop(PLANT, DESIGN_2)
    with pytest.raises(ValueError):
        simulate(cl, DESIGN_2, step=0.1)
    with pytest.raises(ValueError):
        simulate(cl, DESIGN_2, horizon=0.01)
    assert default_step(DESIGN_2) == pytest.approx(0.01)
    assert default_step(DESIGN_2.replace(tau=0.1, tau_q=0.12)) == pytest.approx(0.005)


def test_controller_mismatch_rejected():
    with pytest.raises(ValueError):
        simulate(build_closed_loop(PLANT, DESIGN_1), DESIGN_2)


def test_sensor_disturbance_only_through_difference_path():
    # a constant sensor offset is cancelled by the delayed difference
    cl = build_closed_loop(PLANT, DESIGN_1)
    traj = simulate(cl, DESIGN_1, d1=Signal.step([1.0, 1.0], 0.0, 0.3), horizon=40.0)
    ss = steady_state_error(traj)
    assert ss.settled and np.max(np.abs(ss.error)) < 1e-8


def test_csv_header():
    traj = simulate(build_closed_loop(PLANT, DESIGN_1), DESIGN_1, horizon=1.0)
    assert traj.to_csv().splitlines()[0] == "t,x1,x2,q1,u1,y1,e1"
