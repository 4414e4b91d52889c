import numpy as np
import pytest

from dfctrack.casestudy import PLANT
from dfctrack.core import DelayedFeedbackController
from dfctrack.tuner import (TuneSpec, _reflect, anneal, assemble, case_study_spec, cost,
                            get_parameters, minimize)

TEMPLATE = DelayedFeedbackController([[0.0, 0.0]], [[0.0]], [[0.0]], tau=1.0, tau_q=0.0, p=1)
TARGET = np.array([1.5, -2.0, 0.25])


def _quadratic(x):
    return float(np.sum((x - TARGET) ** 2))


def test_quadratic_sanity():
    trace = minimize(_quadratic, np.zeros(3), [(-5.0, 5.0)] * 3, max_iterations=2000, seed=3)
    assert np.max(np.abs(trace.best_parameters - TARGET)) < 0.1


def test_best_cost_is_monotone_and_bounded():
    bounds = [(-5.0, 5.0), (-1.0, 0.0), (0.0, 2.0)]
    trace = minimize(_quadratic, np.zeros(3), bounds, max_iterations=600, chain_length=200, seed=1)
    assert np.all(np.diff(trace.best_costs) <= 0)
    cands = np.array(trace.candidates)
    lo, hi = np.array(bounds).T
    assert np.all(cands >= lo) and np.all(cands <= hi)
    assert len(trace.costs) == 600


def test_threshold_stops_early():
    trace = minimize(_quadratic, np.zeros(3), [(-5.0, 5.0)] * 3, threshold=1.0, max_iterations=5000, seed=0)
    assert trace.reached_threshold
    assert trace.best_costs[-1] < 1.0
    assert len(trace.costs) < 5000


def test_reflection_stays_inside():
    lo, hi = np.zeros(2), np.ones(2)
    assert np.allclose(_reflect(np.array([1.25, -0.5]), lo, hi), [0.75, 0.5])
    assert np.allclose(_reflect(np.array([3.5, 0.3]), lo, hi), [0.5, 0.3])


def test_parameter_round_trip():
    spec = case_study_spec()
    theta = np.array([1.2, 0.3319, -0.5523, 0.41])
    ctrl = assemble(TEMPLATE, spec, theta)
    assert np.allclose(get_parameters(ctrl, spec.free_parameters), theta)


def test_coupling_sets_k2():
    spec = case_study_spec(coupled=True)
    ctrl = assemble(TEMPLATE, spec, np.array([3.097, 0.8184, -4.346, 0.34, 0.44]))
    assert ctrl.K2[0, 0] == pytest.approx(-1 / 0.44)


def test_cost_is_spectral_abscissa():
    spec = case_study_spec()
    c = cost(PLANT, TEMPLATE, spec, np.array([3.097, 0.8184, -4.346, 0.34]))
    assert np.isfinite(c) and c < 0


def test_spec_validation():
    with pytest.raises(ValueError):
        TuneSpec(("tau",), ((2.0, 1.0),))
    with pytest.raises(ValueError):
        TuneSpec(("bogus",), ((0.1, 1.0),))
    with pytest.raises(ValueError):
        TuneSpec(("tau",), ((0.0, 1.0),))
    with pytest.raises(ValueError):
        TuneSpec(("K2[0,0]", "tau_q"), ((-1, 1), (0.1, 1)), couplings=("K2=-I/tau_q",))


def test_case_study_tuning_is_deterministic():
    spec = case_study_spec(seed=1, max_iterations=400)
    _, a = anneal(spec, PLANT, TEMPLATE)
    _, b = anneal(spec, PLANT, TEMPLATE)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == "iter,T,cost,best_cost,K[0,0],K[0,1],K1[0,0],tau"
