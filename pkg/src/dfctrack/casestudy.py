"""Case-study plant, the two tuned designs, and stand-in signals.

Only signal shapes are fixed by the scenarios; the amplitudes and onsets
below are desk-scale choices.
"""
from __future__ import annotations

import numpy as np

from .core import DelayedFeedbackController, Plant
from .signals import Signal

PLANT = Plant(A=[[3.0, -3.75], [1.0, -1.0]], B=[[1.0], [-1.5]], C=[[-2.5, 2.0]])

OPEN_LOOP_EIGENVALUES = (0.5, 1.5)

# p = 1, tau_q = 0 (K2 stored but inactive)
DESIGN_1 = DelayedFeedbackController(K=[[1.2, 0.3319]], K1=[[-0.5523]], K2=[[0.0]],
                                     tau=0.41, tau_q=0.0, p=1)

# p = 1, K2 = -1 / tau_q so that I + K2 tau_q = 0
DESIGN_2 = DelayedFeedbackController(K=[[3.097, 0.8184]], K1=[[-4.346]], K2=[[-1.0 / 0.44]],
                                     tau=0.34, tau_q=0.44, p=1)

DOMINANT_ROOTS = (complex(-1.36, 0.9646), complex(-1.36, -0.9646), complex(-2.6729, 0.0))

THRESHOLD = -1.0

ONES = np.ones(2)


def d1_step_ramp() -> Signal:
    """Step 0.5 at t = 10 plus slope 0.1 from t = 25 on both states."""
    return Signal.step(ONES, 10.0, 0.5) + Signal.ramp(ONES, 25.0, 0.1)


def d1_parabola() -> Signal:
    return Signal.power(ONES, 2, 10.0, 0.02)


def d2_step_ramp() -> Signal:
    return Signal.step(ONES, 15.0, 0.5) + Signal.ramp(ONES, 30.0, 0.05)


def reference_step() -> Signal:
    return Signal.step([1.0], 0.0, 1.0)


def reference_step_ramp() -> Signal:
    return reference_step() + Signal.ramp([1.0], 35.0, 0.1)


def with_k2_tau_q(ctrl: DelayedFeedbackController, product: float) -> DelayedFeedbackController:
    """Same controller with K2 rescaled so that ``K2 tau_q = product``."""
    return ctrl.replace(K2=[[product / ctrl.tau_q]])
