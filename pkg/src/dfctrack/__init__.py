"""Delayed-feedback tracking control for linear plants with delayed integral action."""
from .core import (ClosedLoopDDE, DelayedFeedbackController, Plant, binomial_weights,
                   build_augmented, build_closed_loop, char_matrix)
from .signals import Signal
from .simulator import Trajectory, simulate, simulate_from, steady_state_error
from .spectrum import SpectrumResult, newton_refine, rightmost_roots, spectral_abscissa
from .tuner import TuneSpec, TuneTrace, TuningFailure, anneal, minimize
from .analysis import PredictionReport, comparison_table, design_baseline, predict

__all__ = [
    "ClosedLoopDDE", "DelayedFeedbackController", "Plant", "binomial_weights", "build_augmented",
    "build_closed_loop", "char_matrix", "Signal", "Trajectory", "simulate", "simulate_from",
    "steady_state_error", "SpectrumResult", "newton_refine", "rightmost_roots", "spectral_abscissa",
    "TuneSpec", "TuneTrace", "TuningFailure", "anneal", "minimize", "PredictionReport",
    "comparison_table", "design_baseline", "predict",
]
