"""Simulated annealing over controller parameters.

The cost is the spectral abscissa of the closed loop; the chain stops as
soon as the best cost drops below the threshold.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .core import DelayedFeedbackController, Plant, build_closed_loop
from .spectrum import rightmost_roots

_ENTRY = re.compile(r"^(K|K1)\[(\d+),(\d+)\]$")
COUPLING_INVERSE_TAU_Q = "K2=-I/tau_q"
KNOWN_COUPLINGS = (COUPLING_INVERSE_TAU_Q,)


@dataclass(frozen=True)
class TuneSpec:
    """Search setup. Free parameters are named ``K[i,j]``, ``K1[i,j]``,
    ``tau`` or ``tau_q``; ``max_iterations`` is the total proposal budget
    shared by restarted chains of ``chain_length`` steps."""

    free_parameters: tuple[str, ...]
    bounds: tuple[tuple[float, float], ...]
    couplings: tuple[str, ...] = ()
    threshold: float = -1.0
    max_iterations: int = 5000
    seed: int = 0
    T0: float = 1.0
    gamma: float = 0.97
    step_fraction: float = 0.25
    chain_length: int = 250

    def __post_init__(self):
        object.__setattr__(self, "free_parameters", tuple(self.free_parameters))
        object.__setattr__(self, "bounds", tuple((float(lo), float(hi)) for lo, hi in self.bounds))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        if len(self.bounds) != len(self.free_parameters):
            raise ValueError("one bound interval per free parameter is required")
        if len(set(self.free_parameters)) != len(self.free_parameters):
            raise ValueError("free parameters must be distinct")
        for name, (lo, hi) in zip(self.free_parameters, self.bounds):
            if name not in ("tau", "tau_q") and not _ENTRY.match(name):
                raise ValueError(f"unknown free parameter {name!r}")
            if not lo <= hi:
                raise ValueError(f"bounds for {name} are inverted: [{lo}, {hi}]")
            if name in ("tau", "tau_q") and lo < 0.01:
                raise ValueError(f"lower bound for {name} must be at least 0.01 s")
        for rule in self.couplings:
            if rule not in KNOWN_COUPLINGS:
                raise ValueError(f"unknown coupling {rule!r}")
        if COUPLING_INVERSE_TAU_Q in self.couplings and any(n.startswith("K2") for n in self.free_parameters):
            raise ValueError("K2 is coupled to tau_q and cannot be free")
        if self.max_iterations < 1 or self.chain_length < 1:
            raise ValueError("max_iterations and chain_length must be positive")
        if not self.T0 > 0 or not 0 < self.gamma < 1:
            raise ValueError("schedule needs T0 > 0 and 0 < gamma < 1")


@dataclass
class TuneTrace:
    parameter_names: tuple[str, ...]
    iterations: list[int] = field(default_factory=list)
    temperatures: list[float] = field(default_factory=list)
    candidates: list[np.ndarray] = field(default_factory=list)
    costs: list[float] = field(default_factory=list)
    best_costs: list[float] = field(default_factory=list)
    chains: list[int] = field(default_factory=list)
    best_parameters: np.ndarray | None = None
    final_abscissa: float = math.inf
    reached_threshold: bool = False

    def to_csv(self) -> str:
        lines = [",".join(["iter", "T", "cost", "best_cost", *self.parameter_names])]
        for i, T, c, b, theta in zip(self.iterations, self.temperatures, self.costs,
                                     self.best_costs, self.candidates):
            lines.append(",".join(repr(float(v)) if not isinstance(v, int) else str(v)
                                  for v in (i, T, c, b, *theta)))
        return "\n".join(lines) + "\n"


def get_parameters(ctrl: DelayedFeedbackController, names) -> np.ndarray:
    out = []
    for name in names:
        if name in ("tau", "tau_q"):
            out.append(getattr(ctrl, name))
        else:
            mat, i, j = _ENTRY.match(name).groups()
            out.append(getattr(ctrl, mat)[int(i), int(j)])
    return np.array(out, dtype=float)


def assemble(template: DelayedFeedbackController, spec: TuneSpec, theta) -> DelayedFeedbackController:
    """Controller with the free parameters set to ``theta`` and couplings applied."""
    K = np.array(template.K)
    K1 = np.array(template.K1)
    changes = {}
    for name, value in zip(spec.free_parameters, theta):
        if name in ("tau", "tau_q"):
            changes[name] = float(value)
        else:
            mat, i, j = _ENTRY.match(name).groups()
            (K if mat == "K" else K1)[int(i), int(j)] = value
    changes.update(K=K, K1=K1)
    if COUPLING_INVERSE_TAU_Q in spec.couplings:
        tau_q = changes.get("tau_q", template.tau_q)
        m = template.K2.shape[0]
        changes["K2"] = -np.eye(m) / tau_q
    return template.replace(**changes)


def cost(plant: Plant, template: DelayedFeedbackController, spec: TuneSpec, theta) -> float:
    """Spectral abscissa of the assembled closed loop; +inf if no root validates."""
    try:
        cl = build_closed_loop(plant, assemble(template, spec, theta))
        result = rightmost_roots(cl, 3, check_order=False)
    except (ValueError, np.linalg.LinAlgError):
        return math.inf
    if not len(result.values) or not np.isfinite(result.abscissa):
        return math.inf
    return result.abscissa


def _reflect(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    width = hi - lo
    safe = np.where(width > 0, width, 1.0)
    y = np.mod(x - lo, 2 * safe)
    y = np.where(y > safe, 2 * safe - y, y)
    return np.where(width > 0, lo + y, lo)


def minimize(fn, x0, bounds, *, threshold=-math.inf, max_iterations=2000, chain_length=None,
             seed=0, T0=1.0, gamma=0.97, step_fraction=0.25, names=None) -> TuneTrace:
    """Metropolis annealing of ``fn`` over a box.

    Chains of ``chain_length`` steps run back to back until ``max_iterations``
    proposals are spent or the best value drops below ``threshold``. The
    first chain starts at ``x0``, later ones at uniform points of the box.
    Each chain cools geometrically from ``T0``; proposals are Gaussian with
    standard deviation ``step_fraction * width * T / T0``, reflected at the
    bounds.
    """
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    width = hi - lo
    names = tuple(names) if names else tuple(f"x{i + 1}" for i in range(len(lo)))
    chain_length = chain_length or max_iterations
    trace = TuneTrace(names)
    rng = np.random.default_rng(seed)
    best_cost, best_x = math.inf, None
    it = 0
    chain = 0
    while it < max_iterations:
        theta = np.clip(np.asarray(x0, dtype=float), lo, hi) if chain == 0 else lo + width * rng.random(len(lo))
        current = fn(theta)
        if current < best_cost:
            best_cost, best_x = current, theta.copy()
        T = T0
        for _ in range(min(chain_length, max_iterations - it)):
            it += 1
            sigma = step_fraction * width * (T / T0)
            cand = _reflect(theta + sigma * rng.standard_normal(len(theta)), lo, hi)
            c = fn(cand)
            delta = c - current
            if delta <= 0 or (np.isfinite(c) and rng.random() < math.exp(-delta / T)):
                theta, current = cand, c
            if c < best_cost:
                best_cost, best_x = c, cand.copy()
            trace.iterations.append(it)
            trace.temperatures.append(T)
            trace.candidates.append(cand)
            trace.costs.append(c)
            trace.best_costs.append(best_cost)
            trace.chains.append(chain)
            if best_cost < threshold:
                trace.reached_threshold = True
                break
            T *= gamma
        if trace.reached_threshold:
            break
        chain += 1
    trace.best_parameters = best_x
    trace.final_abscissa = best_cost
    return trace


class TuningFailure(RuntimeError):
    def __init__(self, message: str, trace: TuneTrace):
        super().__init__(message)
        self.trace = trace


def anneal(spec: TuneSpec, plant: Plant, template: DelayedFeedbackController):
    """Tune the free parameters of ``template``; returns ``(best ctrl, trace)``.

    Raises TuningFailure (carrying the trace) when no candidate had a finite
    cost.
    """
    trace = minimize(lambda theta: cost(plant, template, spec, theta),
                     get_parameters(template, spec.free_parameters), spec.bounds,
                     threshold=spec.threshold, max_iterations=spec.max_iterations,
                     chain_length=spec.chain_length, seed=spec.seed, T0=spec.T0,
                     gamma=spec.gamma, step_fraction=spec.step_fraction,
                     names=spec.free_parameters)
    if trace.best_parameters is None or not np.isfinite(trace.final_abscissa):
        raise TuningFailure("annealing found no candidate with a finite cost", trace)
    return assemble(template, spec, trace.best_parameters), trace


def case_study_spec(coupled: bool = False, **overrides) -> TuneSpec:
    """Free ``k1, k2, k11, tau`` (and ``tau_q`` with ``K2 = -1/tau_q`` when coupled)."""
    names = ["K[0,0]", "K[0,1]", "K1[0,0]", "tau"]
    bounds = [(-10.0, 10.0)] * 3 + [(0.01, 2.0)]
    couplings = ()
    if coupled:
        names.append("tau_q")
        bounds.append((0.01, 2.0))
        couplings = (COUPLING_INVERSE_TAU_Q,)
    kwargs = dict(free_parameters=tuple(names), bounds=tuple(bounds), couplings=couplings)
    kwargs.update(overrides)
    return TuneSpec(**kwargs)
