"""Final-value predictions, the conventional baseline, and the comparison table.

Steady-state limits are read off Taylor coefficients at s = 0 of the
closed-loop transfer functions from r, d1, d2 to the tracking error
``e = y - r``. The coefficients come from a Cauchy integral on a circle
inside the root-free disc around the origin.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .core import (ClosedLoopDDE, DelayedFeedbackController, Plant, build_augmented,
                   build_closed_loop, char_matrix)
from .signals import Signal
from .simulator import simulate, steady_state_error
from .spectrum import rightmost_roots

ZERO_TOL = 1e-9
CHANNELS = ("r", "d1", "d2")


class UnstableClosedLoop(ValueError):
    """Final-value theorem does not apply."""


class LimitUndefined(ArithmeticError):
    pass


@dataclass(frozen=True)
class PredictionReport:
    d1_max_rejected_laplace_order: int
    d2_step_rejected: bool
    d2_ramp_rejected: bool
    ramp_reference_tracked: bool
    condition_det: float
    condition_full: bool
    predicted_ss_error: dict[str, np.ndarray | None] = field(default_factory=dict)

    def rejected(self, category: str, order: int) -> bool:
        if category == "d1":
            return order <= self.d1_max_rejected_laplace_order
        if category == "d2":
            return order == 1 or (order == 2 and self.d2_ramp_rejected)
        if category == "tracking":
            return order == 1 or (order == 2 and self.ramp_reference_tracked)
        raise ValueError(f"unknown category {category!r}")


def integral_condition(ctrl: DelayedFeedbackController) -> tuple[float, bool]:
    """``det(I + K2 tau_q)`` and whether ``I + K2 tau_q`` vanishes entrywise."""
    m = ctrl.K2.shape[0]
    M = np.eye(m) + (ctrl.K2 * ctrl.tau_q if ctrl.k2_active else 0.0)
    return float(np.linalg.det(M)), bool(np.all(np.abs(M) < ZERO_TOL))


def require_stable(plant: Plant, ctrl: DelayedFeedbackController) -> ClosedLoopDDE:
    cl = build_closed_loop(plant, ctrl)
    abscissa = rightmost_roots(cl, 3).abscissa
    if not abscissa < 0:
        raise UnstableClosedLoop(f"closed loop has spectral abscissa {abscissa:.4g} >= 0")
    return cl


def _transfer(cl: ClosedLoopDDE, ctrl: DelayedFeedbackController, channel: str, s: complex):
    """Transfer matrices from ``channel`` to ``(e, x)`` at ``s``."""
    plant = cl.plant
    n, m = cl.n, cl.m
    Delta = char_matrix(cl, s)
    if channel == "r":
        rhs = np.vstack([np.zeros((n, m)), -np.eye(m)])
    elif channel == "d2":
        rhs = np.vstack([np.eye(n), np.zeros((m, n))])
    elif channel == "d1":
        P = (1 - np.exp(-s * ctrl.tau)) ** ctrl.p
        rhs = np.vstack([-plant.B @ ctrl.K * P, np.zeros((m, n))])
    else:
        raise ValueError(f"unknown channel {channel!r}")
    G = np.linalg.solve(Delta, rhs)
    e = plant.C @ G[:n]
    if channel == "r":
        e = e - np.eye(m)
    return e, G[:n]


def taylor_coefficients(plant: Plant, ctrl: DelayedFeedbackController, channel: str,
                        count: int = 5, radius: float | None = None, points: int = 128):
    """First ``count`` Taylor coefficients at 0 of the ``channel`` transfer
    to ``e`` and to ``x``, as arrays of shape ``(count, rows, cols)``."""
    cl = require_stable(plant, ctrl)
    if radius is None:
        nearest = np.min(np.abs(rightmost_roots(cl, 6).values))
        radius = min(0.5, 0.3 * nearest)
    z = radius * np.exp(2j * np.pi * np.arange(points) / points)
    samples = [_transfer(cl, ctrl, channel, s) for s in z]
    coeffs = []
    for part in range(2):
        vals = np.array([smp[part] for smp in samples])
        c = np.fft.fft(vals, axis=0) / points
        scale = radius ** -np.arange(count)
        coeffs.append(np.real_if_close(c[:count] * scale[:, None, None], tol=1e6).real)
    return coeffs[0], coeffs[1]


def limit_from_coefficients(coeffs: np.ndarray, direction, order: int) -> np.ndarray | None:
    """``lim_{s->0} s T(s) v / s^order``; None when unbounded."""
    v = np.asarray(direction, dtype=float)
    terms = [c @ v for c in coeffs]
    scale = max(1.0, max(np.max(np.abs(t)) for t in terms))
    for j in range(order - 1):
        if np.max(np.abs(terms[j])) > ZERO_TOL * scale:
            return None
    return terms[order - 1]


def signal_limit(plant: Plant, ctrl: DelayedFeedbackController, channel: str, signal: Signal,
                 state: bool = False) -> np.ndarray | None:
    """Predicted final value of ``e`` (or ``x``) for a piecewise-polynomial input.

    A piece ``c (t - t0)^j`` has Laplace order ``j + 1`` and contributes
    ``j! c`` times the ``j``-th coefficient, provided the lower ones vanish.
    """
    degree = max((len(pc.coeffs) for pc in signal.pieces), default=1)
    ce, cx = taylor_coefficients(plant, ctrl, channel, count=degree + 1)
    coeffs = cx if state else ce
    total = np.zeros(coeffs.shape[1])
    for piece in signal.pieces:
        for j, c in enumerate(piece.coeffs):
            if c == 0:
                continue
            lim = limit_from_coefficients(coeffs, piece.direction, j + 1)
            if lim is None:
                return None
            total = total + factorial(j) * c * lim
    return total


def predict_d1(plant: Plant, ctrl: DelayedFeedbackController):
    """Largest rejected Laplace order of d1 = V/s^k, and the state/error limit
    at the next order (None where unbounded)."""
    require_stable(plant, ctrl)
    det, _ = integral_condition(ctrl)
    order = ctrl.p + 1 + (1 if abs(det) < ZERO_TOL else 0)
    V = np.ones(plant.n)
    ce, cx = taylor_coefficients(plant, ctrl, "d1", count=order + 2)
    return order, limit_from_coefficients(cx, V, order + 1), limit_from_coefficients(ce, V, order + 1)


def predict_d2(plant: Plant, ctrl: DelayedFeedbackController):
    """Step and ramp rejection of d2 = V/s^k; error limit for the ramp when not rejected."""
    require_stable(plant, ctrl)
    det, _ = integral_condition(ctrl)
    ramp = abs(det) < ZERO_TOL
    limit = None
    if not ramp:
        ce, _ = taylor_coefficients(plant, ctrl, "d2", count=3)
        limit = limit_from_coefficients(ce, np.ones(plant.n), 2)
    return True, ramp, limit


def predict_tracking(plant: Plant, ctrl: DelayedFeedbackController):
    """Step and ramp tracking of r = M/s^k; error limit for the ramp when not tracked."""
    require_stable(plant, ctrl)
    _, full = integral_condition(ctrl)
    limit = None
    if not full:
        ce, _ = taylor_coefficients(plant, ctrl, "r", count=3)
        limit = limit_from_coefficients(ce, np.ones(plant.m), 2)
    return True, full, limit


def ramp_tracking_closed_form(plant: Plant, ctrl: DelayedFeedbackController) -> np.ndarray:
    """``(I + K2 tau_q) (C (-A)^{-1} B K1)^{-1} M`` for a unit-slope ramp, p >= 1."""
    if ctrl.p < 1:
        raise ValueError("closed form assumes p >= 1")
    try:
        G0 = plant.C @ np.linalg.solve(-plant.A, plant.B @ ctrl.K1)
        m = plant.m
        M = np.eye(m) + (ctrl.K2 * ctrl.tau_q if ctrl.k2_active else 0.0)
        return M @ np.linalg.solve(G0, np.ones(m))
    except np.linalg.LinAlgError as exc:
        raise LimitUndefined("limit undefined, use simulation") from exc


def predict(plant: Plant, ctrl: DelayedFeedbackController) -> PredictionReport:
    det, full = integral_condition(ctrl)
    d1_order, _, d1_err = predict_d1(plant, ctrl)
    _, d2_ramp, d2_err = predict_d2(plant, ctrl)
    _, ramp, r_err = predict_tracking(plant, ctrl)
    errors = {f"d1_order{d1_order + 1}": d1_err}
    if not d2_ramp:
        errors["d2_ramp"] = d2_err
    if not ramp:
        errors["ramp_reference"] = r_err
    return PredictionReport(d1_order, True, d2_ramp, ramp, det, full, errors)


def ackermann(A: np.ndarray, b: np.ndarray, poles) -> np.ndarray:
    """Single-input gain k with ``eig(A - b k) = poles``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1, 1)
    n = A.shape[0]
    poles = np.asarray(poles, dtype=complex)
    if len(poles) != n:
        raise ValueError(f"need {n} poles, got {len(poles)}")
    if not np.allclose(np.sort_complex(poles), np.sort_complex(poles.conj())):
        raise ValueError("poles must be closed under conjugation")
    ctrb = np.hstack([np.linalg.matrix_power(A, i) @ b for i in range(n)])
    if np.linalg.matrix_rank(ctrb) < n:
        raise ValueError("pair (A, B) is not controllable")
    coeffs = np.real(np.poly(poles))
    phi = sum(c * np.linalg.matrix_power(A, n - i) for i, c in enumerate(coeffs))
    last = np.zeros((1, n))
    last[0, -1] = 1.0
    return last @ np.linalg.solve(ctrb, phi)


def design_baseline(plant: Plant, desired_poles) -> np.ndarray:
    """Conventional gain ``[K' K'']`` on the integrator-augmented plant."""
    if plant.r != 1:
        raise NotImplementedError("baseline design supports single-input plants only")
    A_aug, B_aug = build_augmented(plant)
    return ackermann(A_aug, B_aug, desired_poles)


def baseline_controller(plant: Plant, gain) -> DelayedFeedbackController:
    """Express ``u = -[K' K''] [x; q]`` as the p = 0 member of the family."""
    gain = np.atleast_2d(np.asarray(gain, dtype=float))
    n, m = plant.n, plant.m
    return DelayedFeedbackController(gain[:, :n], gain[:, n:], np.zeros((m, m)), tau=1.0, tau_q=0.0, p=0)


# Table amplitudes by Laplace order. Finite non-rejected limits scale with the
# amplitude and must clear REJECT_TOL; parabolic reference tracking by the
# proposed design leaves an error of only ~0.0136 * gain.
TABLE_ONSET = 5.0
TABLE_GAIN = {1: 1.0, 2: 0.5, 3: 0.5, 4: 0.1}
REJECT_TOL = 1e-3
CATEGORIES = ("d1", "d2", "tracking")
ORDER_NAMES = {1: "One", 2: "Two", 3: "Higher"}


def table_signal(category: str, order: int, plant: Plant, degree: int | None = None) -> dict[str, Signal]:
    """Test input of Laplace order ``order``; ``degree`` overrides the power of t."""
    deg = order - 1 if degree is None else degree
    gain = TABLE_GAIN.get(deg + 1, 0.05)
    if category == "tracking":
        return {"r": Signal.power(np.ones(plant.m), deg, 0.0, gain)}
    sig = Signal.power(np.ones(plant.n), deg, TABLE_ONSET, gain)
    return {category: sig}


def simulated_verdict(plant: Plant, ctrl: DelayedFeedbackController, signals: dict[str, Signal],
                      horizon: float = 60.0) -> tuple[bool, np.ndarray | None]:
    cl = build_closed_loop(plant, ctrl)
    traj = simulate(cl, ctrl, horizon=horizon, **signals)
    ss = steady_state_error(traj)
    ok = ss.settled and bool(np.max(np.abs(ss.error)) < REJECT_TOL)
    return ok, ss.error


@dataclass(frozen=True)
class TableCell:
    method: str
    category: str
    order: int
    predicted: bool
    simulated: bool

    @property
    def conflict(self) -> bool:
        return self.predicted != self.simulated

    @property
    def label(self) -> str:
        if self.conflict:
            return "CONFLICT"
        return "Yes" if self.predicted else "No"


@dataclass(frozen=True)
class ComparisonTable:
    cells: tuple[TableCell, ...]

    def cell(self, method: str, category: str, order: int) -> TableCell:
        for c in self.cells:
            if (c.method, c.category, c.order) == (method, category, order):
                return c
        raise KeyError((method, category, order))

    @property
    def conflicts(self) -> list[TableCell]:
        return [c for c in self.cells if c.conflict]

    def to_csv(self) -> str:
        lines = ["category,order,predicted,simulated"]
        for c in self.cells:
            lines.append(f"{c.category}/{c.method},{ORDER_NAMES[c.order]},"
                         f"{'Yes' if c.predicted else 'No'},{'Yes' if c.simulated else 'No'}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        names = {"d1": "d1 rejection", "d2": "d2 rejection", "tracking": "reference tracking"}
        methods = sorted({c.method for c in self.cells}, key=lambda s: s != "proposed")
        rows = [("", "One", "Two", "Higher")]
        for cat in CATEGORIES:
            for method in methods:
                rows.append((f"{names[cat]} ({method})",)
                            + tuple(self.cell(method, cat, k).label for k in (1, 2, 3)))
        width = [max(len(r[i]) for r in rows) for i in range(4)]
        return "\n".join("  ".join(v.ljust(w) for v, w in zip(r, width)).rstrip() for r in rows) + "\n"


def comparison_table(plant: Plant, proposed: dict[str, DelayedFeedbackController] | DelayedFeedbackController,
                     baseline_gain, horizon: float = 60.0) -> ComparisonTable:
    """Decide every cell both analytically and by simulation."""
    if isinstance(proposed, DelayedFeedbackController):
        proposed = {"proposed": proposed}
    methods = dict(proposed)
    methods["conventional"] = baseline_controller(plant, baseline_gain)
    cells = []
    for method, ctrl in methods.items():
        report = predict(plant, ctrl)
        for category in CATEGORIES:
            for order in (1, 2, 3):
                sim, _ = simulated_verdict(plant, ctrl, table_signal(category, order, plant), horizon)
                cells.append(TableCell(method, category, order, report.rejected(category, order), sim))
    return ComparisonTable(tuple(cells))
