"""Fixed-step time simulation of the closed-loop delay system.

Explicit RK4 on a uniform grid. Delayed states are read from the stored
history with cubic Hermite interpolation (node values plus node
derivatives). All RK4 stage times lie on the half-step grid, so delayed
lookups and signal values are tabulated once before the loop.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ClosedLoopDDE, DelayedFeedbackController, build_closed_loop
from .signals import Signal

MAX_NORM = 1e10


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    q: np.ndarray
    u: np.ndarray
    y: np.ndarray
    e: np.ndarray
    diverged: bool = False

    def header(self) -> list[str]:
        cols = ["t"]
        for name, arr in (("x", self.x), ("q", self.q), ("u", self.u), ("y", self.y), ("e", self.e)):
            cols += [f"{name}{i + 1}" for i in range(arr.shape[1])]
        return cols

    def to_csv(self) -> str:
        data = np.column_stack([self.times, self.x, self.q, self.u, self.y, self.e])
        lines = [",".join(self.header())]
        lines += [",".join(repr(float(v)) for v in row) for row in data]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SteadyState:
    error: np.ndarray | None
    settled: bool


def control_law(ctrl: DelayedFeedbackController, x_meas_history, q) -> np.ndarray:
    """``u = -(K sum_i w_i x_meas(t - i tau) + K1 q)``.

    ``x_meas_history`` row ``i`` holds the measured state at ``t - i tau``.
    """
    hist = np.atleast_2d(np.asarray(x_meas_history, dtype=float))
    w = np.asarray(ctrl.weights, dtype=float)
    diff = w @ hist[: len(w)]
    return -(ctrl.K @ diff + ctrl.K1 @ np.atleast_1d(q))


def default_step(ctrl: DelayedFeedbackController) -> float:
    shortest = min(ctrl.tau, ctrl.tau_q) if ctrl.tau_q > 0 else ctrl.tau
    return min(shortest / 20.0, 1e-2)


def _hermite(s):
    s2, s3 = s * s, s * s * s
    return 2 * s3 - 3 * s2 + 1, s3 - 2 * s2 + s, -2 * s3 + 3 * s2, s3 - s2


def _check_match(cl: ClosedLoopDDE, ctrl: DelayedFeedbackController) -> None:
    if cl.plant is None:
        raise ValueError("closed loop carries no plant; build it with build_closed_loop")
    ref = build_closed_loop(cl.plant, ctrl)
    same = (np.array_equal(ref.A0, cl.A0) and np.array_equal(ref.A1, cl.A1)
            and np.array_equal(ref.A2, cl.A2) and ref.weights == cl.weights
            and ref.tau == cl.tau and ref.tau_q == cl.tau_q)
    if not same:
        raise ValueError("controller does not match the closed loop")


def simulate_from(cl: ClosedLoopDDE, ctrl: DelayedFeedbackController, initial_state,
                  r: Signal | None = None, d1: Signal | None = None, d2: Signal | None = None,
                  horizon: float = 60.0, step: float | None = None,
                  max_norm: float = MAX_NORM) -> Trajectory:
    """Simulate with constant pre-history ``G(t) = initial_state`` for ``t <= 0``.

    The run stops early and is flagged diverged once the state is non-finite
    or its norm exceeds ``max_norm``.
    """
    _check_match(cl, ctrl)
    plant = cl.plant
    n, m, nr = plant.n, plant.m, plant.r
    A, B, C = plant.A, plant.B, plant.C
    K, K1 = ctrl.K, ctrl.K1
    K2 = ctrl.K2 if ctrl.k2_active else np.zeros((m, m))
    w = ctrl.weights
    p = ctrl.p

    r = r if r is not None else Signal.zero(m)
    d1 = d1 if d1 is not None else Signal.zero(n)
    d2 = d2 if d2 is not None else Signal.zero(n)
    if (r.dim, d1.dim, d2.dim) != (m, n, n):
        raise ValueError(f"signal dimensions must be r:{m}, d1:{n}, d2:{n}")

    h = default_step(ctrl) if step is None else float(step)
    if not h > 0:
        raise ValueError("step must be positive")
    delays = [i * ctrl.tau for i in range(1, p + 1) if w[i] != 0 and np.any(K)]
    use_q_delay = ctrl.k2_active and np.any(K2)
    if use_q_delay:
        delays.append(ctrl.tau_q)
    if delays and h > min(delays) / 10 * (1 + 1e-12):
        raise ValueError(f"step {h} exceeds a tenth of the shortest delay {min(delays)}")
    if horizon < 10 * h:
        raise ValueError("horizon must cover at least ten steps")

    steps = int(round(horizon / h))
    G0 = np.asarray(initial_state, dtype=float).reshape(n + m)
    times = np.arange(steps + 1) * h
    half = np.arange(2 * steps + 1) * (h / 2)

    r_half = r(half)
    d2_half = d2(half)
    # measured-state disturbance seen through each tap of the difference
    d1_taps = [d1(half - i * ctrl.tau) for i in range(p + 1)]
    d1_diff = sum(w[i] * d1_taps[i] for i in range(p + 1))

    def lookup_table(delay):
        ts = half - delay
        k = np.floor(ts / h).astype(int)
        s = ts / h - k
        before = ts <= 0
        k = np.where(before, 0, k)
        s = np.where(before, 0.0, s)
        return k, np.stack(_hermite(s), axis=1), before

    # a zero K makes the state taps irrelevant
    p_taps = p if np.any(K) else 0
    x_tabs = [lookup_table(i * ctrl.tau) for i in range(1, p + 1)]
    q_tab = lookup_table(ctrl.tau_q) if use_q_delay else None

    G = np.empty((steps + 1, n + m))
    F = np.empty((steps + 1, n + m))
    U = np.empty((steps + 1, nr))
    G[0] = G0

    def delayed(table, j, idx):
        k, basis, before = table
        if before[j]:
            return G0[idx]
        kk = k[j]
        b = basis[j]
        if b[2] == 0.0 and b[3] == 0.0:
            return G[kk, idx]
        return (b[0] * G[kk, idx] + b[1] * h * F[kk, idx]
                + b[2] * G[kk + 1, idx] + b[3] * h * F[kk + 1, idx])

    xs = slice(0, n)
    qs = slice(n, n + m)

    def rhs(j, g):
        x = g[xs]
        q = g[qs]
        diff = w[0] * x + d1_diff[j]
        for i in range(1, p_taps + 1):
            diff = diff + w[i] * delayed(x_tabs[i - 1], j, xs)
        u = -(K @ diff + K1 @ q)
        dx = A @ x + B @ u + d2_half[j]
        dq = C @ x - r_half[j]
        if use_q_delay:
            dq = dq - K2 @ (q - delayed(q_tab, j, qs))
        return np.concatenate([dx, dq]), u

    diverged = False
    last = steps
    for k in range(steps):
        j = 2 * k
        g = G[k]
        k1, U[k] = rhs(j, g)
        F[k] = k1
        k2, _ = rhs(j + 1, g + 0.5 * h * k1)
        k3, _ = rhs(j + 1, g + 0.5 * h * k2)
        k4, _ = rhs(j + 2, g + h * k3)
        G[k + 1] = g + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(G[k + 1])) or np.linalg.norm(G[k + 1]) > max_norm:
            diverged = True
            last = k
            break
    if not diverged:
        F[steps], U[steps] = rhs(2 * steps, G[steps])

    G = G[: last + 1]
    U = U[: last + 1]
    times = times[: last + 1]
    x = G[:, :n]
    q = G[:, n:]
    y = x @ C.T
    e = y - r_half[: 2 * last + 1 : 2]
    return Trajectory(times, x, q, U, y, e, diverged)


def simulate(cl: ClosedLoopDDE, ctrl: DelayedFeedbackController,
             r: Signal | None = None, d1: Signal | None = None, d2: Signal | None = None,
             horizon: float = 60.0, step: float | None = None) -> Trajectory:
    """Simulate from rest (zero pre-history)."""
    return simulate_from(cl, ctrl, np.zeros(cl.dim), r, d1, d2, horizon, step)


def steady_state_error(traj: Trajectory, window: float = 0.1, flatness: float = 1e-4) -> SteadyState:
    """Mean tracking error over the last ``window`` fraction of the run.

    Settled means every sample in the window is within ``flatness`` of the mean.
    """
    if traj.diverged or not np.all(np.isfinite(traj.e)):
        return SteadyState(None, False)
    t_end = traj.times[-1]
    tail = traj.e[traj.times >= t_end * (1 - window)]
    mean = tail.mean(axis=0)
    settled = bool(np.max(np.abs(tail - mean)) < flatness)
    return SteadyState(mean, settled)
