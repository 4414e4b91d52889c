"""Plant, controller and closed-loop delay system types.

The closed loop is kept in the form

    G'(t) = A0 G(t) + A1 sum_{i=1..p} w_i G(t - i tau) + A2 G(t - tau_q) + T r(t)

with G = [x; q] and w_i = (-1)^i binom(p, i).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got array with {arr.ndim} dimensions")
    arr.setflags(write=False)
    return arr


def binomial_weights(p: int) -> list[int]:
    """Signed binomial coefficients ``(-1)^i * C(p, i)`` for ``i = 0..p``."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    return [(-1) ** i * comb(p, i) for i in range(p + 1)]


@dataclass(frozen=True)
class Plant:
    """Open-loop LTI triple ``x' = A x + B u``, ``y = C x``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = np.array(self.B, dtype=float)
        if B.ndim == 1:
            # a flat B is a single input column
            B = B.reshape(-1, 1)
        B = _as_matrix(B, "B")
        C = _as_matrix(self.C, "C")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B must have {A.shape[0]} rows, got shape {B.shape}")
        if C.shape[1] != A.shape[0]:
            raise ValueError(f"C must have {A.shape[0]} columns, got shape {C.shape}")
        if min(A.shape[0], B.shape[1], C.shape[0]) < 1:
            raise ValueError("plant dimensions must be at least 1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def r(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class DelayedFeedbackController:
    """Gains and delays of the binomial delayed-feedback tracker.

    ``u = -(K sum_i w_i x(t - i tau) + K1 q)`` and
    ``q' = C x - r - K2 (q - q(t - tau_q))``. With ``tau_q == 0`` the K2 term
    vanishes; K2 is kept but reported inactive.
    """

    K: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    tau: float
    tau_q: float = 0.0
    p: int = 1

    def __post_init__(self):
        object.__setattr__(self, "K", _as_matrix(self.K, "K"))
        object.__setattr__(self, "K1", _as_matrix(self.K1, "K1"))
        object.__setattr__(self, "K2", _as_matrix(self.K2, "K2"))
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "tau_q", float(self.tau_q))
        if int(self.p) != self.p or self.p < 0:
            raise ValueError(f"p must be a nonnegative integer, got {self.p!r}")
        object.__setattr__(self, "p", int(self.p))
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.tau_q >= 0:
            raise ValueError(f"tau_q must be nonnegative, got {self.tau_q}")
        if self.K2.shape[0] != self.K2.shape[1]:
            raise ValueError(f"K2 must be square, got shape {self.K2.shape}")

    @property
    def k2_active(self) -> bool:
        return self.tau_q > 0

    @property
    def weights(self) -> list[int]:
        return binomial_weights(self.p)

    def replace(self, **changes) -> "DelayedFeedbackController":
        fields = dict(K=self.K, K1=self.K1, K2=self.K2, tau=self.tau, tau_q=self.tau_q, p=self.p)
        fields.update(changes)
        return DelayedFeedbackController(**fields)

    def check_against(self, plant: Plant) -> None:
        n, r, m = plant.n, plant.r, plant.m
        for name, mat, shape in (("K", self.K, (r, n)), ("K1", self.K1, (r, m)), ("K2", self.K2, (m, m))):
            if mat.shape != shape:
                raise ValueError(f"{name} must have shape {shape} for this plant, got {mat.shape}")


@dataclass(frozen=True)
class ClosedLoopDDE:
    """Assembled closed loop shared by the spectrum solver and the simulator."""

    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    T: np.ndarray
    weights: tuple[int, ...]
    tau: float
    tau_q: float
    n: int
    m: int
    plant: Plant | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("A0", "A1", "A2", "T"):
            object.__setattr__(self, name, _as_matrix(getattr(self, name), name))
        object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))
        d = self.n + self.m
        for name in ("A0", "A1", "A2"):
            if getattr(self, name).shape != (d, d):
                raise ValueError(f"{name} must be {d}x{d}, got {getattr(self, name).shape}")

    @property
    def dim(self) -> int:
        return self.n + self.m

    @property
    def p(self) -> int:
        return len(self.weights) - 1

    def delay_terms(self) -> list[tuple[float, np.ndarray]]:
        """``(delay, coefficient matrix)`` pairs, zero-coefficient terms dropped."""
        terms = []
        if np.any(self.A1):
            terms += [(i * self.tau, self.weights[i] * self.A1) for i in range(1, self.p + 1)]
        if self.tau_q > 0 and np.any(self.A2):
            terms.append((self.tau_q, self.A2))
        return terms

    @property
    def delays(self) -> list[float]:
        out = [i * self.tau for i in range(1, self.p + 1)]
        if self.tau_q > 0:
            out.append(self.tau_q)
        return out

    @property
    def max_delay(self) -> float:
        terms = self.delay_terms()
        return max((h for h, _ in terms), default=0.0)

    @property
    def delay_free(self) -> bool:
        return not self.delay_terms()


def build_augmented(plant: Plant) -> tuple[np.ndarray, np.ndarray]:
    n, m, r = plant.n, plant.m, plant.r
    A_aug = np.block([[plant.A, np.zeros((n, m))], [plant.C, np.zeros((m, m))]])
    B_aug = np.vstack([plant.B, np.zeros((m, r))])
    return A_aug, B_aug


def build_closed_loop(plant: Plant, ctrl: DelayedFeedbackController) -> ClosedLoopDDE:
    ctrl.check_against(plant)
    n, m = plant.n, plant.m
    A, B, C = plant.A, plant.B, plant.C
    K2 = ctrl.K2 if ctrl.k2_active else np.zeros((m, m))
    BK = B @ ctrl.K
    A0 = np.block([[A - BK, -B @ ctrl.K1], [C, -K2]])
    A1 = np.zeros((n + m, n + m))
    A1[:n, :n] = -BK
    A2 = np.zeros((n + m, n + m))
    A2[n:, n:] = K2
    T = np.vstack([np.zeros((n, m)), -np.eye(m)])
    return ClosedLoopDDE(A0, A1, A2, T, tuple(ctrl.weights), ctrl.tau, ctrl.tau_q, n, m, plant)


def extract_gains(cl: ClosedLoopDDE) -> dict[str, np.ndarray]:
    """Recover ``A, B K, B K1, C, K2`` blocks from an assembled closed loop.

    B is not separable from B K without the plant, so when the plant is
    attached the gains are recovered by least squares on B.
    """
    n = cl.n
    BK = -cl.A1[:n, :n]
    out = {
        "A": cl.A0[:n, :n] + BK,
        "BK": BK,
        "BK1": -cl.A0[:n, n:],
        "C": cl.A0[n:, :n].copy(),
        "K2": cl.A2[n:, n:].copy(),
    }
    if cl.plant is not None:
        Bp = np.linalg.pinv(cl.plant.B)
        out["K"] = Bp @ BK
        out["K1"] = Bp @ out["BK1"]
    return out


def delay_factor(cl: ClosedLoopDDE, s: complex) -> complex:
    """``sum_{i=1..p} w_i exp(-s i tau)``."""
    return sum(cl.weights[i] * np.exp(-s * i * cl.tau) for i in range(1, cl.p + 1))


def char_matrix(cl: ClosedLoopDDE, s: complex) -> np.ndarray:
    """Characteristic matrix ``sI - A0 - A1 sum_i w_i e^{-s i tau} - A2 e^{-s tau_q}``."""
    s = complex(s)
    M = s * np.eye(cl.dim) - cl.A0 - cl.A1 * delay_factor(cl, s)
    if cl.tau_q > 0:
        M = M - cl.A2 * np.exp(-s * cl.tau_q)
    return M


def char_matrix_derivative(cl: ClosedLoopDDE, s: complex) -> np.ndarray:
    s = complex(s)
    dfac = sum(cl.weights[i] * (i * cl.tau) * np.exp(-s * i * cl.tau) for i in range(1, cl.p + 1))
    M = np.eye(cl.dim) + cl.A1 * dfac
    if cl.tau_q > 0:
        M = M + cl.A2 * cl.tau_q * np.exp(-s * cl.tau_q)
    return M
