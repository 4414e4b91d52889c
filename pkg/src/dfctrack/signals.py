"""Piecewise-polynomial vector signals for references and disturbances."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Piece:
    t_start: float
    coeffs: tuple[float, ...]
    direction: tuple[float, ...]

    def __post_init__(self):
        if self.t_start < 0:
            raise ValueError("signal pieces must start at t >= 0")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "direction", tuple(float(v) for v in np.atleast_1d(self.direction)))
        if not self.coeffs:
            raise ValueError("a piece needs at least one coefficient")


@dataclass(frozen=True)
class Signal:
    """Sum of polynomial pieces ``direction * sum_j c_j (t - t_start)^j``,
    each switched on at its ``t_start``."""

    dim: int
    pieces: tuple[Piece, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        for piece in self.pieces:
            if len(piece.direction) != self.dim:
                raise ValueError(f"piece direction has length {len(piece.direction)}, expected {self.dim}")

    @classmethod
    def zero(cls, dim: int) -> "Signal":
        return cls(dim)

    def __add__(self, other: "Signal") -> "Signal":
        if other.dim != self.dim:
            raise ValueError("cannot add signals of different dimension")
        return Signal(self.dim, self.pieces + other.pieces)

    @classmethod
    def step(cls, direction, t0: float = 0.0, height: float = 1.0) -> "Signal":
        d = np.atleast_1d(np.asarray(direction, dtype=float))
        return cls(len(d), (Piece(t0, (height,), tuple(d)),))

    @classmethod
    def ramp(cls, direction, t0: float = 0.0, slope: float = 1.0) -> "Signal":
        d = np.atleast_1d(np.asarray(direction, dtype=float))
        return cls(len(d), (Piece(t0, (0.0, slope), tuple(d)),))

    @classmethod
    def power(cls, direction, degree: int, t0: float = 0.0, gain: float = 1.0) -> "Signal":
        """``gain * (t - t0)^degree``; degree 2 is a parabola."""
        d = np.atleast_1d(np.asarray(direction, dtype=float))
        coeffs = (0.0,) * degree + (gain,)
        return cls(len(d), (Piece(t0, coeffs, tuple(d)),))

    @property
    def is_zero(self) -> bool:
        return all(not any(p.coeffs) or not any(p.direction) for p in self.pieces)

    def __call__(self, t):
        """Value at scalar ``t`` (shape ``(dim,)``) or array ``t`` (shape ``(len(t), dim)``)."""
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        t_arr = np.atleast_1d(t_arr)
        out = np.zeros((t_arr.size, self.dim))
        for piece in self.pieces:
            dt = t_arr - piece.t_start
            on = dt >= 0
            if not on.any():
                continue
            amp = np.polynomial.polynomial.polyval(np.where(on, dt, 0.0), piece.coeffs)
            out += np.where(on, amp, 0.0)[:, None] * np.asarray(piece.direction)[None, :]
        return out[0] if scalar else out

    def to_dict(self) -> list[dict]:
        return [{"t_start": p.t_start, "coeffs": list(p.coeffs), "direction": list(p.direction)}
                for p in self.pieces]

    @classmethod
    def from_dict(cls, dim: int, pieces: list[dict]) -> "Signal":
        return cls(dim, tuple(Piece(float(p["t_start"]), tuple(p["coeffs"]), tuple(p["direction"]))
                              for p in pieces))
