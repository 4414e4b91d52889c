"""Rightmost characteristic roots of the closed-loop delay system.

Roots are located with a Chebyshev collocation approximation of the
infinitesimal generator and then polished with Newton's method on
``det(Delta(s)) = 0``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import ClosedLoopDDE, char_matrix, char_matrix_derivative, delay_factor

DEFAULT_ORDER = 32
DEFAULT_COUNT = 10
RESIDUAL_TOL = 1e-8
DEDUP_TOL = 1e-6
AGREE_TOL = 1e-6


class NewtonDivergence(RuntimeError):
    def __init__(self, message: str, last: complex):
        super().__init__(message)
        self.last = last


@dataclass(frozen=True)
class SpectrumResult:
    values: np.ndarray
    residuals: np.ndarray
    abscissa: float
    discretization_order: int
    max_delay: float
    complete: bool = True

    @property
    def roots(self) -> list[tuple[complex, float]]:
        return list(zip(self.values.tolist(), self.residuals.tolist()))

    def to_csv(self) -> str:
        lines = ["re,im,residual"]
        lines += [f"{v.real!r},{v.imag!r},{r!r}" for v, r in zip(self.values, self.residuals)]
        return "\n".join(lines) + "\n"


def chebyshev_nodes(N: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Lobatto nodes on ``[-h, 0]`` (first node at 0) and the
    differentiation matrix with respect to theta."""
    j = np.arange(N + 1)
    x = np.cos(np.pi * j / N)
    c = np.hstack([2.0, np.ones(N - 1), 2.0]) * (-1.0) ** j
    dX = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return h * (x - 1) / 2, D * (2.0 / h)


def barycentric_row(nodes: np.ndarray, t: float) -> np.ndarray:
    """Interpolation weights mapping node values to the value at ``t``."""
    N = len(nodes) - 1
    w = np.ones(N + 1)
    w[0] = w[-1] = 0.5
    w *= (-1.0) ** np.arange(N + 1)
    diff = t - nodes
    hit = np.flatnonzero(np.abs(diff) < 1e-14 * max(1.0, abs(t)))
    if hit.size:
        row = np.zeros(N + 1)
        row[hit[0]] = 1.0
        return row
    v = w / diff
    return v / v.sum()


def discretize(cl: ClosedLoopDDE, N: int = DEFAULT_ORDER) -> np.ndarray:
    if N < 4:
        raise ValueError("discretization order must be at least 4")
    terms = cl.delay_terms()
    if not terms:
        raise ValueError("closed loop has no delays; use the dense eigenvalue path")
    d = cl.dim
    h = max(delay for delay, _ in terms)
    nodes, D = chebyshev_nodes(N, h)

    spacing = np.min(np.abs(np.diff(nodes)))
    delays = sorted({round(delay, 15) for delay, _ in terms})
    if any(b - a < spacing for a, b in zip(delays, delays[1:])):
        warnings.warn(f"delays closer than the minimum node spacing {spacing:.3g}; increase N",
                      RuntimeWarning, stacklevel=2)

    M = np.zeros((d * (N + 1), d * (N + 1)))
    M[d:, :] = np.kron(D[1:, :], np.eye(d))
    top = np.zeros((d, d * (N + 1)))
    top[:, :d] = cl.A0
    for delay, coeff in terms:
        top += np.kron(barycentric_row(nodes, -delay), coeff)
    M[:d, :] = top
    return M


def residual(cl: ClosedLoopDDE, s: complex) -> float:
    """Scale-free root residual ``sigma_min / sigma_max`` of ``Delta(s)``.

    A 1x1 characteristic matrix has ratio 1 everywhere, so scalar systems use
    the normwise backward error ``|Delta(s)| / (|s| + sum |coeff_k| ||A_k||)``.
    """
    s = complex(s)
    Delta = char_matrix(cl, s)
    if cl.dim == 1:
        scale = abs(s) + np.linalg.norm(cl.A0, 2)
        scale += abs(delay_factor(cl, s)) * np.linalg.norm(cl.A1, 2)
        if cl.tau_q > 0:
            scale += abs(np.exp(-s * cl.tau_q)) * np.linalg.norm(cl.A2, 2)
        return float(abs(Delta[0, 0]) / scale) if scale else 0.0
    sv = np.linalg.svd(Delta, compute_uv=False)
    if sv[0] == 0:
        return 0.0
    return float(sv[-1] / sv[0])


def newton_refine(cl: ClosedLoopDDE, s0: complex, max_iter: int = 50,
                  step_tol: float = 1e-12) -> tuple[complex, float]:
    """Polish a root guess; ``f'/f = tr(Delta^{-1} Delta')`` gives the step."""
    s = complex(s0)
    if not np.isfinite(s):
        raise ValueError("initial guess must be finite")
    for _ in range(max_iter):
        res = residual(cl, s)
        if res < 1e-15:
            return s, res
        Delta = char_matrix(cl, s)
        try:
            ratio = np.trace(np.linalg.solve(Delta, char_matrix_derivative(cl, s)))
        except np.linalg.LinAlgError:
            return s, res
        if ratio == 0 or not np.isfinite(ratio):
            raise NewtonDivergence("derivative ratio vanished", s)
        step = 1.0 / ratio
        s = s - step
        if not np.isfinite(s):
            raise NewtonDivergence("iterate left the finite plane", s)
        if abs(step) < step_tol * max(1.0, abs(s)):
            return s, residual(cl, s)
    res = residual(cl, s)
    if res <= RESIDUAL_TOL:
        return s, res
    raise NewtonDivergence(f"no convergence in {max_iter} iterations", s)


def _top(values: np.ndarray, count: int) -> np.ndarray:
    return values[np.argsort(-values.real, kind="stable")][:count]


def _agree(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    if len(a) != len(b):
        return False
    return all(np.min(np.abs(b - z)) < tol for z in a)


def _canonical(cl: ClosedLoopDDE, candidates: list[complex], tol: float):
    roots: list[complex] = []
    for z in candidates:
        if abs(z.imag) < 1e-10 * max(1.0, abs(z)):
            z = complex(z.real, 0.0)
        # keep the upper member of each pair; the mirror is added below
        z = complex(z.real, abs(z.imag))
        if all(abs(z - w) >= DEDUP_TOL for w in roots):
            roots.append(z)
    full = []
    for z in roots:
        full.append(z)
        if z.imag != 0.0:
            full.append(z.conjugate())
    full.sort(key=lambda z: (-z.real, -z.imag))
    res = [residual(cl, z) for z in full]
    keep = [(z, r) for z, r in zip(full, res) if r <= tol]
    return keep


def rightmost_roots(cl: ClosedLoopDDE, count: int = DEFAULT_COUNT, N: int = DEFAULT_ORDER,
                    tol: float = RESIDUAL_TOL, check_order: bool = True) -> SpectrumResult:
    """The ``count`` rightmost validated roots.

    Eigenvalues of the order-N discretization seed Newton refinement; with
    ``check_order`` the order is doubled once when the leading eigenvalues
    move between N and 2N. The abscissa is exact for the returned set and
    trusts the discretization to have captured everything to its right.
    """
    if count < 1:
        raise ValueError("count must be positive")
    if cl.delay_free:
        candidates = list(np.linalg.eigvals(cl.A0))
        order = 0
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ev = np.linalg.eigvals(discretize(cl, N))
        order = N
        if check_order:
            ev2 = np.linalg.eigvals(discretize(cl, 2 * N))
            if not _agree(_top(ev, count), _top(ev2, count), AGREE_TOL):
                ev, order = ev2, 2 * N
        candidates = []
        for z in _top(ev, 3 * count):
            try:
                root, _ = newton_refine(cl, z)
            except NewtonDivergence:
                continue
            candidates.append(root)

    found = _canonical(cl, candidates, tol)
    # extend past `count` rather than split a conjugate pair
    cut = min(count, len(found))
    if 0 < cut < len(found) and found[cut - 1][0].imag > 0:
        cut += 1
    found = found[:cut]
    values = np.array([z for z, _ in found], dtype=complex)
    residuals = np.array([r for _, r in found], dtype=float)
    abscissa = float(values[0].real) if len(values) else float("nan")
    return SpectrumResult(values, residuals, abscissa, order, cl.max_delay,
                          complete=len(values) >= count)


def spectral_abscissa(cl: ClosedLoopDDE, count: int = 3) -> float:
    return rightmost_roots(cl, count).abscissa
