"""Shared numerical kernel: grids, interpolants, root finding, quadrature,
forward-Euler rollouts and bracketed maximization."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq


class ConvergenceError(RuntimeError):
    """A Newton-type iteration failed to reach its tolerance."""

    def __init__(self, message, residual_norm=float("nan"), x=None):
        super().__init__(f"{message} (final residual norm {residual_norm:.3e})")
        self.residual_norm = residual_norm
        self.x = x


# ---------------------------------------------------------------------------
# grids and interpolants


@dataclass(frozen=True)
class Grid1D:
    lo: float = 0.0
    hi: float = 6.0
    count: int = 601

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 2:
            raise ValueError(f"grid needs at least 2 nodes, got {self.count!r}")
        if not self.hi > self.lo:
            raise ValueError(f"grid bounds must satisfy lo < hi, got [{self.lo}, {self.hi}]")
        object.__setattr__(self, "count", int(self.count))

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.count - 1)


@dataclass(frozen=True)
class Grid2D:
    p: Grid1D = field(default_factory=lambda: Grid1D(0.0, 6.0, 101))
    m: Grid1D = field(default_factory=lambda: Grid1D(150.0, 200.0, 101))

    @property
    def shape(self) -> tuple:
        return (self.p.count, self.m.count)

    def mesh(self):
        """``(P, M)`` node arrays with 'ij' indexing, shape ``(N1, N2)``."""
        return np.meshgrid(self.p.nodes, self.m.nodes, indexing="ij")


def _cell(nodes: np.ndarray, x: np.ndarray):
    i = np.searchsorted(nodes, x, side="right") - 1
    i = np.clip(i, 0, nodes.size - 2)
    t = (x - nodes[i]) / (nodes[i + 1] - nodes[i])
    return i, t


class PiecewiseLinear:
    """Piecewise-linear function on a :class:`Grid1D`.

    ``extrapolate='clamp'`` evaluates out-of-grid points at the nearest grid
    end; ``'linear'`` continues the boundary cell's line.
    """

    def __init__(self, grid: Grid1D, values, extrapolate: str = "clamp"):
        values = np.array(values, dtype=float)
        if values.shape != (grid.count,):
            raise ValueError(f"expected {grid.count} values, got shape {values.shape}")
        if extrapolate not in ("clamp", "linear"):
            raise ValueError(f"unknown extrapolation mode {extrapolate!r}")
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self.extrapolate = extrapolate
        self._nodes = grid.nodes

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.extrapolate == "clamp":
            x = np.clip(x, self.grid.lo, self.grid.hi)
        i, t = _cell(self._nodes, x)
        v = self.values
        return (1.0 - t) * v[i] + t * v[i + 1]


class PiecewiseBilinear:
    """Piecewise-bilinear function on a :class:`Grid2D`; values shaped ``(N1, N2)``."""

    def __init__(self, grid: Grid2D, values, extrapolate: str = "clamp"):
        values = np.array(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"expected values of shape {grid.shape}, got {values.shape}")
        if extrapolate not in ("clamp", "linear"):
            raise ValueError(f"unknown extrapolation mode {extrapolate!r}")
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self.extrapolate = extrapolate
        self._p = grid.p.nodes
        self._m = grid.m.nodes

    def __call__(self, P, M):
        P = np.asarray(P, dtype=float)
        M = np.asarray(M, dtype=float)
        if self.extrapolate == "clamp":
            P = np.clip(P, self.grid.p.lo, self.grid.p.hi)
            M = np.clip(M, self.grid.m.lo, self.grid.m.hi)
        i, s = _cell(self._p, P)
        j, t = _cell(self._m, M)
        v = self.values
        return ((1 - s) * (1 - t) * v[i, j] + s * (1 - t) * v[i + 1, j]
                + (1 - s) * t * v[i, j + 1] + s * t * v[i + 1, j + 1])


# ---------------------------------------------------------------------------
# root finding


def _fd_derivative(fun, x, r0):
    e = 1e-7 * max(1.0, abs(x))
    return (fun(x + e) - r0) / e


def _within(x, lo, hi):
    return lo < x < hi


def _newton_from(residual, x0, tol, lo, hi, derivative, max_iter=100):
    x = float(x0)
    if not _within(x, lo, hi):
        return None
    r = residual(x)
    for _ in range(max_iter):
        if not np.isfinite(r):
            return None
        if abs(r) < tol:
            return x
        d = derivative(x) if derivative is not None else _fd_derivative(residual, x, r)
        if not np.isfinite(d) or d == 0.0:
            return None
        step = -r / d
        for _ in range(60):
            x_new = x + step
            if _within(x_new, lo, hi):
                r_new = residual(x_new)
                if np.isfinite(r_new):
                    break
            step *= 0.5
        else:
            return None
        if r_new == 0.0:
            return x_new
        if np.sign(r_new) != np.sign(r):
            a, b = sorted((x, x_new))
            root = brentq(residual, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            return root
        x, r = x_new, r_new
    return x if abs(r) < tol else None


def solve_scalar(residual: Callable[[float], float], guesses: Sequence[float], tol: float = 1e-10,
                 domain=(0.0, math.inf), derivative=None) -> list:
    """Distinct roots of ``residual`` reached from a set of starting points.

    Each start runs a safeguarded Newton iteration that switches to Brent's
    method as soon as two iterates bracket a sign change. Roots closer than
    ``1e-8`` (relative) are merged. Returns an empty list if nothing
    converges.
    """
    guesses = list(guesses)
    if not guesses:
        raise ValueError("solve_scalar needs at least one starting guess")
    lo, hi = domain
    found = []
    for g in guesses:
        root = _newton_from(residual, g, tol, lo, hi, derivative)
        if root is None or abs(residual(root)) >= tol:
            continue
        found.append(root)
    found.sort()
    roots = []
    for x in found:
        if roots and abs(x - roots[-1]) <= 1e-8 * max(abs(x), abs(roots[-1]), 1e-300):
            continue
        roots.append(x)
    return roots


def numerical_jacobian(residual, x, r0=None, rel_step=1e-7):
    x = np.asarray(x, dtype=float)
    if r0 is None:
        r0 = np.asarray(residual(x), dtype=float)
    J = np.empty((r0.size, x.size))
    for k in range(x.size):
        e = rel_step * max(1.0, abs(x[k]))
        xp = x.copy()
        xp[k] += e
        J[:, k] = (np.asarray(residual(xp), dtype=float) - r0) / e
    return J


def solve_system(residual, guess, tol: float = 1e-10, jacobian=None, max_iter: int = 100,
                 max_halvings: int = 40) -> np.ndarray:
    """Damped Newton for a square system.

    The full step is halved (up to ``max_halvings`` times) until the
    residual's sup-norm decreases. Raises :class:`ConvergenceError` on
    failure.
    """
    x = np.array(guess, dtype=float)
    r = np.asarray(residual(x), dtype=float)
    if r.shape != x.shape:
        raise ValueError(f"system is not square: {x.size} unknowns, {r.size} equations")
    norm = np.max(np.abs(r)) if np.all(np.isfinite(r)) else np.inf
    for _ in range(max_iter):
        if norm < tol:
            return x
        J = jacobian(x) if jacobian is not None else numerical_jacobian(residual, x, r)
        try:
            d = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular Jacobian in damped Newton", norm, x) from None
        step = 1.0
        for _ in range(max_halvings + 1):
            x_new = x + step * d
            r_new = np.asarray(residual(x_new), dtype=float)
            if np.all(np.isfinite(r_new)):
                norm_new = np.max(np.abs(r_new))
                if norm_new < norm:
                    break
            step *= 0.5
        else:
            raise ConvergenceError("damped Newton line search failed", norm, x)
        x, r, norm = x_new, r_new, norm_new
    if norm < tol:
        return x
    raise ConvergenceError("damped Newton hit the iteration limit", norm, x)


# ---------------------------------------------------------------------------
# quadrature and simulation


def discounted_integral(samples, rho: float, h: float, T: float | None = None) -> float:
    """Trapezoid estimate of ``int_0^inf exp(-rho t) u(t) dt``.

    ``samples[k]`` is ``u(k h)``; the tail beyond the last sample is closed
    with ``u(T) exp(-rho T) / rho``.
    """
    u = np.asarray(samples, dtype=float)
    if T is None:
        T = (u.shape[0] - 1) * h
    t = h * np.arange(u.shape[0])
    w = np.exp(-rho * t)
    body = h * (np.sum((w * u.T).T, axis=0) - 0.5 * (w[0] * u[0] + w[-1] * u[-1]))
    return body + u[-1] * math.exp(-rho * T) / rho


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    loadings: np.ndarray
    utilities: np.ndarray

    def welfare(self, rho: float) -> float:
        h = self.times[1] - self.times[0]
        return discounted_integral(self.utilities, rho, h)


def euler_simulate(rate, strategy, S0, h: float, T: float, utility=None) -> Trajectory:
    """Forward-Euler rollout ``S(t+h) = S(t) + rate(S, strategy(S)) h``.

    ``rate(S, x)`` and ``strategy(S)`` take the state as a 1-D array (or a
    scalar for one-dimensional problems). States are clamped at zero after
    each step. ``utility(x, S)``, when given, is sampled along the path.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    steps = int(math.floor(T / h + 1e-9))
    S = np.array(S0, dtype=float)
    states = np.empty((steps + 1,) + S.shape)
    loads = np.empty(steps + 1)
    utils = np.zeros(steps + 1)
    for k in range(steps + 1):
        x = float(strategy(S))
        states[k] = S
        loads[k] = x
        if utility is not None:
            utils[k] = utility(x, S)
        if k < steps:
            S = np.maximum(S + np.asarray(rate(S, x), dtype=float) * h, 0.0)
    return Trajectory(h * np.arange(steps + 1), states, loads, utils)


def fd_partial_M(values, i1: int, i2: int, dM: float) -> float:
    """One-sided at the two M-ends, central elsewhere."""
    v = np.asarray(values)
    N2 = v.shape[1]
    if i2 == 0:
        return (v[i1, 1] - v[i1, 0]) / dM
    if i2 == N2 - 1:
        return (v[i1, i2] - v[i1, i2 - 1]) / dM
    return (v[i1, i2 + 1] - v[i1, i2 - 1]) / (2 * dM)


def fd_partial_M_grid(values, dM: float) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    w = np.empty_like(v)
    w[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * dM)
    w[:, 0] = (v[:, 1] - v[:, 0]) / dM
    w[:, -1] = (v[:, -1] - v[:, -2]) / dM
    return w


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def maximize_scalar(objective, lo: float, hi: float, tol: float = 1e-6, coarse: int = 64,
                    vectorized: bool = False):
    """Global-ish maximum on ``[lo, hi]``: coarse scan then golden section.

    The golden-section refinement runs on the two lattice cells around the
    best scanned point. ``vectorized=True`` evaluates the scan in one call.
    Returns ``(argmax, max)``.
    """
    if not hi > lo:
        raise ValueError("maximize_scalar needs lo < hi")
    xs = np.linspace(lo, hi, coarse)
    fs = np.asarray(objective(xs), dtype=float) if vectorized else np.array([objective(x) for x in xs])
    fs = np.where(np.isfinite(fs), fs, -np.inf)
    k = int(np.argmax(fs))
    best_x, best_f = xs[k], fs[k]
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, coarse - 1)]

    def ev(x):
        v = objective(np.array([x]))[0] if vectorized else objective(x)
        return v if np.isfinite(v) else -np.inf

    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = ev(c), ev(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = ev(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = ev(d)
    for x, fx in ((c, fc), (d, fd)):
        if fx > best_f:
            best_x, best_f = x, fx
    return float(best_x), float(best_f)
