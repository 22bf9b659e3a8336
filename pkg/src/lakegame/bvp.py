"""Infinite-horizon boundary value problems on a compactified time axis.

Time is mapped to ``tau = 1 - exp(-lam t)`` so the horizon becomes
``[0, 1)``; the problem is solved on ``[0, tau_end]`` with ``tau_end`` close
to one. The collocation scheme is the three-stage Lobatto IIIA method
(Simpson's rule with a cubic Hermite midpoint), fourth order, on a fixed
mesh, with a sparse damped Newton iteration.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .numerics import ConvergenceError

log = logging.getLogger(__name__)


def tau_transform(lam: float):
    """Return ``(t_of_tau, dt_dtau)`` for the map ``tau = 1 - exp(-lam t)``."""
    if not lam > 0:
        raise ValueError("transform rate must be positive")

    def t_of_tau(tau):
        return -np.log1p(-np.asarray(tau, dtype=float)) / lam

    def dt_dtau(tau):
        return 1.0 / (lam * (1.0 - np.asarray(tau, dtype=float)))

    return t_of_tau, dt_dtau


def compactify(rate: Callable, lam: float) -> Callable:
    """Turn a physical-time rate ``rate(Y)`` into ``rhs(tau, Y)``."""
    _, dt_dtau = tau_transform(lam)

    def rhs(tau, Y):
        return rate(Y) * dt_dtau(tau)

    return rhs


@dataclass
class BvpProblem:
    """``y' = rhs(tau, y)`` on ``[0, tau_end]`` with component pins.

    ``rhs`` takes ``tau`` of shape ``(m,)`` and ``Y`` of shape ``(d, m)``.
    ``initial`` / ``terminal`` map component indices to pinned values.
    """

    rhs: Callable
    dim: int
    initial: dict
    terminal: dict
    tau_end: float
    lam: float | None = None
    jacobian: Callable | None = None

    def __post_init__(self):
        if len(self.initial) + len(self.terminal) != self.dim:
            raise ValueError(f"need {self.dim} boundary conditions, got "
                             f"{len(self.initial)} initial + {len(self.terminal)} terminal")
        if self.lam is not None and not (0 < self.tau_end < 1):
            raise ValueError("terminal mesh point must lie in (0, 1)")
        if self.lam is not None and not self.lam > 0:
            raise ValueError("transform rate must be positive")


@dataclass
class BvpSolution:
    mesh: np.ndarray
    y: np.ndarray
    f: np.ndarray
    residual: float
    bc_residual: float
    iterations: int
    lam: float | None = None
    success: bool = True
    worst_interval: int = -1

    def __call__(self, tau):
        """Cubic Hermite dense output (the collocation polynomial)."""
        tau = np.asarray(tau, dtype=float)
        x = self.mesh
        k = np.clip(np.searchsorted(x, tau, side="right") - 1, 0, x.size - 2)
        h = x[k + 1] - x[k]
        s = (tau - x[k]) / h
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        y, f = self.y, self.f
        return h00 * y[:, k] + h10 * h * f[:, k] + h01 * y[:, k + 1] + h11 * h * f[:, k + 1]

    def t(self, tau=None):
        if self.lam is None:
            raise ValueError("solution is not on a compactified axis")
        t_of_tau, _ = tau_transform(self.lam)
        return t_of_tau(self.mesh if tau is None else tau)

    def at_time(self, t):
        """Dense output at physical times ``t`` (compactified problems only)."""
        if self.lam is None:
            raise ValueError("solution is not on a compactified axis")
        tau = -np.expm1(-self.lam * np.asarray(t, dtype=float))
        return self(tau)


def _fd_jac(rhs, tau, Y, F):
    d, m = Y.shape
    J = np.empty((m, d, d))
    for j in range(d):
        e = 1e-7 * np.maximum(1.0, np.abs(Y[j]))
        Yp = Y.copy()
        Yp[j] += e
        J[:, :, j] = ((rhs(tau, Yp) - F) / e).T
    return J


class _Collocation:
    def __init__(self, problem: BvpProblem, mesh: np.ndarray):
        self.p = problem
        self.x = mesh
        self.h = np.diff(mesh)
        self.xm = mesh[:-1] + 0.5 * self.h
        self.d = problem.dim
        self.m = mesh.size

    def jac(self, tau, Y, F):
        if self.p.jacobian is not None:
            return self.p.jacobian(tau, Y)
        return _fd_jac(self.p.rhs, tau, Y, F)

    def residual(self, Y):
        """Collocation + boundary residuals; also returns the stage data."""
        rhs = self.p.rhs
        F = rhs(self.x, Y)
        h = self.h
        Ym = 0.5 * (Y[:, :-1] + Y[:, 1:]) - h / 8.0 * (F[:, 1:] - F[:, :-1])
        Fm = rhs(self.xm, Ym)
        R = Y[:, 1:] - Y[:, :-1] - h / 6.0 * (F[:, :-1] + 4.0 * Fm + F[:, 1:])
        bc = [Y[i, 0] - v for i, v in self.p.initial.items()]
        bc += [Y[i, -1] - v for i, v in self.p.terminal.items()]
        return R, np.array(bc, dtype=float), F, Ym, Fm

    def jacobian_matrix(self, Y, F, Ym, Fm):
        d, m = self.d, self.m
        I = np.eye(d)
        Jn = self.jac(self.x, Y, F)
        Jm = self.jac(self.xm, Ym, Fm)
        h = self.h[:, None, None]
        dym_dl = 0.5 * I + h / 8.0 * Jn[:-1]
        dym_dr = 0.5 * I - h / 8.0 * Jn[1:]
        A = -I - h / 6.0 * (Jn[:-1] + 4.0 * Jm @ dym_dl)
        B = I - h / 6.0 * (Jn[1:] + 4.0 * Jm @ dym_dr)
        # rows: interval k, component a ; cols: node k / k+1, component b
        k = np.arange(m - 1)[:, None, None]
        a = np.arange(d)[None, :, None]
        b = np.arange(d)[None, None, :]
        rows = np.broadcast_to(k * d + a, A.shape)
        colsA = np.broadcast_to(k * d + b, A.shape)
        colsB = colsA + d
        r_bc, c_bc = [], []
        base = (m - 1) * d
        for q, i in enumerate(self.p.initial):
            r_bc.append(base + q)
            c_bc.append(i)
        for q, i in enumerate(self.p.terminal, start=len(self.p.initial)):
            r_bc.append(base + q)
            c_bc.append((m - 1) * d + i)
        data = np.concatenate([A.ravel(), B.ravel(), np.ones(len(r_bc))])
        rr = np.concatenate([rows.ravel(), rows.ravel(), r_bc])
        cc = np.concatenate([colsA.ravel(), colsB.ravel(), c_bc])
        return sp.csc_matrix((data, (rr, cc)), shape=(m * d, m * d))


def _pack(R, bc):
    return np.concatenate([R.T.ravel(), bc])


def solve_bvp(problem: BvpProblem, mesh, guess, tol: float = 1e-8, max_iter: int = 50,
              max_halvings: int = 30, validate: Callable | None = None) -> BvpSolution:
    """Solve the collocation equations by damped Newton.

    ``guess`` has shape ``(d, len(mesh))``. ``validate(Y)``, if given, may
    reject an iterate (returning ``False``), which is treated like a
    non-finite residual during the line search. Raises
    :class:`~lakegame.numerics.ConvergenceError` on failure.
    """
    mesh = np.asarray(mesh, dtype=float)
    Y = np.array(guess, dtype=float)
    if Y.shape != (problem.dim, mesh.size):
        raise ValueError(f"guess must have shape {(problem.dim, mesh.size)}, got {Y.shape}")
    col = _Collocation(problem, mesh)

    def evaluate(Y):
        if validate is not None and not validate(Y):
            return None
        with np.errstate(all="ignore"):
            out = col.residual(Y)
        if not (np.all(np.isfinite(out[0])) and np.all(np.isfinite(out[2])) and np.all(np.isfinite(out[4]))):
            return None
        return out

    cur = evaluate(Y)
    if cur is None:
        raise ConvergenceError("initial guess gives a non-finite residual", math.inf)
    norm = np.max(np.abs(_pack(cur[0], cur[1])))
    for it in range(max_iter + 1):
        R, bc, F, Ym, Fm = cur
        if np.max(np.abs(R)) < tol and (bc.size == 0 or np.max(np.abs(bc)) < tol):
            return BvpSolution(mesh, Y, F, float(np.max(np.abs(R))), float(np.max(np.abs(bc), initial=0.0)),
                               it, problem.lam)
        if it == max_iter:
            break
        Jac = col.jacobian_matrix(Y, F, Ym, Fm)
        try:
            delta = splu(Jac).solve(-_pack(R, bc))
        except RuntimeError:
            raise ConvergenceError("singular collocation Jacobian", norm) from None
        delta = delta.reshape(mesh.size, problem.dim).T
        step = 1.0
        for _ in range(max_halvings + 1):
            Y_new = Y + step * delta
            new = evaluate(Y_new)
            if new is not None:
                norm_new = np.max(np.abs(_pack(new[0], new[1])))
                if norm_new < norm or norm_new < tol:
                    break
            step *= 0.5
        else:
            worst = int(np.argmax(np.max(np.abs(R), axis=0)))
            err = ConvergenceError(f"collocation Newton stalled (worst interval {worst})", norm)
            err.worst_interval = worst
            raise err
        Y, cur, norm = Y_new, new, norm_new
    worst = int(np.argmax(np.max(np.abs(cur[0]), axis=0)))
    err = ConvergenceError(f"collocation Newton hit the iteration limit (worst interval {worst})", norm)
    err.worst_interval = worst
    raise err


@dataclass
class SweepResult:
    start: tuple
    target: int | None
    solution: BvpSolution | None
    welfare: float
    accepted: list = field(default_factory=list)
    # every accepted candidate path, in the order of ``accepted``
    paths: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return self.target is not None


def sweep(starts, targets, make_problem, constant_guess, accept, welfare, mesh,
          use_neighbors: bool = True, validate=None, tol: float = 1e-8):
    """Solve one BVP per (start, target) and keep the best accepted path.

    Starts are visited in order. For each target the guess is the previous
    start's accepted solution for that target (when ``use_neighbors``),
    falling back to the constant path at the target. A candidate counts
    only if ``accept(solution, target)`` holds; the survivor with the
    highest ``welfare(solution)`` wins. Starts with no survivor are logged
    and returned with ``target=None``.
    """
    results = []
    previous = {}
    for start in starts:
        start = tuple(np.atleast_1d(start).astype(float))
        accepted = []
        for ti, target in enumerate(targets):
            problem = make_problem(start, target)
            seeds = []
            if use_neighbors and ti in previous:
                seeds.append(previous[ti])
            seeds.append(constant_guess(target, start))
            sol = None
            for seed in seeds:
                try:
                    cand = solve_bvp(problem, mesh, seed, tol=tol, validate=validate)
                except ConvergenceError:
                    continue
                if accept(cand, target):
                    sol = cand
                    break
            if sol is None:
                previous.pop(ti, None)
                continue
            previous[ti] = sol.y
            accepted.append((ti, sol, float(welfare(sol))))
        if not accepted:
            log.info("no accepted open-loop path from start %s", start)
            results.append(SweepResult(start, None, None, -math.inf, []))
            continue
        ti, sol, w = max(accepted, key=lambda a: a[2])
        results.append(SweepResult(start, ti, sol, w, [(a[0], a[2]) for a in accepted],
                                   [a[1] for a in accepted]))
    return results
