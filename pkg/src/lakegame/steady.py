"""Steady states of the lake game.

Open-loop steady states are roots of the stationary Hamiltonian system
(solved algebraically). Feedback steady states are read off a converged
strategy as zeros of the closed-loop drift.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .model import LakeParams, f_water, g_sediment, partials
from .numerics import ConvergenceError, numerical_jacobian, solve_system

# Reported unstable Skiba/irreversibility point; labels only.
REGIME_THRESHOLD = 1.48


@dataclass
class SteadyState:
    state: tuple
    L_total: float
    stable: bool
    welfare: float
    costates: tuple = ()
    regime: str = ""
    residual: float = 0.0
    eigenvalues: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.regime:
            self.regime = classify_regime(self.state[0], self.stable)

    @property
    def P(self) -> float:
        return self.state[0]

    @property
    def M(self) -> float | None:
        return self.state[1] if len(self.state) > 1 else None


def classify_regime(P: float, stable: bool = True) -> str:
    if not stable:
        return "intermediate"
    return "oligotrophic" if P < REGIME_THRESHOLD else "eutrophic"


def stationary_welfare(L_total, P, params: LakeParams) -> float:
    """Per-agent value of staying forever at ``P`` with total loading ``L_total``."""
    return (math.log(L_total / params.n) - params.c * P * P) / params.rho


# ---------------------------------------------------------------------------
# open-loop Hamiltonian systems in physical time


def olne_rate_1d(P, L, M, params: LakeParams):
    """``(dP/dt, dL/dt)`` of the open-loop system with constant sediment ``M``."""
    f = f_water(P, M, params)
    f_P = partials(P, M, params)[0]
    return np.array([L + f, (f_P - params.rho) * L + 2.0 * params.c * P / params.n * L * L])


def olne_rate_2d(P, M, L, mu, params: LakeParams):
    """``(dP, dM, dL, dmu)/dt`` of the open-loop system with sediment dynamics."""
    f = f_water(P, M, params)
    g = g_sediment(P, M, params)
    f_P, f_M, g_P, g_M = partials(P, M, params)
    dL = (f_P - params.rho) * L + (2.0 * params.c * P / params.n - mu * g_P) * L * L
    dmu = (params.rho - g_M) * mu + f_M / L
    return np.array([L + f, g, dL, dmu])


def stationary_mu(P, M, L, params: LakeParams):
    f_M, g_M = partials(P, M, params)[1::2]
    return -f_M / (L * (params.rho - g_M))


def _saddle_stable(J, n_states):
    eig = np.linalg.eigvals(J)
    return int(np.sum(eig.real < 0)) == n_states, eig


def _merge(records, key, tol=1e-6):
    out = []
    for rec in sorted(records, key=key):
        if out and np.all(np.abs(np.array(key(rec)) - np.array(key(out[-1]))) <= tol * (1 + np.abs(key(rec)))):
            continue
        out.append(rec)
    return out


def olne_steady_1d(params: LakeParams, M: float, p_max: float = 6.0, starts: int = 40):
    """All roots of the stationary open-loop system with ``P in (0, p_max]``.

    Stability is saddle-point stability of the Hamiltonian system: exactly one
    eigenvalue of its Jacobian with negative real part. Roots with
    nonpositive loading are kept as infeasible records (unstable, welfare
    ``-inf``) so the root count is complete.
    """
    rho, c, n = params.rho, params.c, params.n

    def residual(z):
        P, L = z
        f = f_water(P, M, params)
        f_P = partials(P, M, params)[0]
        return np.array([L + f, f_P - rho + 2.0 * c * P / n * L])

    roots = []
    for P0 in np.linspace(p_max / starts, p_max, starts):
        L0 = max(-float(f_water(P0, M, params)), 0.05)
        try:
            z = solve_system(residual, [P0, L0], tol=1e-12)
        except ConvergenceError:
            continue
        P, L = z
        if 0 < P <= p_max:
            roots.append(z)
    roots = _merge(roots, key=lambda z: tuple(z))
    if not roots:
        raise RuntimeError(f"no open-loop steady state found for n={n}, M={M}")
    out = []
    for P, L in roots:
        rate = lambda z: olne_rate_1d(z[0], z[1], M, params)
        stable, eig = _saddle_stable(numerical_jacobian(rate, np.array([P, L])), 1)
        res = float(np.max(np.abs(olne_rate_1d(P, L, M, params))))
        feasible = L > 0
        out.append(SteadyState(state=(float(P),), L_total=float(L), stable=bool(stable and feasible),
                               welfare=stationary_welfare(L, P, params) if feasible else -math.inf,
                               costates=(-n / L,), residual=res, eigenvalues=eig))
    return out


def olne_steady_2d(params: LakeParams, p_range=(0.0, 6.0), m_range=(100.0, 300.0), starts=(12, 8)):
    """All open-loop steady states of the two-state system.

    The sediment costate is eliminated through its stationarity condition,
    leaving ``(P, M, L)``; each record carries the recovered ``mu``.
    """
    rho, c, n = params.rho, params.c, params.n

    def residual(z):
        P, M, L = z
        f = f_water(P, M, params)
        g = g_sediment(P, M, params)
        f_P, f_M, g_P, g_M = partials(P, M, params)
        mu = -f_M / (L * (rho - g_M))
        return np.array([L + f, g, (f_P - rho) + (2.0 * c * P / n - mu * g_P) * L])

    roots = []
    Ps = np.linspace(p_range[0], p_range[1], starts[0] + 1)[1:]
    Ms = np.linspace(m_range[0], m_range[1], starts[1] + 1)[1:]
    for P0 in Ps:
        for M0 in Ms:
            L0 = max(-float(f_water(P0, M0, params)), 0.05)
            try:
                z = solve_system(residual, [P0, M0, L0], tol=1e-12)
            except ConvergenceError:
                continue
            P, M, L = z
            if p_range[0] < P <= p_range[1] and m_range[0] < M <= m_range[1] and L > 0:
                roots.append(z)
    roots = _merge(roots, key=lambda z: tuple(z))
    out = []
    for P, M, L in roots:
        mu = float(stationary_mu(P, M, L, params))
        z = np.array([P, M, L, mu])
        rate = lambda y: olne_rate_2d(*y, params)
        stable, eig = _saddle_stable(numerical_jacobian(rate, z, rel_step=1e-8), 2)
        res = float(np.max(np.abs(olne_rate_2d(P, M, L, mu, params))))
        out.append(SteadyState(state=(float(P), float(M)), L_total=float(L), stable=stable,
                               welfare=stationary_welfare(L, P, params),
                               costates=(-n / L, mu), residual=res, eigenvalues=eig))
    return out


# ---------------------------------------------------------------------------
# closed-loop steady states of a strategy


def closed_loop_steady_1d(strategy, M: float, params: LakeParams, value=None, nodes=None):
    """Zeros of ``n G(P) + f(P)`` on the strategy's grid.

    Sign changes between neighbouring nodes are refined by bisection on the
    interpolated drift. A ``+ -> -`` crossing is stable.
    ``strategy`` is a per-agent loading function with a ``grid`` attribute.
    """
    n = params.n
    if nodes is None:
        nodes = strategy.grid.nodes
    drift = lambda P: n * strategy(P) + f_water(P, M, params)
    D = drift(nodes)
    out = []
    for k in range(nodes.size - 1):
        a, b = nodes[k], nodes[k + 1]
        if D[k] == 0.0:
            if k > 0 and D[k - 1] == 0.0:
                continue
            P = a
            stable = bool(k > 0 and D[k - 1] > 0 and D[k + 1] < 0)
        elif D[k] * D[k + 1] < 0:
            P = brentq(drift, a, b, xtol=1e-12)
            stable = bool(D[k] > 0)
        else:
            continue
        L = float(n * strategy(P))
        welfare = float(value(P)) if value is not None else (
            stationary_welfare(L, P, params) if L > 0 else -math.inf)
        out.append(SteadyState(state=(float(P),), L_total=L, stable=stable, welfare=welfare,
                               residual=abs(float(drift(P)))))
    return out


def leftmost_isocline_P(strategy, M: float, params: LakeParams, nodes=None):
    """Smallest ``P`` where the closed-loop P-drift changes sign at fixed ``M``."""
    n = params.n
    if nodes is None:
        nodes = strategy.grid.p.nodes
    drift = lambda P: n * strategy(P, M) + f_water(P, M, params)
    D = drift(nodes)
    idx = np.nonzero(np.sign(D[:-1]) != np.sign(D[1:]))[0]
    if idx.size == 0:
        return None
    k = idx[0]
    if D[k] == 0.0:
        return float(nodes[k])
    return float(brentq(drift, nodes[k], nodes[k + 1], xtol=1e-12))


def closed_loop_steady_2d(strategy, params: LakeParams, value=None):
    """Intersections of the leftmost ``dP/dt = 0`` isocline with ``dM/dt = 0``.

    The isocline is located by bisection in ``P`` for each ``M``; the
    intersection by bisection in ``M`` on ``g(P_iso(M), M)``.
    """
    grid = strategy.grid
    Ms = grid.m.nodes
    iso = np.array([leftmost_isocline_P(strategy, M, params) or np.nan for M in Ms])

    def h(M):
        P = leftmost_isocline_P(strategy, M, params)
        return np.nan if P is None else float(g_sediment(P, M, params))

    H = np.array([h(M) for M in Ms])
    out = []
    for k in range(Ms.size - 1):
        if not (np.isfinite(H[k]) and np.isfinite(H[k + 1])):
            continue
        if H[k] == 0.0 or H[k] * H[k + 1] < 0:
            if H[k] == 0.0:
                M = Ms[k]
            else:
                a, b = Ms[k], Ms[k + 1]
                ha = H[k]
                for _ in range(60):
                    mid = 0.5 * (a + b)
                    hm = h(mid)
                    if not np.isfinite(hm):
                        break
                    if hm * ha <= 0:
                        b = mid
                    else:
                        a, ha = mid, hm
                M = 0.5 * (a + b)
            P = leftmost_isocline_P(strategy, M, params)
            L = float(params.n * strategy(P, M))
            # below the g=0 isocline M rises, above it falls
            stable = bool(H[k] > 0 and H[k + 1] <= 0) if H[k] != 0.0 else True
            welfare = float(value(P, M)) if value is not None else stationary_welfare(L, P, params)
            res = abs(float(params.n * strategy(P, M) + f_water(P, M, params)))
            out.append(SteadyState(state=(P, float(M)), L_total=L, stable=stable, welfare=welfare,
                                   residual=max(res, abs(float(g_sediment(P, M, params))))))
    return out, iso
