"""Compiled batched rollouts used in the hot loops of SFVF iteration.

Each kernel integrates many symmetric-play lake trajectories with forward
Euler and returns the trapezoid welfare (with the stationary tail closed as
in :func:`lakegame.numerics.discounted_integral`). Strategies are evaluated
by piecewise-linear / bilinear interpolation with the query clamped to the
grid hull; loadings are floored at ``LOAD_FLOOR`` for the utility only.
"""
import math

import numpy as np
from numba import njit

LOAD_FLOOR = 1e-10
# a path whose state moves less than this in one step is treated as settled
SETTLE_TOL = 1e-12


@njit(cache=True, inline="always")
def _settled_tail(w, decay, k, steps):
    """Trapezoid weight of samples ``k+1..steps`` relative to ``w = decay**k``."""
    m = steps - k
    if m <= 0:
        return 0.0
    full = w * decay * (1.0 - decay ** (m - 1)) / (1.0 - decay)
    return full + 0.5 * w * decay**m


@njit(cache=True, inline="always")
def _recycle(P, q, alpha):
    if alpha == 2.0:
        Pa = P * P
        return Pa / (Pa + q * q)
    Pa = P ** alpha
    return Pa / (Pa + q ** alpha)


@njit(cache=True, inline="always")
def _locate(x0, inv_dx, n, x):
    # x is already clamped to the hull, so truncation is the floor
    fx = (x - x0) * inv_dx
    i = int(fx)
    if i > n - 2:
        i = n - 2
    return i, fx - i


@njit(cache=True, error_model="numpy")
def rollout_1d(P0, first_x, nodes, G, M, n, s, vs, r, q, alpha, c, rho, h, steps, unilateral=False):
    """Welfare and terminal state of 1-D rollouts started at ``P0``.

    ``first_x[k]``, when not NaN, replaces the per-agent loading of the first
    step of rollout ``k``. With ``unilateral`` only the deviating agent plays
    it (the others follow ``G``) and its utility gets the full step weight,
    so the welfare is the one-step Bellman value ``h u(x) + e^-rho h W(P(h))``
    up to the trapezoid closure of the continuation.
    """
    N = nodes.size
    x0 = nodes[0]
    xN = nodes[N - 1]
    inv_dx = (N - 1) / (xN - x0)
    out = np.empty(P0.size)
    P_end = np.empty(P0.size)
    decay = math.exp(-rho * h)
    for b in range(P0.size):
        P = P0[b]
        w = 1.0
        acc = 0.0
        u = 0.0
        for k in range(steps + 1):
            Pc = min(max(P, x0), xN)
            i, t = _locate(x0, inv_dx, N, Pc)
            x = (1.0 - t) * G[i] + t * G[i + 1]
            total = n * x
            half = 0.5
            if k == 0 and not math.isnan(first_x[b]):
                if unilateral:
                    total = first_x[b] + (n - 1.0) * x
                    half = 1.0
                else:
                    total = n * first_x[b]
                x = first_x[b]
            u = math.log(max(x, LOAD_FLOOR)) - c * P * P
            if k == 0 or k == steps:
                acc += half * w * u
            else:
                acc += w * u
            if k < steps:
                P_new = P + (total - (s + vs) * P + r * M * _recycle(P, q, alpha)) * h
                if P_new < 0.0:
                    P_new = 0.0
                if k > 0 and abs(P_new - P) < SETTLE_TOL:
                    acc += u * _settled_tail(w, decay, k, steps)
                    P = P_new
                    break
                P = P_new
                w *= decay
        out[b] = h * acc + u * math.exp(-rho * h * steps) / rho
        P_end[b] = P
    return out, P_end


@njit(cache=True, error_model="numpy")
def rollout_2d(P0, M0, first_x, pnodes, mnodes, G, n, s, vs, eta, r, q, alpha, c, rho, h, steps,
               unilateral=False):
    """Two-state analogue of :func:`rollout_1d`; ``G`` has shape ``(N1, N2)``."""
    N1 = pnodes.size
    N2 = mnodes.size
    p0 = pnodes[0]
    pN = pnodes[N1 - 1]
    m0 = mnodes[0]
    mN = mnodes[N2 - 1]
    inv_dp = (N1 - 1) / (pN - p0)
    inv_dm = (N2 - 1) / (mN - m0)
    out = np.empty(P0.size)
    P_end = np.empty(P0.size)
    M_end = np.empty(P0.size)
    decay = math.exp(-rho * h)
    for b in range(P0.size):
        P = P0[b]
        M = M0[b]
        w = 1.0
        acc = 0.0
        u = 0.0
        for k in range(steps + 1):
            Pc = min(max(P, p0), pN)
            Mc = min(max(M, m0), mN)
            i, a = _locate(p0, inv_dp, N1, Pc)
            j, e = _locate(m0, inv_dm, N2, Mc)
            x = ((1.0 - a) * (1.0 - e) * G[i, j] + a * (1.0 - e) * G[i + 1, j]
                 + (1.0 - a) * e * G[i, j + 1] + a * e * G[i + 1, j + 1])
            total = n * x
            half = 0.5
            if k == 0 and not math.isnan(first_x[b]):
                if unilateral:
                    total = first_x[b] + (n - 1.0) * x
                    half = 1.0
                else:
                    total = n * first_x[b]
                x = first_x[b]
            u = math.log(max(x, LOAD_FLOOR)) - c * P * P
            if k == 0 or k == steps:
                acc += half * w * u
            else:
                acc += w * u
            if k < steps:
                rec = r * M * _recycle(P, q, alpha)
                dP = total - (s + vs) * P + rec
                dM = s * P - eta * M - rec
                P_new = max(P + dP * h, 0.0)
                M_new = max(M + dM * h, 0.0)
                if k > 0 and abs(P_new - P) < SETTLE_TOL and abs(M_new - M) < SETTLE_TOL:
                    acc += u * _settled_tail(w, decay, k, steps)
                    P, M = P_new, M_new
                    break
                P, M = P_new, M_new
                w *= decay
        out[b] = h * acc + u * math.exp(-rho * h * steps) / rho
        P_end[b] = P
        M_end[b] = M
    return out, P_end, M_end
