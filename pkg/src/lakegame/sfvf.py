"""Feedback Nash equilibria by strategy-function / value-function iteration.

Each iteration solves the per-node stationary equation

    ln x - c P^2 - n - f / x + w g - rho V = 0

for the per-agent loading ``x`` (``w`` is the finite-difference sediment
slope of ``V``; zero in one dimension), then rolls the new strategy out
from every node and blends the resulting welfare into ``V``. With ``n=1``
the iteration solves the cooperative (optimal management) problem.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from .base import LakeEstimator
from .model import LakeParams, f_water, g_sediment
from .numerics import Grid1D, Grid2D, PiecewiseBilinear, PiecewiseLinear, fd_partial_M_grid, maximize_scalar
from .steady import closed_loop_steady_1d, closed_loop_steady_2d
from .validation import check_dim, check_states

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SfvfConfig:
    omega: float = 0.5
    xi: float = 0.1
    tol_V: float = 1e-4
    tol_G: float = 1e-4
    max_iter: int = 500
    h: float = 0.1
    T: float = 600.0
    omega_threshold: float = 1e-3
    floor_1d: float = 0.001
    floor_2d: float = 0.01
    value_offset_1d: float = 1.0
    # choice between two node roots: continuation from G^j or deviation rollouts
    selection: str = "side"
    tie_high: bool = True
    # first-step deviations in rollout selection and repair: one agent or all
    deviation: str = "unilateral"
    # loading at nodes without a root: the residual minimizer x = -f, or G^j
    fallback_1d: str = "vertex"
    fallback_2d: str = "vertex"
    # search window for node roots; roots outside it are treated as absent
    x_min: float = 1e-6
    x_max: float = 10.0
    # stop early when the best iterate has not improved for this many iterations (0: never)
    stall_patience: int = 100

    def __post_init__(self):
        if not 0 <= self.omega < 1:
            raise ValueError("omega must lie in [0, 1)")
        if self.h <= 0 or self.T <= 0:
            raise ValueError("rollout step and horizon must be positive")
        if not 0 < self.x_min < self.x_max:
            raise ValueError("root window needs 0 < x_min < x_max")
        if self.stall_patience < 0:
            raise ValueError("stall_patience must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.deviation not in ("unilateral", "symmetric"):
            raise ValueError(f"deviation must be 'unilateral' or 'symmetric', got {self.deviation!r}")
        if self.selection not in ("side", "nearest", "rollout"):
            raise ValueError(f"selection must be 'side', 'nearest' or 'rollout', got {self.selection!r}")
        for name in ("fallback_1d", "fallback_2d"):
            if getattr(self, name) not in ("vertex", "previous"):
                raise ValueError(f"{name} must be 'vertex' or 'previous'")

    @property
    def steps(self) -> int:
        return int(math.floor(self.T / self.h + 1e-9))


@dataclass
class SfvfResult:
    V: np.ndarray
    G: np.ndarray
    grid: object
    params: LakeParams
    converged: bool
    iterations: int
    residual: np.ndarray
    omega_mask: np.ndarray
    history: list = field(default_factory=list)
    no_root_nodes: int = 0
    stalled: bool = False

    @property
    def strategy(self):
        return _interp(self.grid, self.G)

    @property
    def value(self):
        return _interp(self.grid, self.V)


def _interp(grid, values):
    if isinstance(grid, Grid2D):
        return PiecewiseBilinear(grid, values)
    return PiecewiseLinear(grid, values)


# ---------------------------------------------------------------------------
# node equation


def node_residual(x, P, V, params: LakeParams, M, w=0.0):
    """Left-hand side of the node equation at per-agent loading ``x``."""
    f = f_water(P, M, params)
    g = g_sediment(P, M, params)
    return np.log(x) - params.c * P**2 - params.n - f / x + w * g - params.rho * V


def node_roots(P, V, params: LakeParams, M, w=0.0, tol=1e-14, max_iter=200):
    """All positive roots of the node equation, vectorized over nodes.

    In ``y = ln x`` the equation reads ``y - f e^-y = K``. For ``f >= 0``
    the left side is increasing and concave, so there is one root, reached
    monotonically by Newton from the left. For ``f < 0`` it is convex with
    its minimum at ``x = -f``: zero, one or two roots, each reached
    monotonically by Newton from its outer side.

    Returns ``(lo, hi)`` arrays; ``lo`` is NaN where there is no root and
    ``hi`` is NaN where there is at most one.
    """
    P, V, M, w = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (P, V, M, w)))
    f = f_water(P, M, params)
    g = g_sediment(P, M, params)
    K = params.c * P**2 + params.n - w * g + params.rho * V
    lo = np.full(P.shape, np.nan)
    hi = np.full(P.shape, np.nan)

    def newton(y, fv, Kv):
        for _ in range(max_iter):
            e = fv * np.exp(-y)
            y_new = y - (y - e - Kv) / (1.0 + e)
            if np.all(np.abs(y_new - y) <= tol * np.maximum(1.0, np.abs(y))):
                return y_new
            y = y_new
        return y

    pos = f >= 0
    if np.any(pos):
        fp, Kp = f[pos], K[pos]
        y0 = np.where(fp > 0, np.minimum(Kp, np.log(np.where(fp > 0, fp, 1.0))) - 1.0, Kp)
        lo[pos] = np.exp(newton(y0, fp, Kp))
    neg = ~pos
    if np.any(neg):
        a = -f[neg]
        Kn = K[neg]
        la = np.log(a)
        gap = la + 1.0 - Kn
        two = gap < 0
        one = gap == 0
        idx = np.flatnonzero(neg)
        if np.any(one):
            lo[idx[one]] = a[one]
        if np.any(two):
            a2, K2, la2 = a[two], Kn[two], la[two]
            D = np.ones_like(a2)
            for _ in range(12):
                bad = la2 - D + np.exp(D) - K2 <= 0
                if not np.any(bad):
                    break
                D = np.where(bad, 2.0 * D, D)
            with np.errstate(over="ignore", invalid="ignore"):
                y_left = newton(la2 - D, -a2, K2)
            y_right = newton(np.maximum(K2, la2) + 1.0, -a2, K2)
            # a left root below the double range (|f| denormal) is dropped
            gone = ~np.isfinite(y_left) | (np.exp(y_left) == 0.0)
            lo[idx[two]] = np.where(gone, np.exp(y_right), np.exp(y_left))
            hi[idx[two]] = np.where(gone, np.nan, np.exp(y_right))
    return lo, hi


def sign_scan_roots(P, V, params: LakeParams, M, w=0.0, lo=1e-6, hi=10.0, count=1_000_000):
    """Brute-force root brackets of the node equation on a log-spaced scan."""
    x = np.geomspace(lo, hi, count)
    r = node_residual(x, P, V, params, M, w)
    k = np.flatnonzero(np.sign(r[:-1]) != np.sign(r[1:]))
    return [(x[i], x[i + 1]) for i in k]


# ---------------------------------------------------------------------------
# rollouts


def _rollout(grid, G, params: LakeParams, config: SfvfConfig, P0, M0=None, first_x=None, unilateral=False):
    P0 = np.ascontiguousarray(P0, dtype=float)
    fx = np.full(P0.size, np.nan) if first_x is None else np.ascontiguousarray(first_x, dtype=float)
    p = params
    if isinstance(grid, Grid2D):
        M0 = np.ascontiguousarray(M0, dtype=float)
        W, _, _ = _kernels.rollout_2d(P0, M0, fx, grid.p.nodes, grid.m.nodes, np.ascontiguousarray(G),
                                      float(p.n), p.s, p.varsigma, p.eta, p.r, p.q, p.alpha, p.c, p.rho,
                                      config.h, config.steps, unilateral)
    else:
        W, _ = _kernels.rollout_1d(P0, fx, grid.nodes, np.ascontiguousarray(G), float(M0), float(p.n),
                                   p.s, p.varsigma, p.r, p.q, p.alpha, p.c, p.rho, config.h, config.steps,
                                   unilateral)
    return W


def rollout_welfare(grid, G, params: LakeParams, config: SfvfConfig, M=None):
    """Per-agent welfare of symmetric play under ``G`` from every grid node."""
    if isinstance(grid, Grid2D):
        PP, MM = grid.mesh()
        return _rollout(grid, G, params, config, PP.ravel(), MM.ravel()).reshape(grid.shape)
    return _rollout(grid, G, params, config, grid.nodes, M)


# ---------------------------------------------------------------------------
# initial guesses


def _monotone_backward(v, step):
    """Backward pass making ``v`` strictly decreasing along axis 0."""
    out = np.array(v, dtype=float)
    for i in range(out.shape[0] - 1, 0, -1):
        bump = out[i] >= out[i - 1]
        out[i - 1] = np.where(bump, out[i] + step, out[i - 1])
    return out


def _fd_loading(vt, step):
    """Per-agent loading ``-1 / V_P`` from the three-case stencil along axis 0."""
    d = np.empty_like(vt)
    d[0] = (vt[1] - vt[0]) / step
    d[-1] = (vt[-1] - vt[-2]) / step
    d[1:-1] = (vt[2:] - vt[:-2]) / (2 * step)
    return -1.0 / d


def initial_guess_1d(grid: Grid1D, params: LakeParams, M: float, config: SfvfConfig = SfvfConfig()):
    """Stationary-value guess, monotonized, differentiated into ``G0``; ``V0`` from rollouts."""
    P = grid.nodes
    v0 = (np.log(np.maximum(-f_water(P, M, params) / params.n, config.floor_1d)) - params.c * P**2) / params.rho
    vt = _monotone_backward(v0, config.xi * grid.step)
    G0 = _fd_loading(vt, grid.step)
    V0 = rollout_welfare(grid, G0, params, config, M) + config.value_offset_1d
    return V0, G0


def initial_guess_2d(grid: Grid2D, params: LakeParams, config: SfvfConfig = SfvfConfig()):
    """Two-state analogue of :func:`initial_guess_1d`.

    The stationary guess is monotonized along ``P`` in every column, then
    along ``M`` in every row, then along ``P`` again so the loading stencil
    stays positive. ``V0`` is the rollout welfare shifted by ``-max(v)/2``.
    """
    PP, MM = grid.mesh()
    v0 = (np.log(np.maximum(-f_water(PP, MM, params) / params.n, config.floor_2d)) - params.c * PP**2) / params.rho
    step_p = config.xi * grid.p.step
    vt = _monotone_backward(v0, step_p)
    vt = _monotone_backward(vt.T, config.xi * grid.m.step).T
    vt = _monotone_backward(vt, step_p)
    G0 = _fd_loading(vt, grid.p.step)
    v = rollout_welfare(grid, G0, params, config)
    return v - v.max() / 2.0, G0


# ---------------------------------------------------------------------------
# iteration steps


def _window(lo, hi, config):
    """Drop roots outside ``[x_min, x_max]``, keeping ``lo`` the smaller survivor."""
    inside = lambda x: (x >= config.x_min) & (x <= config.x_max)
    lo_ok, hi_ok = inside(lo), inside(hi)
    new_lo = np.where(lo_ok, lo, np.where(hi_ok, hi, np.nan))
    new_hi = np.where(lo_ok & hi_ok, hi, np.nan)
    return new_lo, new_hi


def step2_nodes(grid, V, G_prev, params: LakeParams, config: SfvfConfig, M=None):
    """New per-agent loadings at every node plus the no-root mask."""
    if isinstance(grid, Grid2D):
        PP, MM = grid.mesh()
        w = fd_partial_M_grid(V, grid.m.step)
        lo, hi = _window(*node_roots(PP.ravel(), V.ravel(), params, MM.ravel(), w.ravel()), config)
        x = _select(grid, G_prev, params, config, lo, hi, PP.ravel(), MM.ravel(), G_prev.ravel())
        none = ~np.isfinite(x)
        x = np.where(none, _fallback(config.fallback_2d, G_prev.ravel(), PP.ravel(), MM.ravel(), params), x)
        return x.reshape(grid.shape), none.reshape(grid.shape)
    P = grid.nodes
    lo, hi = _window(*node_roots(P, V, params, M), config)
    x = _select(grid, G_prev, params, config, lo, hi, P, M, G_prev)
    none = ~np.isfinite(x)
    return np.where(none, _fallback(config.fallback_1d, G_prev, P, M, params), x), none


def _fallback(kind, G_prev, P, M, params):
    # roots are missing only where f < 0; the residual is smallest at x = -f
    if kind == "vertex":
        return np.maximum(-f_water(P, M, params), _kernels.LOAD_FLOOR)
    return G_prev


def _select(grid, G_prev, params, config, lo, hi, P, M, current):
    """Pick one root per node where there are two.

    ``'nearest'`` keeps the root closest in ``ln x`` to the current loading
    ``current``; ``'rollout'`` compares first-step deviation rollouts under
    ``G_prev``. Ties go to the smaller root.
    """
    x = lo.copy()
    two = np.flatnonzero(np.isfinite(hi))
    if not two.size:
        return x
    if config.selection == "side":
        vertex = -f_water(P[two], M if np.ndim(M) == 0 else M[two], params)
        take_hi = current[two] > vertex if not config.tie_high else current[two] >= vertex
    elif config.selection == "nearest":
        c = np.log(np.maximum(current[two], _kernels.LOAD_FLOOR))
        take_hi = np.abs(np.log(hi[two]) - c) < np.abs(np.log(lo[two]) - c)
    else:
        cand = np.concatenate([lo[two], hi[two]])
        Ps = np.concatenate([P[two], P[two]])
        Ms = M if np.ndim(M) == 0 else np.concatenate([M[two], M[two]])
        W = _rollout(grid, G_prev, params, config, Ps, Ms, cand, config.deviation == "unilateral")
        take_hi = W[two.size:] > W[: two.size]
    x[two] = np.where(take_hi, hi[two], lo[two])
    return x


def step2_node_1d(P, V_node, G_prev, grid: Grid1D, params: LakeParams, M: float, config: SfvfConfig = SfvfConfig()):
    """Selected loading at one node; ``(x, found)``. Falls back to ``G_prev`` at the node."""
    lo, hi = _window(*node_roots(np.array([P]), np.array([V_node]), params, M), config)
    current = PiecewiseLinear(grid, G_prev)(np.array([P]))
    x = _select(grid, G_prev, params, config, lo, hi, np.array([P]), M, current)[0]
    if not np.isfinite(x):
        return float(current[0]), False
    return float(x), True


def step2_node_2d(P, M, V_node, w, G_prev, grid: Grid2D, params: LakeParams, config: SfvfConfig = SfvfConfig()):
    """Two-state analogue of :func:`step2_node_1d` with sediment slope ``w``."""
    lo, hi = _window(*node_roots(np.array([P]), np.array([V_node]), params, np.array([M]), np.array([w])), config)
    current = np.atleast_1d(PiecewiseBilinear(grid, G_prev)(P, M))
    x = _select(grid, G_prev, params, config, lo, hi, np.array([P]), np.array([M]), current)[0]
    if not np.isfinite(x):
        return float(current[0]), False
    return float(x), True


def step3_value_update(G_new, V, grid, params: LakeParams, config: SfvfConfig, M=None):
    """Damped blend of the old values with the rollout welfare under ``G_new``."""
    v = rollout_welfare(grid, G_new, params, config, M)
    return config.omega * V + (1.0 - config.omega) * v


def converged_residual(V, G, grid, params: LakeParams, M=None):
    """Node-equation residual of a (V, G) pair at every node."""
    if isinstance(grid, Grid2D):
        PP, MM = grid.mesh()
        w = fd_partial_M_grid(V, grid.m.step)
        return node_residual(G, PP, V, params, MM, w)
    return node_residual(G, grid.nodes, V, params, M)


def run_sfvf(params: LakeParams, grid, config: SfvfConfig = SfvfConfig(), M=None, V0=None, G0=None,
             refine=True):
    """Iterate to a fixed point of (V, G).

    One-dimensional grids need the constant sediment level ``M``. After the
    iteration, nodes whose residual exceeds ``config.omega_threshold`` form
    the flagged set; on two-dimensional grids they are repaired by
    :func:`skiba_refine_2d` when ``refine`` is set.
    """
    two_d = isinstance(grid, Grid2D)
    if not two_d and M is None:
        raise ValueError("one-dimensional runs need a constant sediment level M")
    if V0 is None or G0 is None:
        V, G = initial_guess_2d(grid, params, config) if two_d else initial_guess_1d(grid, params, M, config)
    else:
        V, G = np.array(V0, dtype=float), np.array(G0, dtype=float)
        if V.shape != G.shape or not (np.all(np.isfinite(V)) and np.all(np.isfinite(G))):
            raise ValueError("initial values and loadings must be finite arrays of the grid shape")
    history = []
    converged = False
    stalled = False
    no_root = 0
    it = 0
    best = (math.inf, 0, V, G, 0)
    for it in range(1, config.max_iter + 1):
        G_new, none = step2_nodes(grid, V, G, params, config, M)
        V_new = step3_value_update(G_new, V, grid, params, config, M)
        dV = float(np.max(np.abs(V_new - V)))
        dG = float(np.max(np.abs(G_new - G)))
        no_root = int(np.count_nonzero(none))
        history.append((it, dV, dG, no_root))
        log.debug("sfvf iteration %d: dV=%.3e dG=%.3e no-root=%d", it, dV, dG, no_root)
        V, G = V_new, G_new
        if dV < config.tol_V and dG < config.tol_G:
            converged = True
            break
        score = max(dV / config.tol_V, dG / config.tol_G)
        if score < best[0]:
            best = (score, it, V, G, no_root)
        elif config.stall_patience and it - best[1] >= config.stall_patience:
            stalled = True
            break
    if not converged:
        _, best_it, V, G, no_root = best
        log.warning("sfvf did not converge in %d iterations%s; keeping iterate %d (dV=%.3e, dG=%.3e)",
                    it, " (stalled)" if stalled else "", best_it, history[best_it - 1][1],
                    history[best_it - 1][2])
    res = converged_residual(V, G, grid, params, M)
    mask = ~(np.abs(res) <= config.omega_threshold)
    log.info("sfvf finished after %d iterations; %d flagged nodes", it, int(mask.sum()))
    result = SfvfResult(V, G, grid, params, converged, it, res, mask, history, no_root, stalled)
    if two_d and refine and mask.any():
        result.G = skiba_refine_2d(result, config)
        result.residual = converged_residual(result.V, result.G, grid, params)
    return result


def _refine_order(mask: np.ndarray, M_nodes: np.ndarray):
    """Flagged nodes ordered by graph distance to the unflagged set, then by ``M``."""
    from scipy.ndimage import distance_transform_cdt

    dist = distance_transform_cdt(mask, metric="taxicab")
    idx = np.argwhere(mask)
    key = np.lexsort((M_nodes[idx[:, 1]], dist[mask]))
    return [tuple(idx[k]) for k in key]


def skiba_refine_2d(result: SfvfResult, config: SfvfConfig = SfvfConfig(), x_max: float | None = None):
    """Re-optimize the first-step loading at every flagged node.

    Later loadings follow the current strategy, which already includes the
    nodes refined before; the objective is the rollout welfare.
    """
    grid, params = result.grid, result.params
    G = np.array(result.G, dtype=float)
    if not result.omega_mask.any():
        return G
    Ps, Ms = grid.p.nodes, grid.m.nodes
    hi = x_max if x_max is not None else max(2.0, 2.0 * float(np.max(G)))
    for i1, i2 in _refine_order(result.omega_mask, Ms):
        P0, M0 = Ps[i1], Ms[i2]

        def objective(x, P0=P0, M0=M0):
            x = np.atleast_1d(x)
            return _rollout(grid, G, params, config, np.full(x.size, P0), np.full(x.size, M0), x,
                            config.deviation == "unilateral")

        before = objective(G[i1, i2])[0]
        xb, wb = maximize_scalar(objective, 1e-6, hi, tol=1e-7, vectorized=True)
        if wb >= before:
            G[i1, i2] = xb
    return G


# ---------------------------------------------------------------------------
# estimators


class FeedbackNashSolver(LakeEstimator):
    """Feedback Nash equilibrium of the symmetric ``n``-agent lake game.

    ``fit`` runs the SFVF iteration on a 601-node grid of ``[0, 6]`` (1-D,
    constant sediment ``M``) or a 101 x 101 grid of ``[0, 6] x [150, 200]``
    (2-D). ``predict`` gives the total loading ``n G`` and ``value`` the
    per-agent welfare, both interpolated from the node values. ``init``
    optionally warm-starts the iteration from a ``(V0, G0)`` pair.
    """

    def __init__(self, n=2, dim="1d", M=179.0, rho=0.043, c=0.1736, alpha=2.0, lake=None,
                 grid=None, omega=0.5, xi=0.1, tol=1e-4, max_iter=500, h=0.1, T=600.0,
                 omega_threshold=1e-3, refine=True, init=None):
        self.n = n
        self.dim = dim
        self.M = M
        self.rho = rho
        self.c = c
        self.alpha = alpha
        self.lake = lake
        self.grid = grid
        self.omega = omega
        self.xi = xi
        self.tol = tol
        self.max_iter = max_iter
        self.h = h
        self.T = T
        self.omega_threshold = omega_threshold
        self.refine = refine
        self.init = init

    def config(self) -> SfvfConfig:
        return SfvfConfig(omega=self.omega, xi=self.xi, tol_V=self.tol, tol_G=self.tol, max_iter=self.max_iter,
                          h=self.h, T=self.T, omega_threshold=self.omega_threshold)

    def _grid(self):
        if self.grid is not None:
            return self.grid
        return Grid1D() if self.dim == "1d" else Grid2D()

    def fit(self, X=None, y=None):
        """Run the iteration. ``X`` is accepted for API symmetry and ignored."""
        check_dim(self.dim, self.M)
        grid = self._grid()
        if (self.dim == "2d") != isinstance(grid, Grid2D):
            raise ValueError("grid type does not match dim")
        self.params_ = self.lake_params()
        M = self.M if self.dim == "1d" else None
        V0, G0 = self._initial(grid)
        self.result_ = run_sfvf(self.params_, grid, self.config(), M=M, V0=V0, G0=G0, refine=self.refine)
        self.grid_ = grid
        self.strategy_ = self.result_.strategy
        self.value_ = self.result_.value
        self.converged_ = self.result_.converged
        self.n_iter_ = self.result_.iterations
        return self

    def _initial(self, grid):
        if self.init is None:
            return None, None
        if isinstance(self.init, str):
            raise ValueError(f"unknown init {self.init!r}; pass None or a (V0, G0) pair")
        return self.init

    def predict(self, X):
        """Total loading ``n G`` at the given states."""
        check_is_fitted(self, "result_")
        X = check_states(X, self.dim)
        if self.dim == "1d":
            return self.params_.n * self.strategy_(X)
        return self.params_.n * self.strategy_(X[:, 0], X[:, 1])

    def value(self, X):
        """Per-agent welfare at the given states."""
        check_is_fitted(self, "result_")
        X = check_states(X, self.dim)
        if self.dim == "1d":
            return self.value_(X)
        return self.value_(X[:, 0], X[:, 1])

    def steady_states(self):
        """Closed-loop steady states, ordered by ``P``."""
        check_is_fitted(self, "result_")
        if self.dim == "1d":
            return closed_loop_steady_1d(self.strategy_, self.M, self.params_, value=self.value_)
        return closed_loop_steady_2d(self.strategy_, self.params_, value=self.value_)[0]

    def simulate(self, S0, T=None, h=None):
        """Forward-Euler closed-loop path from ``S0`` under the fitted strategy.

        ``T`` and ``h`` default to the rollout horizon and step.
        """
        from .numerics import euler_simulate
        from .model import utility

        check_is_fitted(self, "result_")
        p = self.params_
        n = p.n
        T = self.T if T is None else T
        h = self.h if h is None else h
        if self.dim == "1d":
            M = self.M
            rate = lambda S, x: n * x + f_water(S, M, p)
            strat = lambda S: self.strategy_(S)
            util = lambda x, S: utility(max(x, _kernels.LOAD_FLOOR), float(S), p)
        else:
            rate = lambda S, x: np.array([n * x + f_water(S[0], S[1], p), g_sediment(S[0], S[1], p)])
            strat = lambda S: self.strategy_(S[0], S[1])
            util = lambda x, S: utility(max(x, _kernels.LOAD_FLOOR), float(S[0]), p)
        return euler_simulate(rate, strat, S0, h, T, util)


class CooperativeSolver(FeedbackNashSolver):
    """Cooperative solution: the single-agent problem in the total loading.

    ``value`` is the welfare of the whole community; ``individual_value``
    splits it among ``n_agents`` symmetric agents, subtracting
    ``ln(n_agents) / rho`` for the logarithmic utility.

    With one decision maker the open-loop optimum is also the feedback
    optimum, so ``init="open-loop"`` (the default) seeds the iteration with
    the open-loop sweep interpolated to the grid. ``init=None`` uses the
    stationary-value guess instead.
    """

    def __init__(self, n_agents=2, dim="1d", M=179.0, rho=0.043, c=0.1736, alpha=2.0, lake=None,
                 grid=None, omega=0.5, xi=0.1, tol=1e-4, max_iter=500, h=0.1, T=600.0,
                 omega_threshold=1e-3, refine=True, init="open-loop"):
        super().__init__(n=1, dim=dim, M=M, rho=rho, c=c, alpha=alpha, lake=lake, grid=grid, omega=omega,
                         xi=xi, tol=tol, max_iter=max_iter, h=h, T=T, omega_threshold=omega_threshold,
                         refine=refine, init=init)
        self.n_agents = n_agents

    def _initial(self, grid):
        if not (isinstance(self.init, str) and self.init == "open-loop"):
            return super()._initial(grid)
        from .olne import OpenLoopNashSolver

        lake = self.lake_params()
        if self.dim == "1d":
            seed = OpenLoopNashSolver(n=1, M=self.M, rho=self.rho, c=self.c, alpha=self.alpha, lake=lake,
                                      p_range=(grid.lo, grid.hi)).fit()
            X = grid.nodes
        else:
            seed = OpenLoopNashSolver(n=1, dim="2d", rho=self.rho, c=self.c, alpha=self.alpha, lake=lake,
                                      p_range=(grid.p.lo, grid.p.hi), m_range=(grid.m.lo, grid.m.hi)).fit()
            X = np.column_stack([a.ravel() for a in grid.mesh()])
        shape = grid.shape if self.dim == "2d" else (grid.count,)
        V0, G0 = seed.value(X).reshape(shape), seed.predict(X).reshape(shape)
        bad = ~(np.isfinite(V0) & np.isfinite(G0) & (G0 > 0))
        if bad.all():
            log.warning("open-loop seed failed everywhere; using the stationary-value guess")
            return None, None
        if bad.any():
            # nodes next to failed starts take the nearest usable seed value
            from scipy.ndimage import distance_transform_edt

            log.info("open-loop seed: filling %d nodes from neighbours", int(bad.sum()))
            idx = distance_transform_edt(bad, return_distances=False, return_indices=True)
            V0, G0 = V0[tuple(idx)], G0[tuple(idx)]
        return V0, G0

    def individual_value(self, X):
        return self.value(X) - math.log(self.n_agents) / self.rho
