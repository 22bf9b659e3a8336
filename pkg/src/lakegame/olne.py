"""Open-loop Nash equilibria via compactified-time boundary value problems."""
from __future__ import annotations

import logging
import math

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .base import LakeEstimator
from .bvp import BvpProblem, compactify, solve_bvp, sweep, tau_transform
from .model import LakeParams, f_water, g_sediment, partials
from .numerics import ConvergenceError, Grid1D, Grid2D, PiecewiseBilinear, PiecewiseLinear, discounted_integral
from .steady import SteadyState, olne_rate_1d, olne_rate_2d, olne_steady_1d, olne_steady_2d
from .validation import check_dim, check_states

log = logging.getLogger(__name__)


def _positive_loading(Y):
    return bool(np.all(Y[2 if Y.shape[0] == 4 else 1] > 0))


def assemble_olne_1d(P0: float, L_ss: float, M: float, params: LakeParams, lam: float = 0.05,
                     tau_end: float = 0.995) -> BvpProblem:
    """``(P, L)`` system in ``tau`` with ``P(0) = P0`` and ``L(tau_end) = L_ss``."""
    rate = lambda Y: olne_rate_1d(Y[0], Y[1], M, params)
    return BvpProblem(compactify(rate, lam), 2, {0: float(P0)}, {1: float(L_ss)}, tau_end, lam)


def assemble_olne_2d(P0: float, M0: float, L_ss: float, mu_ss: float, params: LakeParams,
                     lam: float = 0.003, tau_end: float = 0.99) -> BvpProblem:
    """``(P, M, L, mu)`` system in ``tau``; states pinned at 0, ``(L, mu)`` at ``tau_end``."""
    rate = lambda Y: olne_rate_2d(Y[0], Y[1], Y[2], Y[3], params)
    return BvpProblem(compactify(rate, lam), 4, {0: float(P0), 1: float(M0)},
                      {2: float(L_ss), 3: float(mu_ss)}, tau_end, lam)


def path_welfare(solution, params: LakeParams, h: float = 0.02) -> float:
    """Per-agent discounted welfare along a compactified-time solution.

    The path is resampled on a uniform physical-time grid up to the
    terminal mesh point; the tail is closed with the terminal utility.
    """
    T = float(solution.t(solution.mesh[-1]))
    steps = int(math.floor(T / h))
    t = h * np.arange(steps + 1)
    Y = solution.at_time(t)
    L = Y[2] if Y.shape[0] == 4 else Y[1]
    L = np.maximum(L, 1e-10)
    u = np.log(L / params.n) - params.c * Y[0] ** 2
    return discounted_integral(u, params.rho, h, T=steps * h)


def replay_welfare(solution, params: LakeParams, h: float = 0.01, M: float | None = None) -> float:
    """Welfare of the open-loop loading replayed through forward Euler.

    Only the loading is taken from the solution; the state is re-simulated
    from the initial point (``M`` fixes the sediment for 1-D solutions).
    """
    T = float(solution.t(solution.mesh[-1]))
    steps = int(math.floor(T / h))
    t = h * np.arange(steps + 1)
    Y = solution.at_time(t)
    two_d = Y.shape[0] == 4
    L = np.maximum(Y[2] if two_d else Y[1], 1e-10)
    P = np.empty(steps + 1)
    P[0] = Y[0, 0]
    Mk = Y[1, 0] if two_d else M
    for k in range(steps):
        dP = L[k] + f_water(P[k], Mk, params)
        if two_d:
            Mk = Mk + h * g_sediment(P[k], Mk, params)
        P[k + 1] = P[k] + h * dP
    u = np.log(L / params.n) - params.c * P**2
    return discounted_integral(u, params.rho, h, T=steps * h)


def olne_strategy(starts, results, params: LakeParams, grid):
    """Per-agent initial-loading strategy and welfare interpolants from a sweep.

    ``grid`` is the :class:`Grid1D` / :class:`Grid2D` the starts were laid on
    (row-major for 2-D). Starts without an accepted path get NaN.
    """
    L0 = np.full(len(results), np.nan)
    W = np.full(len(results), np.nan)
    for k, res in enumerate(results):
        if res.ok:
            idx = 2 if res.solution.y.shape[0] == 4 else 1
            L0[k] = res.solution.y[idx, 0]
            W[k] = res.welfare
    if isinstance(grid, Grid2D):
        return (PiecewiseBilinear(grid, (L0 / params.n).reshape(grid.shape)),
                PiecewiseBilinear(grid, W.reshape(grid.shape)), L0, W)
    return PiecewiseLinear(grid, L0 / params.n), PiecewiseLinear(grid, W), L0, W


class OpenLoopNashSolver(LakeEstimator):
    """Open-loop Nash equilibrium of the ``n``-agent lake game.

    ``fit`` finds the stationary points of the Hamiltonian system, then
    sweeps the start lattice, solving one boundary value problem per
    (start, saddle-stable target) and keeping the accepted path with the
    highest per-agent welfare. ``predict`` returns the initial total loading
    and ``value`` the per-agent welfare, both interpolated over the starts.

    With ``n=1`` this is optimal management in the total loading.
    """

    def __init__(self, n=2, dim="1d", M=179.0, rho=0.043, c=0.1736, alpha=2.0, lake=None,
                 lam=None, tau_end=None, mesh_size=None, eps_P=0.05, eps_M=2.0,
                 p_range=(0.0, 6.0), m_range=(150.0, 200.0), starts=None,
                 use_neighbors=True, refine_jumps=True, welfare_step=0.02):
        self.n = n
        self.dim = dim
        self.M = M
        self.rho = rho
        self.c = c
        self.alpha = alpha
        self.lake = lake
        self.lam = lam
        self.tau_end = tau_end
        self.mesh_size = mesh_size
        self.eps_P = eps_P
        self.eps_M = eps_M
        self.p_range = p_range
        self.m_range = m_range
        self.starts = starts
        self.use_neighbors = use_neighbors
        self.refine_jumps = refine_jumps
        self.welfare_step = welfare_step

    # defaults differ by dimension: sediment relaxes on a ~500 time-unit scale
    def _bvp_settings(self):
        if self.dim == "1d":
            lam, tau_end, m = 0.05, 0.995, 400
        else:
            lam, tau_end, m = 0.003, 0.99, 2000
        lam = self.lam if self.lam is not None else lam
        tau_end = self.tau_end if self.tau_end is not None else tau_end
        m = self.mesh_size if self.mesh_size is not None else m
        return lam, tau_end, np.linspace(0.0, tau_end, m)

    def _start_grid(self):
        if self.dim == "1d":
            count = self.starts if self.starts is not None else 121
            return Grid1D(self.p_range[0], self.p_range[1], count)
        n1, n2 = self.starts if self.starts is not None else (31, 11)
        return Grid2D(Grid1D(self.p_range[0], self.p_range[1], n1), Grid1D(self.m_range[0], self.m_range[1], n2))

    def steady_states(self):
        params = self.lake_params()
        if self.dim == "1d":
            return olne_steady_1d(params, self.M)
        return olne_steady_2d(params)

    def _pieces(self, params, targets):
        lam, tau_end, mesh = self._bvp_settings()
        if self.dim == "1d":
            M = self.M

            def make(start, ss):
                return assemble_olne_1d(start[0], ss.L_total, M, params, lam, tau_end)

            def guess(ss, start):
                return np.vstack([np.full(mesh.size, ss.P), np.full(mesh.size, ss.L_total)])

            def accept(sol, ss):
                return abs(sol.y[0, -1] - ss.P) < self.eps_P
        else:
            def make(start, ss):
                return assemble_olne_2d(start[0], start[1], ss.L_total, ss.costates[1], params, lam, tau_end)

            def guess(ss, start):
                return np.vstack([np.full(mesh.size, ss.P), np.full(mesh.size, ss.M),
                                  np.full(mesh.size, ss.L_total), np.full(mesh.size, ss.costates[1])])

            def accept(sol, ss):
                return (abs(sol.y[0, -1] - ss.P) < self.eps_P
                        and abs(sol.y[1, -1] - ss.M) < self.eps_M)

        welfare = lambda sol: path_welfare(sol, params, self.welfare_step)
        return make, guess, accept, welfare, mesh

    def fit(self, X=None, y=None):
        """Solve the sweep. ``X`` optionally overrides the start lattice (1-D only
        interpolates on it when it is uniform; otherwise use ``sweep_``)."""
        check_dim(self.dim, self.M)
        params = self.lake_params()
        self.params_ = params
        self.steady_states_ = self.steady_states()
        targets = [ss for ss in self.steady_states_ if ss.stable]
        self.targets_ = targets
        make, guess, accept, welfare, mesh = self._pieces(params, targets)
        self.mesh_ = mesh
        grid = self._start_grid()
        if X is not None:
            starts = check_states(X, self.dim)
            grid = None
        elif self.dim == "1d":
            starts = grid.nodes
        else:
            starts = np.column_stack([a.ravel() for a in grid.mesh()])
        self.starts_ = starts
        self.sweep_ = sweep(starts, targets, make, guess, accept, welfare, mesh,
                            use_neighbors=self.use_neighbors, validate=_positive_loading)
        self.failed_starts_ = [r.start for r in self.sweep_ if not r.ok]
        if grid is not None:
            self.strategy_, self.value_, self.L0_, self.welfare_ = olne_strategy(starts, self.sweep_, params, grid)
            self.grid_ = grid
        else:
            self.strategy_ = self.value_ = self.grid_ = None
            self.L0_ = np.array([r.solution.y[2 if self.dim == "2d" else 1, 0] if r.ok else np.nan for r in self.sweep_])
            self.welfare_ = np.array([r.welfare for r in self.sweep_])
        self.jumps_ = self._find_jumps(make, guess, accept, welfare, mesh) if self.dim == "1d" else self._jump_cells()
        return self

    # ------------------------------------------------------------------
    def _find_jumps(self, make, guess, accept, welfare, mesh):
        """Locate each switch of the selected target between neighbouring starts.

        With ``refine_jumps`` the switch is bisected with continuation from
        both sides. Returns dicts with the location, both targets and the
        one-sided loadings and welfares.
        """
        res = self.sweep_
        jumps = []
        for k in range(len(res) - 1):
            a, b = res[k], res[k + 1]
            if not (a.ok and b.ok) or a.target == b.target:
                continue
            lo, hi = a.start[0], b.start[0]
            left_sol, right_sol = a.solution, b.solution
            ta, tb = a.target, b.target
            if self.refine_jumps:
                for _ in range(30):
                    mid = 0.5 * (lo + hi)
                    sol_a = self._try(make, (mid,), ta, left_sol.y, accept)
                    sol_b = self._try(make, (mid,), tb, right_sol.y, accept)
                    wa = welfare(sol_a) if sol_a is not None else -math.inf
                    wb = welfare(sol_b) if sol_b is not None else -math.inf
                    if sol_a is None and sol_b is None:
                        break
                    if wa >= wb:
                        lo, left_sol = mid, sol_a
                    else:
                        hi, right_sol = mid, sol_b
                    if hi - lo < 1e-5:
                        break
            jumps.append(dict(P=0.5 * (lo + hi), left_target=ta, right_target=tb,
                              L_left=float(left_sol.y[1, 0]), L_right=float(right_sol.y[1, 0]),
                              welfare_left=float(welfare(left_sol)), welfare_right=float(welfare(right_sol)),
                              bracket=(lo, hi)))
        return jumps

    def _try(self, make, start, ti, seed, accept):
        problem = make(start, self.targets_[ti])
        try:
            sol = solve_bvp(problem, self.mesh_, seed, validate=_positive_loading)
        except ConvergenceError:
            return None
        return sol if accept(sol, self.targets_[ti]) else None

    def _jump_cells(self):
        """Cells of the 2-D start lattice where the selected target changes along ``P``."""
        if self.grid_ is None:
            return []
        n1, n2 = self.grid_.shape
        tgt = np.array([r.target if r.ok else -1 for r in self.sweep_]).reshape(n1, n2)
        Ps, Ms = self.grid_.p.nodes, self.grid_.m.nodes
        cells = []
        for j in range(n2):
            for i in range(n1 - 1):
                if tgt[i, j] >= 0 and tgt[i + 1, j] >= 0 and tgt[i, j] != tgt[i + 1, j]:
                    cells.append(dict(P=0.5 * (Ps[i] + Ps[i + 1]), M=Ms[j],
                                      left_target=int(tgt[i, j]), right_target=int(tgt[i + 1, j])))
        return cells

    # ------------------------------------------------------------------
    def predict(self, X):
        """Initial total loading at the given start states."""
        check_is_fitted(self, "sweep_")
        X = check_states(X, self.dim)
        if self.strategy_ is None:
            raise ValueError("predict needs a fit on the default start lattice")
        if self.dim == "1d":
            return self.params_.n * self.strategy_(X)
        return self.params_.n * self.strategy_(X[:, 0], X[:, 1])

    def value(self, X):
        """Per-agent welfare at the given start states."""
        check_is_fitted(self, "sweep_")
        X = check_states(X, self.dim)
        if self.dim == "1d":
            return self.value_(X)
        return self.value_(X[:, 0], X[:, 1])

    def reported_steady_states(self):
        """Stable targets plus the jump loci as unstable thresholds (1-D)."""
        check_is_fitted(self, "sweep_")
        out = [ss for ss in self.targets_]
        params = self.params_
        for jump in (self.jumps_ if self.dim == "1d" else []):
            out.append(SteadyState(state=(jump["P"],), L_total=jump["L_left"], stable=False,
                                   welfare=jump["welfare_left"], regime="intermediate"))
        return sorted(out, key=lambda s: s.state)
