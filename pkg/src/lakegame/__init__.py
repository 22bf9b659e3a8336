"""Equilibria of the shallow-lake pollution game.

Open-loop Nash equilibria via boundary value problems, feedback Nash
equilibria and the cooperative solution via strategy-function /
value-function iteration, plus steady-state analysis and a batch runner.
"""
from .model import LakeParams, f_water, g_sediment, partials, recycle_fraction, state_rate_2d, utility
from .numerics import Grid1D, Grid2D, PiecewiseBilinear, PiecewiseLinear, solve_scalar, solve_system
from .bvp import BvpProblem, BvpSolution, solve_bvp, sweep
from .steady import SteadyState, closed_loop_steady_1d, closed_loop_steady_2d, olne_steady_1d, olne_steady_2d
from .olne import OpenLoopNashSolver
from .sfvf import CooperativeSolver, FeedbackNashSolver, SfvfConfig, SfvfResult, run_sfvf

__version__ = "0.1.0"

__all__ = [
    "LakeParams", "f_water", "g_sediment", "partials", "recycle_fraction", "state_rate_2d", "utility",
    "Grid1D", "Grid2D", "PiecewiseLinear", "PiecewiseBilinear", "solve_scalar", "solve_system",
    "BvpProblem", "BvpSolution", "solve_bvp", "sweep",
    "SteadyState", "olne_steady_1d", "olne_steady_2d", "closed_loop_steady_1d", "closed_loop_steady_2d",
    "OpenLoopNashSolver", "FeedbackNashSolver", "CooperativeSolver", "SfvfConfig", "SfvfResult", "run_sfvf",
]
