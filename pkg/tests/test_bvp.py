import math

import numpy as np
import pytest

from lakegame.bvp import BvpProblem, compactify, solve_bvp, sweep, tau_transform
from lakegame.model import LakeParams
from lakegame.numerics import ConvergenceError
from lakegame.olne import assemble_olne_1d, path_welfare
from lakegame.steady import olne_steady_1d, stationary_welfare

LAM, TAU_END = 0.05, 0.995


def test_tau_transform():
    t_of, dt = tau_transform(0.05)
    assert t_of(0.0) == 0.0
    assert t_of(0.99) == pytest.approx(-math.log(0.01) / 0.05)
    assert t_of(0.99) == pytest.approx(92.103, abs=1e-3)
    assert dt(0.0) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        tau_transform(0.0)


def test_problem_validation():
    rhs = lambda tau, Y: -Y
    with pytest.raises(ValueError, match="boundary conditions"):
        BvpProblem(rhs, 2, {0: 1.0}, {}, 0.9, 0.05)
    with pytest.raises(ValueError):
        BvpProblem(rhs, 1, {0: 1.0}, {}, 1.0, 0.05)


def _decay(m, tol=1e-13):
    t_of, _ = tau_transform(LAM)
    mesh = np.linspace(0.0, TAU_END, m)
    prob = BvpProblem(compactify(lambda Y: -Y, LAM), 1, {0: 1.0}, {}, TAU_END, LAM)
    sol = solve_bvp(prob, mesh, np.full((1, m), 0.5), tol=tol)
    tt = np.linspace(0.0, TAU_END, 20001)
    return sol, float(np.max(np.abs(sol(tt)[0] - np.exp(-t_of(tt)))))


def test_linear_decay_accuracy():
    sol, err = _decay(400)
    assert err < 1e-6
    assert sol.residual < 1e-8 and sol.bc_residual < 1e-8


def test_linear_decay_fourth_order():
    errs = [_decay(m)[1] for m in (100, 199, 397)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    for r in ratios:
        assert 12 < r < 20


def test_harmonic_oscillator_linear_axis():
    # physical time used directly as the mesh coordinate
    rhs = lambda t, Y: np.vstack([Y[1], -Y[0]])
    prob = BvpProblem(rhs, 2, {0: 0.0}, {0: 1.0}, math.pi / 2)
    mesh = np.linspace(0, math.pi / 2, 200)
    sol = solve_bvp(prob, mesh, np.zeros((2, 200)))
    tt = np.linspace(0, math.pi / 2, 1001)
    Y = sol(tt)
    assert np.max(np.abs(Y[0] - np.sin(tt))) < 1e-6
    assert np.max(np.abs(Y[1] - np.cos(tt))) < 1e-6


def test_steady_state_is_returned_unchanged():
    p = LakeParams(n=2)
    ss = [s for s in olne_steady_1d(p, 179.0) if s.stable][0]
    prob = assemble_olne_1d(ss.P, ss.L_total, 179.0, p)
    mesh = np.linspace(0, TAU_END, 400)
    guess = np.vstack([np.full(400, ss.P), np.full(400, ss.L_total)])
    sol = solve_bvp(prob, mesh, guess)
    assert sol.iterations <= 1
    np.testing.assert_allclose(sol.y, guess, atol=1e-10)
    # welfare of the stationary path is the stationary value
    assert path_welfare(sol, p) == pytest.approx(stationary_welfare(ss.L_total, ss.P, p), rel=5e-3)


def test_bad_guess_shape_and_nonfinite():
    prob = BvpProblem(compactify(lambda Y: -Y, LAM), 1, {0: 1.0}, {}, TAU_END, LAM)
    with pytest.raises(ValueError):
        solve_bvp(prob, np.linspace(0, TAU_END, 10), np.ones((1, 9)))
    prob = BvpProblem(lambda tau, Y: np.log(Y - 10.0), 1, {0: 1.0}, {}, TAU_END, LAM)
    with pytest.raises(ConvergenceError):
        solve_bvp(prob, np.linspace(0, TAU_END, 10), np.ones((1, 10)))


def test_sweep_start_at_steady_state_and_flags_failures():
    p = LakeParams(n=2)
    targets = [s for s in olne_steady_1d(p, 179.0) if s.stable]
    mesh = np.linspace(0, TAU_END, 400)
    make = lambda start, ss: assemble_olne_1d(start[0], ss.L_total, 179.0, p)
    const = lambda ss, start: np.vstack([np.full(mesh.size, ss.P), np.full(mesh.size, ss.L_total)])
    accept = lambda sol, ss: abs(sol.y[0, -1] - ss.P) < 0.05
    res = sweep([targets[0].P], targets, make, const, accept, lambda s: path_welfare(s, p), mesh)
    assert res[0].ok and res[0].target == 0
    np.testing.assert_allclose(res[0].solution.y[0], targets[0].P, atol=1e-9)
    # nothing is accepted when the acceptance radius is empty
    res = sweep([1.0], targets, make, const, lambda sol, ss: False, lambda s: 0.0, mesh)
    assert not res[0].ok and res[0].welfare == -math.inf
