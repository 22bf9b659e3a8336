import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lakegame.model import LakeParams, f_water, g_sediment, state_rate_2d
from lakegame.numerics import (ConvergenceError, Grid1D, Grid2D, PiecewiseBilinear, PiecewiseLinear,
                               discounted_integral, euler_simulate, fd_partial_M, fd_partial_M_grid,
                               maximize_scalar, solve_scalar, solve_system)
from lakegame.steady import olne_rate_1d
from lakegame.sfvf import node_residual, sign_scan_roots

P = LakeParams()


# grids and interpolants

def test_grid_defaults():
    g = Grid1D()
    assert g.count == 601 and g.step == pytest.approx(0.01)
    assert np.all(np.diff(g.nodes) > 0)
    g2 = Grid2D()
    assert g2.shape == (101, 101)
    assert g2.m.nodes[0] == 150 and g2.m.nodes[-1] == 200


@pytest.mark.parametrize("kw", [dict(count=1), dict(lo=1.0, hi=1.0), dict(count=2.5)])
def test_grid_validation(kw):
    with pytest.raises(ValueError):
        Grid1D(**kw)


@given(st.lists(st.floats(-100, 100), min_size=11, max_size=11))
def test_linear_node_identity_and_midpoint(vals):
    g = Grid1D(0.0, 1.0, 11)
    f = PiecewiseLinear(g, vals)
    assert np.array_equal(f(g.nodes), np.asarray(vals))
    mid = 0.5 * (g.nodes[:-1] + g.nodes[1:])
    np.testing.assert_allclose(f(mid), 0.5 * (np.asarray(vals[:-1]) + np.asarray(vals[1:])), atol=1e-12)


def test_linear_extrapolation_modes():
    g = Grid1D(0.0, 1.0, 3)
    f = PiecewiseLinear(g, [0.0, 1.0, 4.0])
    assert f(-1.0) == 0.0 and f(2.0) == 4.0
    lin = PiecewiseLinear(g, [0.0, 1.0, 4.0], extrapolate="linear")
    assert lin(1.5) == pytest.approx(7.0)
    with pytest.raises(ValueError):
        PiecewiseLinear(g, [1.0, 2.0])


def test_bilinear_node_identity_and_exactness():
    g = Grid2D(Grid1D(0.0, 6.0, 13), Grid1D(150.0, 200.0, 11))
    PP, MM = g.mesh()
    rng = np.random.default_rng(3)
    vals = rng.normal(size=g.shape)
    f = PiecewiseBilinear(g, vals)
    assert np.array_equal(f(PP, MM), vals)
    # bilinear functions are reproduced exactly
    b = PiecewiseBilinear(g, 1.0 + 2.0 * PP - 0.5 * MM + 0.1 * PP * MM)
    x, y = rng.uniform(0, 6, 50), rng.uniform(150, 200, 50)
    np.testing.assert_allclose(b(x, y), 1.0 + 2.0 * x - 0.5 * y + 0.1 * x * y, rtol=1e-12)
    # clamped outside the hull
    assert b(-1.0, 100.0) == pytest.approx(b(0.0, 150.0))


def test_interpolants_are_immutable():
    f = PiecewiseLinear(Grid1D(0, 1, 3), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        f.values[0] = 5.0


# root finding

def test_solve_scalar_trivial():
    assert solve_scalar(lambda x: x * x - 4, [1.0, 10.0]) == pytest.approx([2.0])
    assert solve_scalar(lambda x: math.log(x) - 1, [1.0]) == pytest.approx([math.e])
    assert solve_scalar(lambda x: x * x + 1, [1.0, 3.0]) == []
    with pytest.raises(ValueError):
        solve_scalar(lambda x: x, [])


def _node_instance(rng):
    # eutrophic-side node, n=2, M=240: f < 0 so the node equation can have two crossings
    Pn = rng.uniform(0.3, 1.4)
    f = f_water(Pn, 240.0, P.replace(n=2))
    a = -f
    gap = rng.uniform(-1.5, -0.05)
    p2 = P.replace(n=2)
    V = (math.log(a) + 1.0 - gap - p2.c * Pn**2 - p2.n) / p2.rho
    return Pn, V, p2


def test_solve_scalar_matches_sign_scan_on_node_equations():
    rng = np.random.default_rng(11)
    guesses = list(np.geomspace(1e-4, 10, 12))
    for _ in range(20):
        Pn, V, p2 = _node_instance(rng)
        res = lambda x: float(node_residual(x, Pn, V, p2, 240.0))
        roots = solve_scalar(res, guesses + [0.3])
        brackets = sign_scan_roots(Pn, V, p2, 240.0, count=1_000_000)
        assert len(brackets) >= 1
        for lo, hi in brackets:
            assert any(lo <= r <= hi for r in roots)
        for r in roots:
            assert abs(res(r)) < 1e-10


def test_solve_system_trivial_and_rosenbrock():
    x = solve_system(lambda z: np.array([z[0] - 1, z[1] + 2]), [0.0, 0.0])
    np.testing.assert_allclose(x, [1, -2], atol=1e-12)
    grad = lambda z: np.array([-2 * (1 - z[0]) - 400 * z[0] * (z[1] - z[0] ** 2), 200 * (z[1] - z[0] ** 2)])
    np.testing.assert_allclose(solve_system(grad, [1.2, 1.2]), [1.0, 1.0], atol=1e-8)


def test_solve_system_stationary_1d_olne():
    p2 = P.replace(n=2)
    z = solve_system(lambda z: np.asarray(olne_rate_1d(z[0], z[1], 179.0, p2)), [1.0, 0.3])
    assert z[0] == pytest.approx(0.95, abs=0.02)
    assert z[1] == pytest.approx(0.34, abs=0.01)


def test_solve_system_failure_reports_norm():
    with pytest.raises(ConvergenceError) as err:
        solve_system(lambda z: np.array([z[0] ** 2 + 1.0]), [0.5], max_iter=20)
    assert np.isfinite(err.value.residual_norm)
    with pytest.raises(ValueError):
        solve_system(lambda z: np.array([z[0], z[0]]), [0.0])


# quadrature and simulation

def test_discounted_integral_values():
    h = 0.1
    T = 600.0
    n = int(T / h) + 1
    assert discounted_integral(np.ones(n), 0.05, h) == pytest.approx(20.0, abs=1e-6 * 20 + 1e-2 * h ** 2)
    assert discounted_integral(np.full(n, -1.8974), 0.043, h) == pytest.approx(-44.13, abs=0.01)
    h = 1e-3
    t = h * np.arange(int(40 / h) + 1)
    assert discounted_integral(np.exp(-t), 1.0, h) == pytest.approx(0.5, abs=1e-6)


@settings(max_examples=30)
# trapezoid relative error is (rho h)^2 / 12, under 1e-5 while rho h <= 0.01
@given(st.floats(-5, 5), st.floats(0.01, 0.1), st.sampled_from([0.1, 0.05, 0.02]))
def test_discounted_integral_constant(u, rho, h):
    T = 25.0 / rho
    n = int(round(T / h)) + 1
    got = discounted_integral(np.full(n, u), rho, h)
    assert got == pytest.approx(u / rho, rel=1e-5, abs=1e-12)


def test_euler_fixed_point_and_decay():
    p2 = P.replace(n=2)
    L = -float(f_water(0.85, 179.0, p2))
    traj = euler_simulate(lambda S, x: 2 * x + f_water(S, 179.0, p2), lambda S: L / 2, 0.85, 0.1, 0.1)
    assert traj.states[-1] == pytest.approx(0.85, abs=1e-15)
    traj = euler_simulate(lambda S, x: -S, lambda S: 0.0, 1.0, 0.5, 1.0)
    assert traj.states[-1] == pytest.approx(0.25)
    assert traj.times.size == 3


def test_euler_length_and_recurrence():
    traj = euler_simulate(lambda S, x: x - S, lambda S: 0.3, 1.0, 0.1, 2.05)
    assert traj.times.size == int(math.floor(2.05 / 0.1)) + 1
    S = traj.states
    np.testing.assert_allclose(S[1:], S[:-1] + (0.3 - S[:-1]) * 0.1, atol=0)


def test_euler_2d_mass_balance():
    rng = np.random.default_rng(5)
    for _ in range(10):
        S0 = np.array([rng.uniform(0, 6), rng.uniform(150, 200)])
        Lt = rng.uniform(0.05, 1.0)
        rate = lambda S, x: np.array(state_rate_2d(S[0], S[1], x, P))
        tr = euler_simulate(rate, lambda S: Lt, S0, 0.1, 50.0)
        d = np.diff(tr.states, axis=0) / 0.1
        Sk = tr.states[:-1]
        res = d[:, 0] + d[:, 1] - (Lt - P.varsigma * Sk[:, 0] - P.eta * Sk[:, 1])
        assert np.max(np.abs(res)) < 1e-10


# finite differences and maximization

def test_fd_partial_M():
    g = Grid2D()
    PP, MM = g.mesh()
    dM = g.m.step
    lin = 3.0 * MM + PP
    w = fd_partial_M_grid(lin, dM)
    np.testing.assert_allclose(w, 3.0, rtol=1e-9)
    assert fd_partial_M(np.ones(g.shape), 5, 0, dM) == 0.0
    i2 = int(np.argmin(np.abs(g.m.nodes - 175.0)))
    assert g.m.nodes[i2] == 175.0
    assert fd_partial_M(MM**2, 3, i2, dM) == pytest.approx(350.0, rel=1e-12)
    for i2 in (0, 50, 100):
        assert fd_partial_M(lin, 7, i2, dM) == pytest.approx(w[7, i2])


def test_maximize_scalar():
    x, f = maximize_scalar(lambda x: -(x - 2) ** 2, 0, 5)
    assert x == pytest.approx(2, abs=1e-5)
    x, f = maximize_scalar(lambda x: math.log(x) - x, 0.1, 5)
    assert x == pytest.approx(1, abs=1e-5)
    fun = lambda x: -(x - 1) ** 2 * (x - 3) ** 2 + x
    x, f = maximize_scalar(fun, 0, 4, tol=1e-9)
    xs = np.linspace(0, 4, 1_000_001)
    assert x == pytest.approx(xs[np.argmax(fun(xs))], abs=1e-4)
    xv, fv = maximize_scalar(lambda x: fun(np.asarray(x)), 0, 4, tol=1e-9, vectorized=True)
    assert xv == pytest.approx(x, abs=1e-8)
    with pytest.raises(ValueError):
        maximize_scalar(fun, 1, 1)
