import numpy as np
import pytest

from lakegame.olne import OpenLoopNashSolver, path_welfare, replay_welfare


@pytest.fixture(scope="module")
def sweep_240():
    return OpenLoopNashSolver(n=2, M=240.0, starts=31).fit()


def test_every_start_accepted(sweep_240):
    est = sweep_240
    assert not est.failed_starts_
    for r in est.sweep_:
        ss = est.targets_[r.target]
        assert abs(r.solution.y[0, -1] - ss.P) < est.eps_P
        assert r.solution.y[0, 0] == pytest.approx(r.start[0], abs=1e-9)


def test_target_switch_near_threshold(sweep_240):
    # reference value: switching point of the two-agent sweep at M = 240 is 1.48
    jumps = sweep_240.jumps_
    assert len(jumps) == 1
    assert jumps[0]["P"] == pytest.approx(1.48, abs=0.05)
    assert jumps[0]["left_target"] == 0 and jumps[0]["right_target"] == 1


def test_selected_path_has_highest_welfare(sweep_240):
    for r in sweep_240.sweep_:
        assert r.welfare == max(w for _, w in r.accepted)


def test_welfare_routes_agree(sweep_240):
    p = sweep_240.params_
    for r in sweep_240.sweep_[::5]:
        a = path_welfare(r.solution, p)
        b = replay_welfare(r.solution, p, M=240.0)
        assert abs(a - b) <= 5e-3 * abs(a)


def test_value_is_decreasing_and_predict_positive(sweep_240):
    X = np.linspace(0.1, 5.9, 40)
    assert np.all(np.diff(sweep_240.value(X)) < 0)
    assert np.all(sweep_240.predict(X) > 0)


def test_reported_states_include_threshold(sweep_240):
    states = sweep_240.reported_steady_states()
    assert [s.stable for s in states] == [True, False, True]
    assert states[1].P == pytest.approx(1.48, abs=0.01)


def test_two_d_bvp_accepted_from_lattice_corner():
    est = OpenLoopNashSolver(n=2, dim="2d", starts=(2, 2), p_range=(0.5, 1.0), m_range=(185.0, 195.0)).fit()
    assert not est.failed_starts_
    for r in est.sweep_:
        assert r.solution.y.shape[0] == 4
        b = replay_welfare(r.solution, est.params_)
        assert abs(r.welfare - b) <= 5e-3 * abs(r.welfare)
