import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lakegame.model import (LakeParams, f_water, g_sediment, partials, recycle_fraction, reduced_drift,
                            state_rate_2d, utility)

P = LakeParams()


def test_defaults_round_trip_bit_exact():
    d = P.to_dict()
    back = LakeParams.from_dict(d)
    assert back == P
    for k in ("s", "varsigma", "eta", "r", "q"):
        assert getattr(back, k).hex() == getattr(P, k).hex()


@pytest.mark.parametrize("field,value", [("s", 0.0), ("rho", -1.0), ("eta", float("nan")), ("alpha", 0.5),
                                         ("n", 0), ("n", 1.5)])
def test_params_reject_bad_values(field, value):
    with pytest.raises(ValueError, match=field):
        LakeParams(**{field: value})


def test_from_dict_rejects_unknown_key():
    with pytest.raises(KeyError, match="bogus"):
        LakeParams.from_dict({"bogus": 1.0})


def test_recycle_fraction_values():
    assert recycle_fraction(0.0, P) == 0.0
    assert recycle_fraction(2.4, P) == pytest.approx(0.5, abs=1e-15)
    assert recycle_fraction(0.85, P) == pytest.approx(0.7225 / 6.4825, rel=1e-12)
    # direct arithmetic gives 0.1114539; the rounded figure 0.111456 is off in the sixth place
    assert recycle_fraction(0.85, P) == pytest.approx(0.111456, abs=5e-6)


@given(st.floats(0, 50), st.floats(0, 50), st.floats(1, 10))
def test_recycle_fraction_range_and_monotone(a, b, alpha):
    p = P.replace(alpha=alpha)
    lo, hi = sorted((a, b))
    ra, rb = recycle_fraction(lo, p), recycle_fraction(hi, p)
    assert 0.0 <= ra < 1.0 and 0.0 <= rb < 1.0
    assert rb >= ra


def test_f_water_values():
    assert f_water(0.0, 179.0, P) == 0.0
    assert f_water(0.85, 179.0, P) == pytest.approx(-0.85 * 0.85 + 0.019 * 179 * 0.7225 / 6.4825, rel=1e-12)
    assert f_water(0.85, 179.0, P) == pytest.approx(-0.3434, abs=1e-4)
    assert f_water(0.774, 194.2, P) == pytest.approx(-0.3103, abs=1e-4)


def test_g_sediment_values():
    assert g_sediment(0.0, 0.0, P) == 0.0
    assert g_sediment(1.0, 0.0, P) == pytest.approx(0.7)
    # the cooperative 2D steady state lies on the sediment isocline
    assert abs(g_sediment(0.774, 194.2, P)) < 1e-3


def test_partials_values():
    f_P, f_M, g_P, g_M = partials(0.0, 179.0, P)
    assert f_M == 0.0
    f_P, *_ = partials(0.85, 179.0, P)
    assert f_P == pytest.approx(-0.85 + 0.019 * 179 * (2 * 0.85 * 5.76) / 6.4825**2, rel=1e-12)
    # the closed form evaluates to -0.05751
    assert f_P == pytest.approx(-0.0574, abs=2e-4)


def _central(fun, x, h=1e-6):
    return (fun(x + h) - fun(x - h)) / (2 * h)


def test_partials_match_finite_differences_random():
    rng = np.random.default_rng(7)
    for _ in range(100):
        Pt, Mt = rng.uniform(0.05, 6), rng.uniform(100, 300)
        alpha = rng.choice([2.0, 8.0])
        p = P.replace(alpha=alpha)
        an = partials(Pt, Mt, p)
        fd = (_central(lambda x: f_water(x, Mt, p), Pt), _central(lambda m: f_water(Pt, m, p), Mt),
              _central(lambda x: g_sediment(x, Mt, p), Pt), _central(lambda m: g_sediment(Pt, m, p), Mt))
        for a, b in zip(an, fd):
            assert abs(a - b) <= 1e-6 * max(abs(a), 1e-3)


def test_utility_values_and_domain():
    assert utility(1.0, 0.0, P) == 0.0
    assert utility(math.e, 0.0, P) == pytest.approx(1.0)
    assert utility(0.17, 0.85, P) == pytest.approx(math.log(0.17) - 0.1736 * 0.7225, rel=1e-12)
    assert utility(0.17, 0.85, P) == pytest.approx(-1.8974, abs=1e-4)
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            utility(bad, 0.5, P)


def test_reduced_drift_values():
    assert reduced_drift(0.0, 0.0, 0.3) == 0.0
    assert reduced_drift(1.0, 0.0, 0.5) == 0.0
    assert reduced_drift(1.0, 0.1, 0.6) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=200)
@given(st.floats(0, 10), st.floats(0, 400), st.floats(0, 5), st.floats(1, 8))
def test_mass_balance(Pt, Mt, L, alpha):
    p = P.replace(alpha=alpha)
    dP, dM = state_rate_2d(Pt, Mt, L, p)
    assert abs(dP + dM - (L - p.varsigma * Pt - p.eta * Mt)) < 1e-12 * max(1.0, abs(L), Pt, Mt * p.eta)
