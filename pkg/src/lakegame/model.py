"""Shallow-lake phosphorus dynamics and agent utility.

All functions broadcast over numpy arrays. ``P`` is the phosphorus density in
the water, ``M`` the density in the sediment (mud).
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LakeParams:
    """Model constants.

    Rates are per unit time, ``q`` is a density, ``c`` weights the damage
    ``c * P**2`` against the log benefit of loading.
    """

    s: float = 0.7
    varsigma: float = 0.15
    eta: float = 0.001
    r: float = 0.019
    q: float = 2.4
    alpha: float = 2.0
    c: float = 0.1736
    rho: float = 0.043
    n: int = 2

    def __post_init__(self):
        for name in ("s", "varsigma", "eta", "r", "q", "c", "rho"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"LakeParams.{name} must be a positive finite number, got {value!r}")
        if not self.alpha >= 1:
            raise ValueError(f"LakeParams.alpha must be >= 1, got {self.alpha!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"LakeParams.n must be an integer >= 1, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    def replace(self, **changes) -> "LakeParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "LakeParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown LakeParams key(s): {', '.join(sorted(unknown))}")
        return cls(**data)


def recycle_fraction(P, params: LakeParams):
    """Holling type-III response ``P**a / (P**a + q**a)``."""
    P = np.asarray(P, dtype=float)
    Pa = np.power(P, params.alpha)
    return Pa / (Pa + params.q ** params.alpha)


def recycle_fraction_dP(P, params: LakeParams):
    P = np.asarray(P, dtype=float)
    a, qa = params.alpha, params.q ** params.alpha
    Pa = np.power(P, a)
    return a * np.power(P, a - 1.0) * qa / (Pa + qa) ** 2


def f_water(P, M, params: LakeParams):
    """Drift of ``P`` excluding the loading."""
    return -(params.s + params.varsigma) * np.asarray(P, dtype=float) + params.r * np.asarray(M, dtype=float) * recycle_fraction(P, params)


def g_sediment(P, M, params: LakeParams):
    """Drift of ``M``."""
    P = np.asarray(P, dtype=float)
    M = np.asarray(M, dtype=float)
    return params.s * P - params.eta * M - params.r * M * recycle_fraction(P, params)


def partials(P, M, params: LakeParams):
    """Analytic ``(f_P, f_M, g_P, g_M)``."""
    M = np.asarray(M, dtype=float)
    R = recycle_fraction(P, params)
    dR = recycle_fraction_dP(P, params)
    f_P = -(params.s + params.varsigma) + params.r * M * dR
    f_M = params.r * R
    g_P = params.s - params.r * M * dR
    g_M = -params.eta - params.r * R
    return f_P, f_M, g_P, g_M


def utility(L_agent, P, params: LakeParams):
    """Instantaneous utility ``ln(L_a) - c P**2`` of one agent."""
    L_agent = np.asarray(L_agent, dtype=float)
    if np.any(~(L_agent > 0)):
        raise ValueError("utility requires strictly positive loading")
    return np.log(L_agent) - params.c * np.asarray(P, dtype=float) ** 2


def reduced_drift(x, u, b):
    """Dimensionless lake equation ``u - b x + x**2 / (x**2 + 1)``."""
    x = np.asarray(x, dtype=float)
    return u - b * x + x * x / (x * x + 1.0)


def state_rate_2d(P, M, L_total, params: LakeParams):
    return L_total + f_water(P, M, params), g_sediment(P, M, params)
