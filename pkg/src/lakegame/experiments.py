"""Experiment configuration, orchestration and the reference-results comparison.

An experiment is one (concept, dimension, n, M) cell. :func:`run_experiment`
solves it and returns a :class:`ResultRow`; :func:`compare_reference` checks
rows against the embedded reference fixture with per-cell tolerances. Welfare
cells are compared after scaling by ``rho``.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import LakeParams, f_water, g_sediment
from .numerics import Grid1D, Grid2D
from .olne import OpenLoopNashSolver
from .sfvf import CooperativeSolver, FeedbackNashSolver

log = logging.getLogger(__name__)

CONCEPTS = ("coop", "olne", "fbne")
DIMS = ("1d", "2d")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    concept: str = "fbne"
    dim: str = "1d"
    n: int = 2
    M: float | None = 179.0
    lake: dict = field(default_factory=dict)
    # value-function grid: P range and count, M range and count (2-D)
    p_lo: float = 0.0
    p_hi: float = 6.0
    p_count: int = 601
    m_lo: float = 150.0
    m_hi: float = 200.0
    m_count: int = 101
    # SFVF controls
    omega: float = 0.5
    xi: float = 0.1
    tol: float = 1e-4
    max_iter: int = 500
    h: float = 0.1
    T: float = 600.0
    omega_threshold: float = 1e-3
    # cooperative seed: the single-agent open-loop sweep or the stationary-value guess
    coop_init: str = "open-loop"
    # open-loop sweep controls; None picks the per-dimension default
    lam: float | None = None
    tau_end: float | None = None
    mesh_size: int | None = None
    starts: object = None
    out: str = "results"
    seed_grids: str | None = None

    def __post_init__(self):
        self.validate()

    @classmethod
    def keys(cls):
        return [f.name for f in dataclasses.fields(cls)]

    def validate(self):
        if self.concept not in CONCEPTS:
            raise ValueError(f"config key 'concept': expected one of {CONCEPTS}, got {self.concept!r}")
        if self.dim not in DIMS:
            raise ValueError(f"config key 'dim': expected one of {DIMS}, got {self.dim!r}")
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool) or self.n < 1:
            raise ValueError(f"config key 'n': expected an integer >= 1, got {self.n!r}")
        if self.dim == "1d":
            if self.M is None or not isinstance(self.M, (int, float)) or not math.isfinite(self.M) or self.M < 0:
                raise ValueError(f"config key 'M': 1d experiments need a constant nonnegative M, got {self.M!r}")
        for key in ("p_lo", "p_hi", "m_lo", "m_hi", "omega", "xi", "tol", "h", "T", "omega_threshold"):
            v = getattr(self, key)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"config key {key!r}: expected a finite number, got {v!r}")
        for key in ("p_count", "m_count", "max_iter"):
            v = getattr(self, key)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 2:
                raise ValueError(f"config key {key!r}: expected an integer >= 2, got {v!r}")
        for key in ("lam", "tau_end"):
            v = getattr(self, key)
            if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))):
                raise ValueError(f"config key {key!r}: expected a number, got {v!r}")
        if self.mesh_size is not None and (not isinstance(self.mesh_size, int) or self.mesh_size < 3):
            raise ValueError(f"config key 'mesh_size': expected an integer >= 3, got {self.mesh_size!r}")
        if self.coop_init not in ("open-loop", "guess"):
            raise ValueError(f"config key 'coop_init': expected 'open-loop' or 'guess', got {self.coop_init!r}")
        if not 0 <= self.omega < 1:
            raise ValueError(f"config key 'omega': must lie in [0, 1), got {self.omega!r}")
        if not isinstance(self.lake, dict):
            raise ValueError(f"config key 'lake': expected a mapping of model constants, got {self.lake!r}")
        known = {f.name for f in dataclasses.fields(LakeParams)} - {"n"}
        for key, v in self.lake.items():
            if key not in known:
                raise ValueError(f"config key 'lake.{key}': unknown model constant")
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ValueError(f"config key 'lake.{key}': expected a number, got {v!r}")
        try:
            self.params()
        except ValueError as exc:
            raise ValueError(f"config key 'lake': {exc}") from None
        if self.dim == "2d":
            self.M = None

    def params(self) -> LakeParams:
        return LakeParams(**self.lake).replace(n=1 if self.concept == "coop" else self.n)

    def grid(self):
        p = Grid1D(float(self.p_lo), float(self.p_hi), int(self.p_count))
        if self.dim == "1d":
            return p
        return Grid2D(p, Grid1D(float(self.m_lo), float(self.m_hi), int(self.m_count)))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    @property
    def label(self) -> str:
        m = f"-M{self.M:g}" if self.dim == "1d" else ""
        return f"{self.concept}-{self.dim}-n{self.n}{m}"

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        lake = dict(data.pop("lake", {}) or {})
        for key in list(data):
            if key.startswith("lake."):
                lake[key[5:]] = data.pop(key)
        known = set(cls.keys())
        for key in data:
            if key not in known:
                raise ValueError(f"config key {key!r}: unknown key")
        return cls(lake=lake, **data)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        """Read a JSON object or ``key = value`` lines (``#`` comments allowed)."""
        text = Path(path).read_text()
        if text.lstrip().startswith("{"):
            return cls.from_mapping(json.loads(text))
        data = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            data[key] = parse_value(value)
        return cls.from_mapping(data)


def parse_value(text: str):
    """Literal for a ``key = value`` entry: JSON when it parses, else the bare string."""
    if text.lower() in ("none", "null"):
        return None
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


# ---------------------------------------------------------------------------
# results


@dataclass
class ResultRow:
    label: str
    concept: str
    dim: str
    n: int
    M_const: float | None
    rho: float
    steady: list = field(default_factory=list)
    V_range: tuple = (math.nan, math.nan)
    runtime: float = 0.0
    converged: bool = True
    status: str = "OK"
    estimator: object = field(default=None, repr=False)

    def stable_states(self):
        return [s for s in self.steady if s["stable"]]


def _individual(concept, n, rho, value):
    # optimal-management welfare split among n symmetric agents
    return value - math.log(n) / rho if concept == "coop" else value


def build_estimator(config: ExperimentConfig):
    lake = LakeParams(**config.lake)
    common = dict(dim=config.dim, M=config.M if config.dim == "1d" else 179.0, rho=lake.rho, c=lake.c,
                  alpha=lake.alpha, lake=lake)
    if config.concept == "olne":
        return OpenLoopNashSolver(n=config.n, lam=config.lam, tau_end=config.tau_end, mesh_size=config.mesh_size,
                                  starts=config.starts, p_range=(config.p_lo, config.p_hi),
                                  m_range=(config.m_lo, config.m_hi), **common)
    sfvf = dict(grid=config.grid(), omega=config.omega, xi=config.xi, tol=config.tol, max_iter=config.max_iter,
                h=config.h, T=config.T, omega_threshold=config.omega_threshold, init=load_seed(config))
    if config.concept == "coop":
        if sfvf["init"] is None and config.coop_init == "open-loop":
            sfvf["init"] = "open-loop"
        return CooperativeSolver(n_agents=config.n, **common, **sfvf)
    return FeedbackNashSolver(n=config.n, **common, **sfvf)


def steady_rows(config: ExperimentConfig, estimator=None):
    """Steady states as report dicts; algebraic for the open loop, from the strategy otherwise."""
    if config.concept == "olne":
        est = estimator if estimator is not None else build_estimator(config)
        states = est.reported_steady_states() if hasattr(est, "sweep_") else est.steady_states()
    else:
        states = estimator.steady_states()
    p = config.params()
    rows = []
    for s in states:
        welfare = s.welfare
        if np.isfinite(welfare):
            welfare = _individual(config.concept, config.n, p.rho, welfare)
        L = s.L_total
        rows.append(dict(concept=config.concept, dim=config.dim, n=config.n,
                         M_const=config.M if config.dim == "1d" else "",
                         P_star=s.P, M_star=s.M if s.M is not None else (config.M if config.dim == "1d" else ""),
                         L_star=L, stable=bool(s.stable), welfare=welfare))
    return rows


def run_experiment(config: ExperimentConfig) -> ResultRow:
    """Solve one experiment; failures are caught and reported in ``status``."""
    p = config.params()
    row = ResultRow(config.label, config.concept, config.dim, config.n, config.M, p.rho)
    t0 = time.perf_counter()
    try:
        est = build_estimator(config).fit()
        row.estimator = est
        row.steady = steady_rows(config, est)
        if config.concept == "olne":
            W = np.asarray(est.welfare_, dtype=float)
            W = W[np.isfinite(W)]
            row.converged = not est.failed_starts_
        else:
            W = np.asarray(est.result_.V, dtype=float)
            row.converged = bool(est.converged_)
        W = _individual(config.concept, config.n, p.rho, W)
        row.V_range = (float(np.max(W)), float(np.min(W)))
        if not row.converged:
            row.status = "FAILED"
    except Exception as exc:  # a failed cell must not stop a batch
        log.exception("experiment %s failed", config.label)
        row.status = f"FAILED: {exc}"
        row.converged = False
    row.runtime = time.perf_counter() - t0
    return row


# ---------------------------------------------------------------------------
# grids and files

STEADY_FIELDS = ("concept", "dim", "n", "M_const", "P_star", "M_star", "L_star", "stable", "welfare")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_steady_csv(path, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STEADY_FIELDS)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in STEADY_FIELDS])


def read_csv(path):
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def write_grid_csv(path, P, M, values):
    """Grid as ``(P, M, value)`` triples, ``P`` varying slowest."""
    PP, MM = np.meshgrid(np.atleast_1d(P), np.atleast_1d(M), indexing="ij")
    vals = np.asarray(values, dtype=float).reshape(PP.shape)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("P", "M", "value"))
        for a, b, v in zip(PP.ravel(), MM.ravel(), vals.ravel()):
            w.writerow((repr(float(a)), repr(float(b)), repr(float(v))))


def read_grid_csv(path):
    """Inverse of :func:`write_grid_csv`: ``(P nodes, M nodes, values)``."""
    rows = np.array([[float(r["P"]), float(r["M"]), float(r["value"])] for r in read_csv(path)])
    P = np.unique(rows[:, 0])
    M = np.unique(rows[:, 1])
    return P, M, rows[:, 2].reshape(P.size, M.size)


def write_olne_csv(path, est):
    """One row per sweep start with the selected target and its welfare."""
    two_d = est.dim == "2d"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    head = ["P0"] + (["M0"] if two_d else []) + ["L0", "target_P"] + (["target_M"] if two_d else []) \
        + ["welfare", "accepted_targets_count"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(head)
        for r in est.sweep_:
            ss = est.targets_[r.target] if r.ok else None
            L0 = r.solution.y[2 if two_d else 1, 0] * 1.0 if r.ok else math.nan
            row = [r.start[0]] + ([r.start[1]] if two_d else []) + [L0, ss.P if ss else math.nan]
            row += ([ss.M if ss else math.nan] if two_d else []) + [r.welfare, len(r.accepted)]
            w.writerow([_fmt(float(v)) if not isinstance(v, (int, np.integer)) else str(v) for v in row])


def dump_grids(row: ResultRow, out_dir) -> list:
    """Value, strategy and P-velocity grids of a solved experiment; returns the files written."""
    est = row.estimator
    out = Path(out_dir)
    written = []
    if row.concept == "olne":
        f = out / f"{row.label}-olne.csv"
        write_olne_csv(f, est)
        written.append(f)
        grid = est.grid_
        if grid is None:
            return written
        L = est.L0_ * est.params_.n
        V = est.welfare_
    else:
        grid = est.grid_
        V = _individual(row.concept, row.n, row.rho, est.result_.V)
        L = est.params_.n * est.result_.G
    p = est.params_
    if isinstance(grid, Grid2D):
        P, M = grid.p.nodes, grid.m.nodes
        PP, MM = grid.mesh()
    else:
        P, M = grid.nodes, np.array([row.M_const])
        PP, MM = P, np.full(P.shape, row.M_const)
    Pdot = L.reshape(PP.shape) + f_water(PP, MM, p)
    for name, vals in (("value", V), ("loading", L), ("P_velocity", Pdot)):
        f = out / f"{row.label}-{name}.csv"
        write_grid_csv(f, P, M, np.asarray(vals).reshape(P.size, M.size))
        written.append(f)
    if isinstance(grid, Grid2D):
        f = out / f"{row.label}-M_velocity.csv"
        write_grid_csv(f, P, M, g_sediment(PP, MM, p))
        written.append(f)
    if row.steady:
        f = out / f"{row.label}-steady.csv"
        write_steady_csv(f, row.steady)
        written.append(f)
    return written


def load_seed(config: ExperimentConfig):
    """Warm start ``(V0, G0)`` from a directory of dumped value/loading grids, if configured."""
    if not config.seed_grids:
        return None
    base = Path(config.seed_grids)
    label = config.label
    _, _, V = read_grid_csv(base / f"{label}-value.csv")
    _, _, L = read_grid_csv(base / f"{label}-loading.csv")
    p = config.params()
    if config.concept == "coop":
        V = V + math.log(config.n) / p.rho
    G = L / p.n
    if config.dim == "1d":
        V, G = V[:, 0], G[:, 0]
    return V, G


# ---------------------------------------------------------------------------
# reference fixture

# Each cell: steady states as (P, M or None, L, V) and the per-agent V-range.
# The cooperative V entries are already individual welfare.
REFERENCE = {
    ("coop", "1d", 2, 179.0): dict(states=[(0.85, None, 0.34, -44)], V_range=(-43, -67)),
    ("olne", "1d", 2, 179.0): dict(states=[(0.95, None, 0.34, -45), (2.98, None, 0.44, -58),
                                           (3.81, None, 0.8, -81)], V_range=(-43, -86)),
    ("fbne", "1d", 2, 179.0): dict(states=[(0.82, None, 0.34, -44)], V_range=(-43, -71)),
    ("coop", "1d", 3, 179.0): dict(states=[(0.85, None, 0.34, -54)], V_range=(-53, -77)),
    ("olne", "1d", 3, 179.0): dict(states=[(0.99, None, 0.35, -55), (2.51, None, 1.35, -65),
                                           (4.56, None, 1.21, -106)], V_range=(-53, -110)),
    ("fbne", "1d", 3, 179.0): dict(states=[(0.8, None, 0.34, -54)], V_range=(-53, -86)),
    ("coop", "1d", 2, 240.0): dict(states=[(0.6, None, 0.24, -51), (1.48, None, 0.0003, -106),
                                           (4.65, None, 0.35, -129)], V_range=(-49, -133)),
    ("olne", "1d", 2, 240.0): dict(states=[(0.63, None, 0.24, -51), (1.48, None, 0.0003, -106),
                                           (5.28, None, 0.71, -124)], V_range=(-50, -140)),
    ("fbne", "1d", 2, 240.0): dict(states=[(0.58, None, 0.24, -51), (1.48, None, 0.0006, -110),
                                           (4.63, None, 0.34, -129)], V_range=(-50, -134)),
    ("coop", "1d", 3, 240.0): dict(states=[(0.60, None, 0.24, -61), (1.48, None, 0.0003, -116),
                                           (4.65, None, 0.35, -139)], V_range=(-59, -143)),
    ("olne", "1d", 3, 240.0): dict(states=[(0.64, None, 0.24, -61), (1.48, None, 0.0003, -116),
                                           (5.80, None, 1.04, -162)], V_range=(-59, -163)),
    ("fbne", "1d", 3, 240.0): dict(states=[(0.57, None, 0.24, -61), (1.48, None, 0.0008, -128),
                                           (4.61, None, 0.33, -139)], V_range=(-60, -145)),
    ("coop", "2d", 2, None): dict(states=[(0.774, 194.2, 0.31, -46)], V_range=(-39, -130)),
    ("olne", "2d", 2, None): dict(states=[(0.87, 190, 0.32, -45), (2.34, 160, 0.49, -48),
                                          (3.37, 173, 0.68, -71)], V_range=(-40, -137)),
    ("fbne", "2d", 2, None): dict(states=[(0.78, 193.95, 0.31, -46)], V_range=(-40, -132)),
    ("coop", "2d", 3, None): dict(states=[(0.774, 194.2, 0.31, -56)], V_range=(-49, -140)),
    ("olne", "2d", 3, None): dict(states=[(4.81, 208, 0.93, -121)], V_range=(-72, -158)),
    ("fbne", "2d", 3, None): dict(states=[(0.72, 196, 0.30, -56)], V_range=(-49, -144)),
}

# intermediate entries whose welfare the reference reports as a jump across the threshold
REFERENCE_JUMPS = {
    ("olne", "1d", 2, 179.0): (2.98, -58, -78),
    ("olne", "1d", 3, 179.0): (2.51, -65, -101),
    ("olne", "1d", 2, 240.0): (1.48, -89, -124),
    ("fbne", "1d", 2, 240.0): (1.48, -93, -118),
    ("olne", "1d", 3, 240.0): (1.48, -99, -148),
    ("fbne", "1d", 3, 240.0): (1.48, -109, -131),
}


@dataclass(frozen=True)
class Tolerances:
    P: float
    M: float
    L: float
    rel_V: float = 0.03
    rel_range: float = 0.05


def default_tolerances(concept, dim) -> Tolerances:
    if dim == "1d":
        return Tolerances(P=0.02 if concept == "olne" else 0.03, M=0.0, L=0.01 if concept != "olne" else 0.02)
    if concept == "olne":
        return Tolerances(P=0.05, M=3.0, L=0.03)
    if concept == "coop":
        return Tolerances(P=0.02, M=1.0, L=0.01)
    return Tolerances(P=0.03, M=1.5, L=0.01)


def reference_key(row_or_config):
    r = row_or_config
    M = float(r.M if hasattr(r, "M") else r.M_const) if r.dim == "1d" else None
    return (r.concept, r.dim, int(r.n), M)


@dataclass
class CellCheck:
    label: str
    cell: str
    expected: float
    computed: float
    tol: float
    passed: bool

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag}  {self.label:<18} {self.cell:<14} expected {self.expected:>9.4f}  "
                f"computed {self.computed:>9.4f}  tol {self.tol:.4g}")


def _rel_check(label, cell, expected, computed, rho, rel):
    e, c = rho * expected, rho * computed
    ok = bool(np.isfinite(c) and abs(c - e) <= rel * abs(e))
    return CellCheck(label, cell, e, c, rel * abs(e), ok)


def compare_reference(row: ResultRow, tolerances: Tolerances | None = None, reference=None) -> list:
    """Per-cell checks of one row against the fixture.

    Each reference state is matched to the nearest computed state (in P,
    then M), stable or not. Welfare entries are compared as ``rho * V``
    with a relative tolerance; the V-range with the looser ``rel_range``.
    """
    key = reference_key(row)
    ref = (reference or REFERENCE).get(key)
    if ref is None:
        return []
    tol = tolerances or default_tolerances(row.concept, row.dim)
    checks = []
    label = row.label
    if row.status != "OK" and not row.steady:
        return [CellCheck(label, "status", 0.0, math.nan, 0.0, False)]
    comp = row.steady
    for k, (P, M, L, V) in enumerate(ref["states"]):
        if not comp:
            checks.append(CellCheck(label, f"P*[{k}]", P, math.nan, tol.P, False))
            continue
        dist = [abs(s["P_star"] - P) + (abs(s["M_star"] - M) / 100.0 if M is not None else 0.0) for s in comp]
        s = comp[int(np.argmin(dist))]
        checks.append(CellCheck(label, f"P*[{k}]", P, s["P_star"], tol.P, abs(s["P_star"] - P) <= tol.P))
        if M is not None:
            checks.append(CellCheck(label, f"M*[{k}]", M, s["M_star"], tol.M, abs(s["M_star"] - M) <= tol.M))
        checks.append(CellCheck(label, f"L*[{k}]", L, s["L_star"], tol.L, abs(s["L_star"] - L) <= tol.L))
        checks.append(_rel_check(label, f"rhoV*[{k}]", V, s["welfare"], row.rho, tol.rel_V))
    hi, lo = ref["V_range"]
    checks.append(_rel_check(label, "rhoV-range hi", hi, row.V_range[0], row.rho, tol.rel_range))
    checks.append(_rel_check(label, "rhoV-range lo", lo, row.V_range[1], row.rho, tol.rel_range))
    return checks


def table1_configs(base: ExperimentConfig | None = None):
    """The eighteen reference cells as configs; ``base`` supplies shared solver settings."""
    base = base or ExperimentConfig()
    out = []
    for dim in DIMS:
        for M in ((179.0, 240.0) if dim == "1d" else (None,)):
            for n in (2, 3):
                for concept in CONCEPTS:
                    out.append(base.replace(concept=concept, dim=dim, n=n, M=M,
                                            p_count=601 if dim == "1d" else 101))
    return out


def summary_text(rows, checks) -> str:
    lines = ["# reference comparison", ""]
    for r in rows:
        lines.append(f"{r.label:<18} status {r.status:<10} runtime {r.runtime:8.1f}s  "
                     f"V-range ({r.V_range[0]:.2f}, {r.V_range[1]:.2f})")
        for s in r.steady:
            M = f", M={s['M_star']:.2f}" if r.dim == "2d" else ""
            lines.append(f"    P={s['P_star']:.4f}{M}  L={s['L_star']:.4f}  stable={s['stable']}  "
                         f"V={s['welfare']:.2f}")
    lines.append("")
    lines.extend(c.line() for c in checks)
    failed = sum(not c.passed for c in checks)
    lines.append("")
    lines.append(f"{len(checks) - failed} of {len(checks)} cells within tolerance")
    return "\n".join(lines) + "\n"
