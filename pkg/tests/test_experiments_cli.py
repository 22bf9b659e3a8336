import json
import math

import numpy as np
import pytest

from lakegame import experiments as ex
from lakegame.cli import main


def test_config_errors_name_the_key():
    with pytest.raises(ValueError, match="'concept'"):
        ex.ExperimentConfig(concept="nash")
    with pytest.raises(ValueError, match="'n'"):
        ex.ExperimentConfig(n=0)
    with pytest.raises(ValueError, match="'M'"):
        ex.ExperimentConfig(dim="1d", M=None)
    with pytest.raises(ValueError, match="'lake.kappa'"):
        ex.ExperimentConfig.from_mapping({"lake.kappa": 1.0})
    with pytest.raises(ValueError, match="'grid_size'"):
        ex.ExperimentConfig.from_mapping({"grid_size": 3})
    with pytest.raises(ValueError, match="'lake.rho'"):
        ex.ExperimentConfig(lake={"rho": "fast"})


def test_config_file_formats(tmp_path):
    a = tmp_path / "a.json"
    a.write_text(json.dumps({"concept": "coop", "n": 3, "lake": {"c": 0.2}}))
    b = tmp_path / "b.cfg"
    b.write_text("concept = coop  # comment\nn = 3\nlake.c = 0.2\n")
    ca, cb = ex.ExperimentConfig.from_file(a), ex.ExperimentConfig.from_file(b)
    assert ca == cb
    assert ca.params().n == 1 and ca.params().c == 0.2
    assert ca.label == "coop-1d-n3-M179"
    assert ex.ExperimentConfig(dim="2d").M is None


def test_steady_csv_round_trip(tmp_path):
    rows = [dict(concept="olne", dim="1d", n=2, M_const=179.0, P_star=0.9442, M_star=179.0, L_star=0.3467,
                 stable=True, welfare=-44.35)]
    path = tmp_path / "s.csv"
    ex.write_steady_csv(path, rows)
    back = ex.read_csv(path)
    assert list(back[0]) == list(ex.STEADY_FIELDS)
    assert float(back[0]["P_star"]) == 0.9442 and back[0]["stable"] == "True"


def test_grid_csv_round_trip(tmp_path):
    P, M = np.linspace(0, 6, 7), np.linspace(150, 200, 3)
    vals = np.random.default_rng(0).normal(size=(7, 3))
    ex.write_grid_csv(tmp_path / "g.csv", P, M, vals)
    P2, M2, v2 = ex.read_grid_csv(tmp_path / "g.csv")
    np.testing.assert_array_equal(P2, P)
    np.testing.assert_array_equal(M2, M)
    np.testing.assert_array_equal(v2, vals)


def test_table1_configs_cover_reference():
    keys = {ex.reference_key(c) for c in ex.table1_configs()}
    assert keys == set(ex.REFERENCE)


def test_compare_reference_scales_welfare():
    row = ex.ResultRow("olne-1d-n2-M179", "olne", "1d", 2, 179.0, 0.043,
                       steady=[dict(P_star=0.95, M_star=179.0, L_star=0.34, stable=True, welfare=-45.5)],
                       V_range=(-43.0, -86.0))
    checks = {c.cell: c for c in ex.compare_reference(row)}
    assert checks["P*[0]"].passed and checks["rhoV*[0]"].passed
    assert checks["rhoV*[0]"].expected == pytest.approx(-45 * 0.043)
    assert not checks["P*[1]"].passed
    assert "PASS" in checks["P*[0]"].line()


def test_failed_experiment_reports_status():
    row = ex.run_experiment(ex.ExperimentConfig(concept="fbne", p_count=2, max_iter=2, T=1.0))
    assert row.status.startswith("FAILED")


def test_cli_steady_command(tmp_path, capsys):
    code = main(["steady", "--concept", "olne", "--n", "2", "--M", "240", "--out", str(tmp_path)])
    assert code == 0
    rows = ex.read_csv(tmp_path / "olne-1d-n2-M240-steady.csv")
    stable = [float(r["P_star"]) for r in rows if r["stable"] == "True"]
    assert stable == pytest.approx([0.624, 5.277], abs=1e-3)
    assert "wrote" in capsys.readouterr().out


def test_cli_bad_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"concept": "olne", "mystery": 1}')
    assert main(["steady", "--config", str(cfg)]) == 2
    assert "'mystery'" in capsys.readouterr().err
    assert main(["steady", "--set", "lake.q=abc"]) == 2


def test_cli_solve_and_seed_round_trip(tmp_path):
    args = ["--concept", "fbne", "--n", "2", "--M", "179", "--set", "p_count=61", "--set", "T=200",
            "--out", str(tmp_path / "a")]
    assert main(["dump-grids", *args]) == 0
    files = {p.name for p in (tmp_path / "a").iterdir()}
    assert {"fbne-1d-n2-M179-value.csv", "fbne-1d-n2-M179-loading.csv",
            "fbne-1d-n2-M179-P_velocity.csv", "fbne-1d-n2-M179-steady.csv"} <= files
    cfg = ex.ExperimentConfig(p_count=61, T=200.0, seed_grids=str(tmp_path / "a"))
    V0, G0 = ex.load_seed(cfg)
    est = ex.build_estimator(cfg).fit()
    # a warm start at the fixed point converges at once
    assert est.converged_ and est.n_iter_ <= 2
    np.testing.assert_allclose(est.result_.V, V0, atol=1e-3)
    assert main(["solve", *args[:-1], str(tmp_path / "b")]) == 0
    summary = json.loads((tmp_path / "b" / "fbne-1d-n2-M179-summary.json").read_text())
    assert summary["status"] == "OK" and not math.isnan(summary["V_range"][0])


def test_cli_table1_report(tmp_path, monkeypatch, capsys):
    small = [ex.ExperimentConfig(concept="olne", n=2, M=240.0, starts=13),
             ex.ExperimentConfig(concept="coop", n=2, M=179.0, p_count=61, T=200.0, coop_init="guess")]
    monkeypatch.setattr(ex, "table1_configs", lambda base: [c.replace(out=base.out) for c in small])
    code = main(["table1", "--out", str(tmp_path)])
    text = (tmp_path / "table1-report.txt").read_text()
    assert "olne-1d-n2-M240" in text and "coop-1d-n2-M179" in text
    assert text.count("PASS") + text.count("FAIL") == len([l for l in text.splitlines() if l[:4] in ("PASS", "FAIL")])
    assert code == (0 if "FAIL" not in text else 1)
    assert (tmp_path / "olne-1d-n2-M240" / "olne-1d-n2-M240-steady.csv").exists()
