import csv
import io

import numpy as np
import pytest

from geldg import cli
from geldg.harness import (
    RunConfig,
    _orders,
    dgcl_expected,
    make_config,
    make_rule,
    parse_variant,
    read_config_file,
    rows_to_csv,
    run_command,
)


def parse(text):
    return list(csv.DictReader(io.StringIO(text)))


# ---------------------------------------------------------------- config


def test_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# demo\nproblem = varcoef_sin\nk=2  # quadratic\nmeshes = 20, 40\n\ncfl=0.18\n")
    cfg = make_config(read_config_file(p))
    assert (cfg.problem, cfg.k, cfg.meshes, cfg.cfl) == ("varcoef_sin", 2, [20, 40], 0.18)


@pytest.mark.parametrize("text", ["k 2\n", "colour = red\n"])
def test_config_file_errors(tmp_path, text):
    p = tmp_path / "bad.cfg"
    p.write_text(text)
    with pytest.raises(ValueError):
        read_config_file(p)


@pytest.mark.parametrize(
    "override",
    [{"problem": "nope"}, {"k": 5}, {"rk": 7}, {"cfl": -1}, {"meshes": "0"}, {"limiter": "magic"},
     {"variant": "geldg9"}, {"lf_mode": "both"}, {"splitting": 3}, {"T": 0}],
)
def test_config_validation(override):
    with pytest.raises(ValueError):
        make_config(**override)


def test_config_overrides_and_aliases():
    cfg = make_config({"k": "1", "limiter": "zhang_all_stages"}, k=2, cfl=None)
    assert cfg.k == 2 and cfg.cfl == RunConfig.cfl and cfg.limiter == "zhang"


def test_variants():
    assert parse_variant("geldg3") == ("plus_dxsin", "plus_dxsin")
    assert parse_variant("perturbed:zero:plus_half") == ("zero", "plus_half")
    assert parse_variant("eldg-reference-partition") == ("plus_dxsin", None)
    assert parse_variant("eldg-reference-partition:exact") == ("exact", None)
    for bad in ("perturbed:zero", "perturbed:x:y", "eldg-reference-partition:x"):
        with pytest.raises(ValueError):
            parse_variant(bad)


def test_rules():
    vel = lambda x, t: 2.0 + 0 * x  # noqa: E731
    x = np.array([0.3, 1.0])
    r = make_rule("geldg1", vel, 0.1)
    np.testing.assert_allclose(r.edge_speed(x, 0), 2 + 0.1 * np.sin(x))
    np.testing.assert_allclose(r.cell_speed(x, 0), 2.0)
    r = make_rule("eldg-reference-partition", vel, 0.1)
    expect = 2 + 0.05 * (np.sin(x - 0.05) + np.sin(x + 0.05))
    np.testing.assert_allclose(r.cell_speed(x, 0), expect)
    np.testing.assert_allclose(make_rule("perturbed:plus_half:zero", vel, 0.1).edge_speed(x, 0), 2.5)
    np.testing.assert_allclose(make_rule("perturbed:plus_half:zero", vel, 0.1).cell_speed(x, 0), 0.0)


def test_dgcl_pattern_table():
    assert all(dgcl_expected(n, a, 0) for n in ("exact", "plus_half", "plus_dxsin") for a in ("exact", "plus_half"))
    assert dgcl_expected("plus_half", "exact", 1) and not dgcl_expected("plus_dxsin", "exact", 1)
    assert dgcl_expected("plus_half", "plus_half", 2) and not dgcl_expected("plus_half", "exact", 2)


def test_orders_and_csv():
    assert _orders([4.0, 1.0, 0.25]) == [None, 2.0, 2.0]
    assert _orders([1.0, 0.0]) == [None, None]
    text = rows_to_csv([{"a": 1, "b": None}, {"a": 0.1, "c": True}])
    assert text == "a,b,c\n1,,\n0.1,,true\n"
    assert rows_to_csv([]) == ""


# ---------------------------------------------------------------- commands


def test_converge_single_mesh_has_empty_order():
    text, ok = run_command("converge", make_config(meshes="20", T=0.5))
    rows = parse(text)
    assert ok and len(rows) == 1 and rows[0]["L1_order"] == ""


def test_converge_thresholds():
    cfg = make_config(meshes="20,40", T=1.0, min_order=1.8, max_error=1e-2)
    assert run_command("converge", cfg)[1]
    assert not run_command("converge", make_config(meshes="20,40", T=1.0, min_order=5))[1]


def test_deterministic_output():
    cfg = make_config(problem="varcoef_sin", meshes="16,32", T=0.5, variant="geldg3")
    assert run_command("converge", cfg)[0] == run_command("converge", cfg)[0]


def test_cfl_sweep_marks_instability():
    cfg = make_config(k=1, meshes="40", T=20, cfls="0.1,1", variant="perturbed:zero:zero")
    rows = parse(run_command("cfl-sweep", cfg)[0])
    assert rows[0]["Linf"] != "unstable" and rows[1]["Linf"] == "unstable"


def test_cfl_sweep_reports_tangling():
    cfg = make_config(problem="varcoef_sin", k=1, meshes="20", T=3, cfls="30")
    rows = parse(run_command("cfl-sweep", cfg)[0])
    assert rows[0]["Linf"] == "error:MeshTanglingError"


def test_mass_check_command():
    text, ok = run_command("mass-check", make_config(problem="varcoef_sin", meshes="20", limiter="pp", T=0.5))
    assert ok and float(parse(text)[0]["max_step_drift"]) <= 1e-12


def test_mpp_demo_small():
    base = dict(problem="step", k=2, rk=4, cfl=1, meshes="160", T=5, variant="geldg2")
    rows = parse(run_command("mpp-demo", make_config(limiter="gel_mpp", **base))[0])
    assert float(rows[0]["min"]) >= -1e-12 and float(rows[0]["max"]) <= 1 + 1e-12
    rows = parse(run_command("mpp-demo", make_config(**base))[0])
    assert float(rows[0]["undershoot"]) > 1e-3


def test_mpp_snapshots(tmp_path):
    out = tmp_path / "mpp.csv"
    cfg = make_config(problem="step", k=1, meshes="45", T=2, snapshots=2, out=str(out), limiter="gel_mpp")
    run_command("mpp-demo", cfg)
    assert out.exists()
    assert sorted(p.name for p in tmp_path.iterdir()) == ["mpp.csv", "mpp_N45_t1.csv", "mpp_N45_t2.csv"]


def test_swirl_command_small():
    rows = parse(run_command("swirl", make_config(problem="swirl", k=1, rk=4, cfl=2.5, meshes="10"))[0])
    assert 0 < float(rows[0]["L2"]) < 0.1


def test_swirl_requires_2d():
    with pytest.raises(ValueError):
        run_command("swirl", make_config(problem="const_sin"))


# ---------------------------------------------------------------- CLI


def test_cli_exit_codes(capsys):
    assert cli.main(["converge", "--meshes", "20", "--T", "0.5"]) == 0
    assert "N,L1" in capsys.readouterr().out
    assert cli.main(["converge", "--meshes", "20", "--T", "0.5", "--max-error", "1e-12"]) == 1
    assert cli.main(["converge", "--problem", "missing"]) == 2
    assert "unknown problem" in capsys.readouterr().err


def test_cli_out_file_and_config(tmp_path, capsys):
    cfgfile = tmp_path / "c.cfg"
    cfgfile.write_text("meshes = 20\nT = 0.5\n")
    out = tmp_path / "o.csv"
    assert cli.main(["converge", "--config", str(cfgfile), "--k", "2", "--rk", "3", "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    rows = parse(out.read_text())
    assert rows[0]["N"] == "20" and float(rows[0]["L1"]) < 1e-3


def test_cli_dgcl_default_passes(capsys):
    assert cli.main(["dgcl", "--meshes", "10", "--T", "0.2"]) == 0
    rows = parse(capsys.readouterr().out)
    assert len(rows) == 27 and all(r["match"] == "true" for r in rows)


def test_cli_rejects_unknown_subcommand():
    with pytest.raises(SystemExit):
        cli.main(["plot"])
