import csv
import math
import subprocess
import sys

import pytest

import fraclb.cli as cli
from fraclb.cli import ConfigError, ExperimentConfig, load_config, main, run_experiment
from fraclb.errors import ConvergenceError
from fraclb.geometry import ManifoldGeometry


def write_config(path, body):
    path.write_text("[experiment]\n" + body)
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


SPHERE = """manifold = sphere
s = 0.5
resolutions = 32, 64
methods = spectral, heat, pv
band_limit = 8
seed = 3
"""


@pytest.fixture(scope="module")
def sphere_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("run")
    cfg = write_config(tmp / "exp.ini", SPHERE)
    out = tmp / "out"
    status = main(["--out", str(out), "run", str(cfg)])
    return status, out, cfg


def test_three_way_comparison(sphere_run):
    status, out, _ = sphere_run
    assert status == 0
    heat = read_csv(out / "heat_vs_spectral.csv")
    assert heat[0][:6] == ["s", "band_limit", "method", "L2_error", "Linf_error", "runtime_seconds"]
    assert [(r[2], r[6]) for r in heat[1:]] == [("spectral", "32"), ("heat", "32"), ("spectral", "64"), ("heat", "64")]
    assert all(float(r[3]) < 1e-4 for r in heat[1:])
    assert all(r[5] == "" for r in heat[1:])
    kern = read_csv(out / "kernel_methods.csv")
    assert kern[0][:11] == [
        "manifold", "n", "s", "resolution", "epsilon", "mode", "L2_rel_error", "Linf_rel_error",
        "kernel_limit_estimate", "kernel_limit_target", "slope",
    ]
    errs = [float(r[6]) for r in kern[1:]]
    assert len(errs) == 2 and errs[1] < errs[0] and errs[1] < 5e-2
    assert float(kern[1][9]) == pytest.approx(1 / (2 * math.pi))
    assert read_csv(out / "summary.csv") == [["criterion", "check", "result", "detail"]]


def test_rerun_bit_exact(sphere_run, tmp_path):
    _, out, cfg = sphere_run
    again = tmp_path / "again"
    assert main(["--out", str(again), "--threads", "3", "run", str(cfg)]) == 0
    for name in ("heat_vs_spectral.csv", "kernel_methods.csv", "summary.csv"):
        assert (again / name).read_bytes() == (out / name).read_bytes()
        assert b"\r\n" not in (again / name).read_bytes()


def test_timing_flag(tmp_path):
    cfg = write_config(tmp_path / "t.ini", "manifold = torus1\ns = 0.5\nresolutions = 32\nmethods = heat\nband_limit = 4\n")
    assert main(["--out", str(tmp_path / "o"), "run", str(cfg), "--timing"]) == 0
    rows = read_csv(tmp_path / "o" / "heat_vs_spectral.csv")
    assert float(rows[1][5]) >= 0


def test_seed_override_changes_input(tmp_path):
    cfg = write_config(tmp_path / "c.ini", "manifold = torus2\ns = 0.5\nresolutions = 16\nmethods = pv\nband_limit = 4\n")
    main(["--out", str(tmp_path / "a"), "--seed", "1", "run", str(cfg)])
    main(["--out", str(tmp_path / "b"), "--seed", "2", "run", str(cfg)])
    a = read_csv(tmp_path / "a" / "kernel_methods.csv")
    b = read_csv(tmp_path / "b" / "kernel_methods.csv")
    assert a[1][6] != b[1][6]


def test_empty_method_set(tmp_path):
    cfg = write_config(tmp_path / "e.ini", "manifold = sphere\nmethods =\n")
    assert main(["--out", str(tmp_path / "o"), "run", str(cfg)]) == 0
    assert read_csv(tmp_path / "o" / "summary.csv") == [["criterion", "check", "result", "detail"]]
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["summary.csv"]


@pytest.mark.parametrize(
    "body,key",
    [
        ("manifold = sphere\ns = 0.5\nresolutions = 32\nmethods = pv\nepsilon_multiple = 1\n", "epsilon_multiple"),
        ("manifold = sphere\ns = 0.5\nresolutions = 8\nmethods = spectral\nband_limit = 8\n", "band_limit"),
        ("manifold = sphere\ns = 1.5\nresolutions = 32\nmethods = spectral\n", "s"),
        ("manifold = sphere\ns = 0.5\nresolutions = 32\nmethods = magic\n", "methods"),
        ("manifold = klein\ns = 0.5\nresolutions = 32\nmethods = spectral\n", "manifold"),
        ("manifold = sphere\ns = 0.5\nresolutions = 32\nmethods = riesz\n", "s"),
        ("manifold = torus1\ns = -0.5\nresolutions = 32\nmethods = riesz\n", "s"),
        ("manifold = sphere\ns = 0.5\nresolutions = 32\nmethods = parametrix\nz = 2\n", "z"),
        ("manifold = sphere\ns = 0.5\nresolutions = 32\nmethods = parametrix\ndepth = 2\n", "depth"),
        ("manifold = sphere\nchecks = nonexistent\n", "checks"),
        ("manifold = sphere\ns = abc\nmethods = spectral\n", "value"),
    ],
)
def test_validation_errors(tmp_path, capsys, body, key):
    cfg = write_config(tmp_path / "bad.ini", body)
    out = tmp_path / "o"
    assert main(["--out", str(out), "run", str(cfg)]) == 1
    err = capsys.readouterr().err.strip().split("\t")
    assert err[0] == "error" and err[1] == f"key={key}"
    assert not out.exists()


def test_missing_section(tmp_path, capsys):
    path = tmp_path / "x.ini"
    path.write_text("[other]\na = 1\n")
    assert main(["run", str(path)]) == 1
    assert "key=experiment" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.ini")]) == 1


def test_load_config_inline_comments(tmp_path):
    cfg = load_config(
        write_config(tmp_path / "c.ini", "manifold = torus2  ; flat\ns = 0.25, 0.5 # two\nresolutions = 16\nmethods = spectral\nband_limit = 4\nz = -1+0.5j\n")
    )
    assert cfg.manifold == ManifoldGeometry.torus(2)
    assert cfg.s_values == [0.25, 0.5] and cfg.z == complex(-1, 0.5)


def test_nonconvergence_is_flagged(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise ConvergenceError("tail too large")

    monkeypatch.setattr(cli, "fractional_apply_heat", boom)
    cfg = ExperimentConfig(ManifoldGeometry.torus(1), [0.5], [32], methods=["heat"], band_limit=4, output=tmp_path / "o")
    assert run_experiment(cfg) == 0
    row = read_csv(tmp_path / "o" / "heat_vs_spectral.csv")[1]
    assert row[3] == "nan" and row[7].startswith("nonconvergence")


def test_parametrix_outputs(tmp_path):
    cfg = write_config(tmp_path / "p.ini", "manifold = sphere\nresolutions = 16\nmethods = parametrix\nband_limit = 4\nz = -4\ndepth = 1\n")
    assert main(["--out", str(tmp_path / "o"), "run", str(cfg)]) == 0
    rem = read_csv(tmp_path / "o" / "parametrix_remainder.csv")
    assert rem[0] == ["N", "z_re", "z_im", "residual_L2"] and [r[0] for r in rem[1:]] == ["0", "1"]
    assert all(0 < float(r[3]) < 1 for r in rem[1:])
    cmp_rows = read_csv(tmp_path / "o" / "parametrix_vs_resolvent.csv")
    assert cmp_rows[0][:3] == ["manifold", "resolution", "N"]
    # at z = -4 the cutoff truncation dominates, about 10% on S2
    assert float(cmp_rows[1][5]) < 0.2


def test_summary_reflects_checks(tmp_path):
    cfg = write_config(tmp_path / "s.ini", "manifold = sphere\nchecks = contour_scalar, transport_u0\n")
    assert main(["--out", str(tmp_path / "o"), "run", str(cfg)]) == 0
    rows = read_csv(tmp_path / "o" / "summary.csv")
    assert [r[:3] for r in rows[1:]] == [["1", "contour_scalar", "pass"], ["6", "transport_u0", "pass"]]


def test_list(capsys):
    assert main(["list"]) == 0
    names = [line.split("\t")[0] for line in capsys.readouterr().out.splitlines()]
    assert {"kernel_diagonal_limit", "heat_vs_spectral", "contour_scalar"} <= set(names)
    assert len(names) == 10
    assert main(["list", "--module", "pvkernel"]) == 0
    sub = [line.split("\t")[0] for line in capsys.readouterr().out.splitlines()]
    assert sub == ["kernel_diagonal_limit", "pv_accuracy", "riesz_route"]
    assert main(["list", "--module", "nosuch"]) == 0
    assert capsys.readouterr().out == ""


def test_check_verb(capsys, tmp_path):
    assert main(["--out", str(tmp_path), "check", "contour_scalar"]) == 0
    assert capsys.readouterr().out.startswith("PASS")
    assert read_csv(tmp_path / "summary.csv")[1][:3] == ["1", "contour_scalar", "pass"]
    assert main(["check", "bogus"]) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fraclb", "list"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "contour_scalar" in proc.stdout


def test_config_error_fields():
    exc = ConfigError("s", "bad")
    assert exc.key == "s" and exc.message == "bad" and str(exc) == "s: bad"
