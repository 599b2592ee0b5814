import math

import numpy as np
import pytest

import fraclb.inequalities as ineq
from fraclb.errors import DomainError
from fraclb.geometry import Field, build_grid
from fraclb.inequalities import (
    EnsembleSpec,
    constantin_vicol_probe,
    cordoba_inequality_check,
    ensemble_statistics,
    lambda_power,
    sample_ensemble,
    sobolev_exponent,
    sobolev_ratio,
    write_ensemble_csv,
    zonal_bump,
)
from fraclb.spectral import fractional_apply_spectral


def test_lambda_convention(sphere_grid16):
    f = sample_ensemble(EnsembleSpec(1, 5, seed=3), sphere_grid16)[0]
    f = Field(sphere_grid16, f.values - f.mean())
    # Lambda^a = (-Delta)^{a/2}
    assert np.allclose(lambda_power(f, 0.8).values, fractional_apply_spectral(f, 0.4).values, atol=1e-12)


def test_sobolev_exponent():
    assert sobolev_exponent(2, 0.4) == pytest.approx(10 / 3)
    assert sobolev_exponent(2, 0.25) == pytest.approx(8 / 3)


def test_sobolev_ratio_constant(S2):
    grid = build_grid(S2, 24)
    s = 0.4
    p = sobolev_exponent(2, s)
    want = (4 * math.pi) ** (1 / p - 0.5)
    assert sobolev_ratio(Field(grid, np.full(grid.size, 2.0)), s) == pytest.approx(want, rel=1e-12)


def test_sobolev_ratio_range(sphere_grid16, T1):
    f = Field(sphere_grid16, np.ones(sphere_grid16.size))
    for s in (0.0, 0.5, 0.7):
        with pytest.raises(DomainError):
            sobolev_ratio(f, s)
    g = build_grid(T1, 16)
    with pytest.raises(DomainError):
        sobolev_ratio(Field(g, np.ones(16)), 0.3)


def test_sobolev_ratio_bumps_bounded(S2):
    grid = build_grid(S2, 24)
    ratios = [sobolev_ratio(zonal_bump(grid, w), 0.4) for w in (1.0, 0.5, 0.3, 0.2, 0.15)]
    assert all(np.isfinite(ratios)) and max(ratios) < 2 * min(ratios)


def test_ensemble_reproducible(sphere_grid16):
    spec = EnsembleSpec(5, 6, seed=42)
    a = sample_ensemble(spec, sphere_grid16)
    b = sample_ensemble(spec, sphere_grid16)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
    assert all(x.l2_norm() == pytest.approx(1.0) for x in a)
    c = sample_ensemble(EnsembleSpec(5, 6, seed=43), sphere_grid16)
    assert not np.array_equal(a[0].values, c[0].values)
    with pytest.raises(DomainError):
        EnsembleSpec(0, 6)


def test_cordoba_examples(T1, sphere_grid16):
    grid = build_grid(T1, 64)
    x = grid.points[:, 0]
    # 2 sin^2 x + cos 2x = 1
    m, holds = cordoba_inequality_check(Field(grid, np.sin(x)), 1.0)
    assert holds and m == pytest.approx(1.0, abs=1e-12)
    m, holds = cordoba_inequality_check(Field(grid, np.full(grid.size, 2.0)), 1.0)
    assert holds and abs(m) < 1e-12
    m, holds = cordoba_inequality_check(Field(sphere_grid16, np.full(sphere_grid16.size, -1.5)), 0.5)
    assert holds and abs(m) < 1e-12


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_cordoba_sphere_ensemble(alpha, sphere_grid16):
    fields = sample_ensemble(EnsembleSpec(20, 8, seed=7), sphere_grid16)
    assert all(cordoba_inequality_check(f, alpha)[1] for f in fields)


def test_cordoba_errors(sphere_grid16, monkeypatch, T1):
    f = Field(sphere_grid16, np.ones(sphere_grid16.size))
    for alpha in (0.0, 2.0):
        with pytest.raises(DomainError):
            cordoba_inequality_check(f, alpha)
    with pytest.raises(DomainError):
        cordoba_inequality_check(Field(sphere_grid16, np.ones(sphere_grid16.size) * (1 + 1j)), 1.0)
    # without the 2x refinement f^2 cannot be represented
    monkeypatch.setattr(ineq, "build_grid", lambda M, res: build_grid(M, res // 2))
    grid = build_grid(T1, 32)
    x = grid.points[:, 0]
    with pytest.raises(DomainError):
        cordoba_inequality_check(Field(grid, np.sin(12 * x)), 1.0)


def test_cv_sine(T1):
    grid = build_grid(T1, 64)
    x = grid.points[:, 0]
    rep = constantin_vicol_probe(Field(grid, np.sin(x)), 0.5)
    assert rep.mask.sum() > 0
    assert np.isfinite(rep.fit_display) and np.isfinite(rep.fit_nonlocal)
    assert rep.display_violations + np.isfinite(rep.c_display).sum() == rep.mask.sum()


def test_cv_constant_degenerate(T1):
    grid = build_grid(T1, 32)
    rep = constantin_vicol_probe(Field(grid, np.ones(grid.size)), 0.5)
    assert rep.mask.sum() == 0 and math.isnan(rep.fit_display)


def test_cv_scaling_invariance(T2):
    grid = build_grid(T2, 24)
    for f in sample_ensemble(EnsembleSpec(4, 4, seed=5), grid):
        a = constantin_vicol_probe(f, 0.5)
        b = constantin_vicol_probe(Field(grid, 2 * f.values), 0.5)
        assert np.allclose(a.c_display, b.c_display, rtol=1e-10, equal_nan=True)
        assert np.allclose(a.c_nonlocal, b.c_nonlocal, rtol=1e-10, equal_nan=True)


def test_cv_domain(sphere_grid16, T1):
    with pytest.raises(DomainError):
        constantin_vicol_probe(Field(sphere_grid16, np.ones(sphere_grid16.size)), 0.5)
    grid = build_grid(T1, 16)
    with pytest.raises(DomainError):
        constantin_vicol_probe(Field(grid, np.ones(16)), 1.0)


def test_ensemble_statistics(sphere_grid16):
    fields = sample_ensemble(EnsembleSpec(12, 8, seed=2024), sphere_grid16)
    stats = ensemble_statistics(fields, 0.4)
    assert stats["ratio_max"] <= 10 * stats["ratio_median"]
    assert all(stats["cordoba_holds"].values())
    again = ensemble_statistics(sample_ensemble(EnsembleSpec(12, 8, seed=2024), sphere_grid16), 0.4)
    assert again["ratio_max"] == stats["ratio_max"]


def test_ensemble_csv(tmp_path):
    path = tmp_path / "e.csv"
    write_ensemble_csv([(0, 0.4, "ratio_max", 1.25, 7), (0, 1.0, "cordoba_min", 0.5, 7)], path)
    assert path.read_text().splitlines() == [
        "ensemble_id,s_or_alpha,statistic,value,seed",
        "0,0.4,ratio_max,1.25,7",
        "0,1.0,cordoba_min,0.5,7",
    ]
