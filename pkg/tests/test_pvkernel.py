import math

import numpy as np
import pytest
from scipy import integrate, special

from fraclb.errors import DomainError, GridMismatchError
from fraclb.geometry import Field, build_grid
from fraclb.inequalities import zonal_bump
from fraclb.pvkernel import (
    KernelSpec,
    PVScheme,
    c_ns_constant,
    calibrate_correction,
    diagonal_asymptotics_check,
    exact_kernel_smooth_part,
    exact_offdiagonal_kernel,
    kernel_eval,
    pv_apply,
    riesz_apply,
    smooth_cutoff,
    sphere_kernel_table,
    torus_lattice_kernel,
)
from fraclb.spectral import default_basis, fractional_apply_spectral


def band_field(grid, rng, band):
    basis = default_basis(grid)
    if grid.manifold.is_sphere:
        ell = np.array([lab[0] for lab in basis.labels])
    else:
        ell = np.array([max(abs(k) for k in lab) for lab in basis.labels])
    a = np.where((ell <= band) & (basis.lambdas > 0), rng.standard_normal(len(basis)), 0.0)
    return Field(grid, np.real(basis.synthesize(a)))


def sphere_mode(grid, label):
    basis = default_basis(grid)
    a = np.zeros(len(basis))
    a[basis.index(label)] = 1.0
    return Field(grid, np.real(basis.synthesize(a)))


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


# --- constants and kernels --------------------------------------------------------


def test_c_ns_examples():
    assert c_ns_constant(1, 0.5) == pytest.approx(1 / math.pi, rel=1e-14)
    assert c_ns_constant(2, 0.5) == pytest.approx(1 / (2 * math.pi), rel=1e-14)
    assert c_ns_constant(1, 0.5) == pytest.approx(0.31831, abs=1e-5)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_c_ns_matches_one_dimensional_symbol(s):
    # c int_R (1 - cos y) |y|^{-1-2s} dy = 1 fixes the constant of |k|^{2s}
    body = integrate.quad(lambda y: (1 - math.cos(y)) * y ** (-1 - 2 * s), 0, 1)[0]
    tail = integrate.quad(lambda y: y ** (-1 - 2 * s), 1, np.inf)[0]
    osc = integrate.quad(lambda y: y ** (-1 - 2 * s), 1, np.inf, weight="cos", wvar=1)[0]
    assert c_ns_constant(1, s) == pytest.approx(1 / (2 * (body + tail - osc)), rel=1e-8)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_c_ns_matches_two_dimensional_symbol(s):
    # c 2 pi int_0^inf (1 - J0(r)) r^{-1-2s} dr = 1
    body = integrate.quad(lambda r: (1 - special.j0(r)) * r ** (-1 - 2 * s), 0, 1)[0]
    tail = integrate.quad(lambda r: r ** (-1 - 2 * s), 1, np.inf)[0]
    osc = integrate.quad(lambda r: special.j0(r) * r ** (-1 - 2 * s), 1, 400, limit=4000)[0]
    assert c_ns_constant(2, s) == pytest.approx(1 / (2 * math.pi * (body + tail - osc)), rel=1e-5)


@pytest.mark.parametrize("n", [1, 2])
def test_c_ns_small_s_limit(n):
    s = 1e-6
    assert c_ns_constant(n, s) / s == pytest.approx(special.gamma(n / 2) / math.pi ** (n / 2), rel=1e-5)


def test_c_ns_domain():
    for n, s in ((1, 0.0), (1, 1.0), (2, -1.0), (1, -0.5), (1, -0.75)):
        with pytest.raises(DomainError):
            c_ns_constant(n, s)
    assert c_ns_constant(2, -0.5) > 0


def test_smooth_cutoff():
    r = 1.2
    d = np.linspace(0, 2, 401)
    chi = smooth_cutoff(d, r)
    assert np.all(chi[d <= r / 2] == 1.0) and np.all(chi[d >= r] == 0.0)
    assert np.all(np.diff(chi) <= 0)


def test_kernel_eval_examples(S2, T1, T2):
    spec = KernelSpec.default(T1, 0.5)
    for d in (0.05, 0.3, 1.0):
        assert kernel_eval([0.0], [d], spec) == pytest.approx(spec.c_ns / d**2, rel=1e-14)
    spec2 = KernelSpec.default(T2, 0.25)
    assert kernel_eval([0.0, 0.0], [0.3, 0.4], spec2) == pytest.approx(spec2.c_ns / 0.5**2.5, rel=1e-14)

    sspec = KernelSpec.default(S2, 0.5)
    want = c_ns_constant(2, 0.5) * math.sqrt(0.2 / math.sin(0.2)) / 0.2**3
    assert kernel_eval([1.0, 0.0], [1.2, 0.0], sspec) == pytest.approx(want, rel=1e-12)

    assert kernel_eval([0.0, 0.0], [2.0, 0.0], sspec) == 0.0
    with pytest.raises(DomainError):
        kernel_eval([1.0, 0.0], [1.0, 0.0], sspec)
    with pytest.raises(DomainError):
        KernelSpec(S2, 0.5, cutoff_radius=4.0)


def test_kernel_correction_term(S2):
    base = KernelSpec.default(S2, 0.5)
    corr = KernelSpec.default(S2, 0.5, correction=0.01)
    d = 0.3
    diff = corr.of_distance(d) - base.of_distance(d)
    assert diff == pytest.approx(0.01 * d / d**3, rel=1e-12)


@pytest.mark.parametrize("d", [0.5, 2.0, 3.0])
def test_exact_kernel_torus_lattice_oracle(d, T1):
    assert exact_offdiagonal_kernel(T1, [0.0], [d], 0.5) == pytest.approx(float(torus_lattice_kernel([[d]], 0.5)[0]), rel=1e-9)
    smooth = exact_kernel_smooth_part(T1, [0.0], [d], 0.5)
    assert 0 < smooth < exact_offdiagonal_kernel(T1, [0.0], [d], 0.5)


def test_exact_kernel_torus2_lattice_oracle(T2):
    exact = exact_offdiagonal_kernel(T2, [0.0, 0.0], [0.5, 0.2], 0.5)
    assert float(torus_lattice_kernel([[0.5, 0.2]], 0.5)[0]) == pytest.approx(exact, rel=1e-5)
    assert float(torus_lattice_kernel([[0.5, 0.2]], 0.5, images=6)[0]) == pytest.approx(exact, rel=2e-6)


def test_exact_kernel_sphere_far_end(S2):
    near_pi = exact_offdiagonal_kernel(S2, [0.0, 0.0], [3.1, 0.0], 0.5)
    at_pi = exact_offdiagonal_kernel(S2, [0.0, 0.0], [math.pi, 0.0], 0.5)
    assert np.isfinite(at_pi) and 0 < at_pi and abs(near_pi - at_pi) < 1e-3
    with pytest.raises(DomainError):
        exact_offdiagonal_kernel(S2, [0.5, 0.0], [0.5, 0.0], 0.5)


def test_sphere_kernel_table(S2):
    table = sphere_kernel_table(0.5, 0.02)
    d = np.array([0.03, 0.4, 1.7, 3.0])
    exact = exact_offdiagonal_kernel(S2, np.array([0.0, 0.0]), np.stack([d, np.zeros(4)], axis=1), 0.5)
    assert np.allclose(table(d), exact, rtol=1e-6)
    with pytest.raises(DomainError):
        table(0.01)


def test_diagonal_asymptotics(S2, T1, T2):
    rep = diagonal_asymptotics_check(S2, 0.5)
    assert rep.relative_error <= 0.02 and rep.slope >= 0.8
    for M in (T1, T2):
        rep = diagonal_asymptotics_check(M, 0.5)
        assert rep.relative_error <= 1e-3 and rep.slope >= 1.0
    off = diagonal_asymptotics_check(S2, 0.5, amplitude=False)
    assert np.isfinite(off.slope)
    with pytest.raises(DomainError):
        diagonal_asymptotics_check(S2, 0.5, (0.1, 3.5))


def test_calibrated_correction(S2):
    kappa = calibrate_correction(S2, 0.5)
    assert np.isfinite(kappa) and abs(kappa) < 0.1


# --- discretized operators -----------------------------------------------------------


@pytest.mark.parametrize("mode", ["full", "representation"])
def test_pv_annihilates_constants(mode, S2, T2):
    for M, res in ((S2, 24), (T2, 24)):
        grid = build_grid(M, res)
        out = pv_apply(Field(grid, np.full(grid.size, 3.0)), KernelSpec.default(M, 0.4), PVScheme.from_spacing(grid, mode=mode))
        # exact up to FFT roundoff against a kernel mass of order epsilon^{-n-2s}
        assert np.max(np.abs(out.values)) <= 1e-10 * 3.0


def test_pv_torus_sine(T1):
    grid = build_grid(T1, 256)
    x = grid.points[:, 0]
    out = pv_apply(Field(grid, np.sin(x)), KernelSpec.default(T1, 0.5), PVScheme.from_spacing(grid))
    assert rel(out.values, np.sin(x)) < 1e-2


def test_pv_sphere_y10(S2):
    grid = build_grid(S2, 64)
    y10 = sphere_mode(grid, (1, 0))
    out = pv_apply(y10, KernelSpec.default(S2, 0.5), PVScheme.from_spacing(grid))
    assert rel(out.values, math.sqrt(2) * y10.values) < 5e-2


def test_pv_self_adjoint(S2, T2, rng):
    # the torus operator is exactly symmetric; on the sphere the latitude-dependent
    # ball radius and the first-moment correction leave a small asymmetry
    for M, res, tol in ((T2, 32, 1e-12), (S2, 32, 1e-3)):
        grid = build_grid(M, res)
        spec, scheme = KernelSpec.default(M, 0.5), PVScheme.from_spacing(grid)
        f, g = band_field(grid, rng, 6), band_field(grid, rng, 6)
        a = grid.integrate(pv_apply(f, spec, scheme).values * g.values)
        b = grid.integrate(f.values * pv_apply(g, spec, scheme).values)
        assert abs(a - b) <= tol * abs(a)


def test_pv_sign_at_maximum(S2, T1, T2):
    cases = [(S2, 32, lambda g: zonal_bump(g, 0.5).values)]
    cases.append((T1, 128, lambda g: np.exp(np.cos(g.points[:, 0] - 1.5))))
    cases.append((T2, 32, lambda g: np.exp(np.sum(np.cos(g.points - 1.5), axis=1))))
    for M, res, make in cases:
        grid = build_grid(M, res)
        v = make(grid)
        for s in (0.25, 0.75):
            out = pv_apply(Field(grid, v), KernelSpec.default(M, s), PVScheme.from_spacing(grid))
            assert out.values[int(np.argmax(v))] >= 0


def test_pv_torus2_refinement(T2, rng):
    errs = []
    for res in (32, 64):
        grid = build_grid(T2, res)
        basis = default_basis(grid)
        a = np.zeros(len(basis), dtype=complex)
        for lab, c in (((1, 2), 1.0), ((-1, -2), 1.0), ((3, -1), 0.5j), ((-3, 1), -0.5j)):
            a[basis.index(lab)] = c
        f = Field(grid, np.real(basis.synthesize(a)))
        out = pv_apply(f, KernelSpec.default(T2, 0.5), PVScheme.from_spacing(grid))
        errs.append(rel(out.values, fractional_apply_spectral(f, 0.5).values))
    assert errs[1] < errs[0]


def test_pv_errors(S2, T1):
    grid = build_grid(T1, 64)
    f = Field(grid, np.sin(grid.points[:, 0]))
    with pytest.raises(DomainError):
        PVScheme(grid, grid.spacing)
    with pytest.raises(DomainError):
        PVScheme.from_spacing(grid, mode="other")
    with pytest.raises(DomainError):
        pv_apply(f, KernelSpec.default(T1, -0.25), PVScheme.from_spacing(grid))
    with pytest.raises(DomainError):
        pv_apply(f, KernelSpec.default(T1, 0.5), PVScheme.from_spacing(grid, symmetrized=False))
    with pytest.raises(GridMismatchError):
        pv_apply(f, KernelSpec.default(S2, 0.5), PVScheme.from_spacing(grid))
    other = build_grid(T1, 128)
    with pytest.raises(GridMismatchError):
        pv_apply(f, KernelSpec.default(T1, 0.5), PVScheme.from_spacing(other))


def test_pv_parts(T1):
    grid = build_grid(T1, 128)
    f = Field(grid, np.sin(grid.points[:, 0]))
    out, parts = pv_apply(f, KernelSpec.default(T1, 0.5), PVScheme.from_spacing(grid), return_parts=True)
    assert np.allclose(out.values, parts["body"] + parts["ball"])
    assert np.all(parts["rho"] > 0)


def test_riesz_torus(T1):
    grid = build_grid(T1, 256)
    x = grid.points[:, 0]
    out = riesz_apply(Field(grid, np.sin(x)), KernelSpec.default(T1, -0.25), PVScheme.from_spacing(grid))
    assert rel(out.values, np.sin(x)) < 1e-2
    # n = 1, s = -1/2 is the logarithmic case and is not represented
    with pytest.raises(DomainError):
        KernelSpec.default(T1, -0.5)


def test_riesz_sphere_y20(S2):
    grid = build_grid(S2, 32)
    y20 = sphere_mode(grid, (2, 0))
    out = riesz_apply(y20, KernelSpec.default(S2, -0.5), PVScheme.from_spacing(grid))
    assert rel(out.values, y20.values / math.sqrt(6)) < 5e-2


def test_riesz_rejects_constants_and_range(S2):
    grid = build_grid(S2, 16)
    scheme = PVScheme.from_spacing(grid)
    with pytest.raises(DomainError):
        riesz_apply(Field(grid, np.ones(grid.size)), KernelSpec.default(S2, -0.5), scheme)
    with pytest.raises(DomainError):
        riesz_apply(sphere_mode(grid, (1, 0)), KernelSpec.default(S2, 0.5), scheme)


def test_riesz_inverts_pv(T1):
    grid = build_grid(T1, 256)
    x = grid.points[:, 0]
    f = Field(grid, np.sin(x) + 0.3 * np.cos(4 * x))
    scheme = PVScheme.from_spacing(grid)
    p = pv_apply(f, KernelSpec.default(T1, 0.25), scheme)
    p = Field(grid, p.values - p.values.mean())
    back = riesz_apply(p, KernelSpec.default(T1, -0.25), scheme)
    assert rel(back.values, f.values) < 5e-2


def test_representation_mode_drops_far_field(S2):
    grid = build_grid(S2, 32)
    y10 = sphere_mode(grid, (1, 0))
    spec = KernelSpec.default(S2, 0.5)
    full = pv_apply(y10, spec, PVScheme.from_spacing(grid))
    rep = pv_apply(y10, spec, PVScheme.from_spacing(grid, mode="representation"))
    want = math.sqrt(2) * y10.values
    # the truncated representation differs from the operator by a bounded smooth term
    assert rel(full.values, want) < rel(rep.values, want)
    assert np.max(np.abs(rep.values - want)) <= 2 * np.max(np.abs(y10.values))
