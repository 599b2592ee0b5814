"""Numerical probes of fractional Sobolev and pointwise commutator inequalities.

``Lambda = (-Delta_g)^{1/2}`` throughout, so ``Lambda^a`` has spectral
multiplier ``lambda^{a/2}``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .geometry import Field, Grid, ManifoldGeometry, build_grid, eigenbasis
from .spectral import default_basis

__all__ = [
    "EnsembleSpec",
    "sample_ensemble",
    "lambda_power",
    "sobolev_exponent",
    "sobolev_ratio",
    "zonal_bump",
    "cordoba_inequality_check",
    "CVReport",
    "constantin_vicol_probe",
    "ensemble_statistics",
    "write_ensemble_csv",
]


@dataclass(frozen=True)
class EnsembleSpec:
    """Seeded random band-limited fields: standard normal coefficient per mode, unit L^2 norm."""

    count: int
    band_limit: int
    seed: int = 0

    def __post_init__(self):
        if self.count < 1 or self.band_limit < 1:
            raise DomainError("count and band_limit must be positive")


def sample_ensemble(spec: EnsembleSpec, grid: Grid) -> list[Field]:
    basis = eigenbasis(grid.manifold, spec.band_limit, grid)
    rng = np.random.default_rng(spec.seed)
    out = []
    for _ in range(spec.count):
        a = rng.standard_normal(len(basis))
        vals = np.real(basis.synthesize(a))
        f = Field(grid, vals)
        out.append(f.with_values(vals / f.l2_norm()))
    return out


def lambda_power(f: Field, a: float, basis=None) -> Field:
    """``Lambda^a f`` with multiplier ``lambda^{a/2}`` (constant mode sent to 0 for ``a > 0``)."""
    basis = basis or default_basis(f.grid)
    c = basis.analyze(f.values)
    lam = basis.lambdas
    mult = np.where(lam > 0, np.abs(lam) ** (a / 2), 0.0)
    vals = basis.synthesize(mult * c)
    return Field(f.grid, np.real(vals) if f.is_real else vals)


def _lp_norm(f: Field, p: float) -> float:
    return float(f.grid.integrate(np.abs(f.values) ** p)) ** (1.0 / p)


def sobolev_exponent(n: int, s: float) -> float:
    return 2 * n / (n - 2 * s)


def sobolev_ratio(f: Field, s: float, basis=None) -> float:
    """``||f||_p / (||f||_2 + ||Lambda^s f||_2)`` with ``p = 2n/(n-2s)``.

    Requires ``n = 2`` and ``0 < s < 1/2``.
    """
    n = f.grid.manifold.dim
    if n != 2:
        raise DomainError("sobolev_ratio is set up for n = 2")
    if not (0 < s < 0.5):
        raise DomainError("s must lie in (0, 1/2)")
    p = sobolev_exponent(n, s)
    lf = lambda_power(f, s, basis)
    return _lp_norm(f, p) / (f.l2_norm() + lf.l2_norm())


def zonal_bump(grid: Grid, width: float) -> Field:
    """``exp(-(1 - cos theta)/width^2)`` on the sphere, projected to the grid's band limit."""
    if not grid.manifold.is_sphere:
        raise DomainError("zonal bumps live on the sphere")
    theta = grid.points[:, 0]
    vals = np.exp(-(1 - np.cos(theta)) / width**2)
    basis = default_basis(grid)
    return Field(grid, np.real(basis.synthesize(basis.analyze(vals))))


def _coefficient_band(f: Field, basis) -> int:
    c = np.abs(basis.analyze(f.values))
    live = np.nonzero(c > 1e-13 * max(c.max(), 1e-300))[0]
    if live.size == 0:
        return 0
    labels = [basis.labels[i] for i in live]
    if f.grid.manifold.is_sphere:
        return max(lab[0] for lab in labels)
    return max(max(abs(k) for k in lab) for lab in labels)


def _refine_for_square(f: Field):
    """Resample ``f`` on a refined grid that resolves ``f^2`` exactly."""
    grid = f.grid
    M = grid.manifold
    basis = default_basis(grid)
    L = _coefficient_band(f, basis)
    factor = 2
    fine = build_grid(M, factor * grid.resolution)
    nyq = fine.resolution - 1 if M.is_sphere else (fine.resolution - 1) // 2
    if 2 * L > nyq:
        raise DomainError("resolution too low to resolve f^2")
    c = basis.analyze(f.values)
    fine_basis = eigenbasis(M, basis.band_limit, fine)
    vals = fine_basis.synthesize(c)
    return Field(fine, np.real(vals) if f.is_real else vals), 2 * L


def cordoba_inequality_check(f: Field, alpha: float, rel_tol: float = 1e-6):
    """Pointwise ``2 f Lambda^alpha f - Lambda^alpha(f^2) >= 0``.

    Evaluated on a 2x refined grid that resolves ``f^2``. Returns
    ``(min_slack, holds)`` with tolerance ``rel_tol * scale`` where ``scale``
    is ``max|f|^2 + max|f| * max|Lambda^alpha f| + max|Lambda^alpha f^2|``.

    Raises
    ------
    DomainError
        If the refined grid cannot represent ``f^2`` without aliasing.
    """
    if not (0 < alpha < 2):
        raise DomainError("alpha must lie in (0, 2)")
    if not f.is_real:
        raise DomainError("f must be real")
    fine, band = _refine_for_square(f)
    basis = eigenbasis(fine.grid.manifold, band, fine.grid)
    sq = Field(fine.grid, fine.values**2)
    recon = np.real(basis.synthesize(basis.analyze(sq.values)))
    alias = float(np.max(np.abs(recon - sq.values)))
    la_f = lambda_power(fine, alpha, basis)
    la_sq = lambda_power(sq, alpha, basis)
    slack = 2 * fine.values * la_f.values - la_sq.values
    fmax = float(np.max(np.abs(fine.values)))
    scale = fmax**2 + fmax * float(np.max(np.abs(la_f.values))) + float(np.max(np.abs(la_sq.values)))
    tol = rel_tol * max(scale, 1e-300)
    if alias > tol:
        raise DomainError(f"aliasing {alias:.3g} exceeds tolerance {tol:.3g}")
    m = float(np.min(slack))
    return m, bool(m >= -tol)


@dataclass
class CVReport:
    """Pointwise admissible constants for two readings of the gradient bound.

    ``c_display`` uses ``grad f . Lambda^a grad f - |grad f|^2 / 2`` in the
    denominator; ``c_nonlocal`` uses ``grad f . Lambda^a grad f - Lambda^a(|grad f|^2) / 2``.
    Points where the denominator is not positive cannot satisfy the bound
    for any ``c`` and are counted in the ``*_violations`` fields.
    """

    c_display: np.ndarray
    c_nonlocal: np.ndarray
    mask: np.ndarray
    display_violations: int
    nonlocal_violations: int

    @staticmethod
    def _fit(c):
        good = np.isfinite(c)
        return float(np.max(c[good])) if good.any() else float("nan")

    @property
    def fit_display(self) -> float:
        return self._fit(self.c_display)

    @property
    def fit_nonlocal(self) -> float:
        return self._fit(self.c_nonlocal)


def _gradient(f: Field, basis):
    c = basis.analyze(f.values)
    n = f.grid.manifold.dim
    ks = np.array(basis.labels, dtype=float).reshape(len(basis), n)
    return [Field(f.grid, np.real(basis.synthesize(1j * ks[:, j] * c))) for j in range(n)]


def constantin_vicol_probe(f: Field, alpha: float, degenerate_tol: float = 1e-8) -> CVReport:
    """Measure ``c(x)`` in ``grad f . Lambda^a grad f >= R(x) + |grad f|^{2+a} / (c ||f||_inf^a)``.

    Torus only. Two readings of ``R`` are measured (see :class:`CVReport`);
    points with ``|grad f| <= degenerate_tol * max|grad f|`` are excluded.
    """
    M = f.grid.manifold
    if M.is_sphere:
        raise DomainError("constantin_vicol_probe runs on the torus")
    if not (0 < alpha < 1):
        raise DomainError("alpha must lie in (0, 1)")
    fine, band = _refine_for_square(f)
    basis = eigenbasis(M, band, fine.grid)
    grads = _gradient(fine, basis)
    lhs = sum(g.values * lambda_power(g, alpha, basis).values for g in grads)
    g2 = sum(g.values**2 for g in grads)
    la_g2 = lambda_power(Field(fine.grid, g2), alpha, basis).values
    gnorm = np.sqrt(g2)
    sup = float(np.max(np.abs(fine.values)))
    mask = gnorm > degenerate_tol * max(float(gnorm.max()), 1e-300)
    num = np.where(mask, gnorm ** (2 + alpha), 0.0) / max(sup, 1e-300) ** alpha

    def admissible(den):
        c = np.full(den.shape, np.nan)
        ok = mask & (den > 0)
        c[ok] = num[ok] / den[ok]
        return c, int(np.sum(mask & (den <= 0)))

    c_disp, v_disp = admissible(lhs - 0.5 * g2)
    c_nl, v_nl = admissible(lhs - 0.5 * la_g2)
    return CVReport(c_disp, c_nl, mask, v_disp, v_nl)


def ensemble_statistics(fields, s: float, alphas=(0.5, 1.0, 1.5)) -> dict:
    """Sobolev ratios and Cordoba slacks across an ensemble."""
    ratios = np.array([sobolev_ratio(f, s) for f in fields])
    slack = {a: [cordoba_inequality_check(f, a) for f in fields] for a in alphas}
    return {
        "ratios": ratios,
        "ratio_max": float(ratios.max()),
        "ratio_median": float(np.median(ratios)),
        "cordoba_min": {a: min(m for m, _ in v) for a, v in slack.items()},
        "cordoba_holds": {a: all(h for _, h in v) for a, v in slack.items()},
    }


def write_ensemble_csv(rows, path) -> None:
    """Rows of ``(ensemble_id, s_or_alpha, statistic, value, seed)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ensemble_id", "s_or_alpha", "statistic", "value", "seed"])
        for eid, par, name, val, seed in rows:
            w.writerow([eid, repr(float(par)), name, repr(float(val)), int(seed)])
