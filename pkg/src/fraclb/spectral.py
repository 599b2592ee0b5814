"""Spectral calculus of ``-Delta_g``: ground-truth fractional powers and resolvents.

Everything here acts exactly on band-limited fields, so the functions in
this module are the reference against which the heat-semigroup and
singular-integral routes are measured.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, DomainError, GridMismatchError
from .geometry import EigenPair, Eigenbasis, Field, Grid, eigenbasis

__all__ = [
    "EigenPair",
    "SpectralCoeffs",
    "ContourSpec",
    "analyze",
    "synthesize",
    "default_basis",
    "apply_multiplier",
    "fractional_apply_spectral",
    "laplacian",
    "resolvent_apply",
    "resolvent_norm",
    "contour_power_scalar",
    "linfty_embedding_check",
    "write_coeffs_csv",
]


@dataclass
class SpectralCoeffs:
    basis: Eigenbasis
    coeffs: np.ndarray

    @property
    def band_limit(self) -> int:
        return self.basis.band_limit

    def energy(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))


@lru_cache(maxsize=16)
def default_basis(grid: Grid, band_limit: int | None = None) -> Eigenbasis:
    """Eigenbasis on ``grid`` up to its Nyquist limit (or ``band_limit``)."""
    if band_limit is None:
        band_limit = grid.resolution - 1 if grid.manifold.is_sphere else (grid.resolution - 1) // 2
    return eigenbasis(grid.manifold, band_limit, grid)


def _check_grid(f: Field, basis: Eigenbasis) -> None:
    if basis.grid is not f.grid:
        raise GridMismatchError("field and basis live on different grids")


def analyze(f: Field, basis: Eigenbasis) -> SpectralCoeffs:
    """Weighted inner products ``<f, Y_k>`` for every basis function."""
    _check_grid(f, basis)
    return SpectralCoeffs(basis, basis.analyze(f.values))


def synthesize(c: SpectralCoeffs, real: bool | None = None) -> Field:
    vals = c.basis.synthesize(c.coeffs)
    if real or (real is None and not c.basis.is_complex):
        vals = np.real(vals)
    return Field(c.basis.grid, vals)


def apply_multiplier(f: Field, multiplier, basis: Eigenbasis | None = None) -> Field:
    """Apply ``m(lambda)`` mode by mode. ``multiplier`` maps an eigenvalue array to factors."""
    basis = basis or default_basis(f.grid)
    _check_grid(f, basis)
    a = basis.analyze(f.values)
    m = np.asarray(multiplier(basis.lambdas))
    vals = basis.synthesize(m * a)
    # a complex multiplier turns a real field complex
    if f.is_real and not np.any(np.imag(m)):
        vals = np.real(vals)
    return Field(f.grid, vals)


def _check_power(s: float) -> None:
    if not (-1.0 < s < 1.0) or s == 0.0:
        raise DomainError(f"fractional order must lie in (-1, 1) without 0, got {s}")


def _power_multiplier(s: float):
    def mult(lam):
        out = np.zeros_like(lam, dtype=float)
        pos = lam > 0
        out[pos] = lam[pos] ** s
        return out

    return mult


def fractional_apply_spectral(f: Field, s: float, basis: Eigenbasis | None = None) -> Field:
    """``(-Delta_g)^s f`` by eigenexpansion.

    For ``s < 0`` the constant mode must be absent: the input is required to
    have zero mean and the output is mean-zero as well.
    """
    _check_power(s)
    if s < 0:
        scale = max(float(np.max(np.abs(f.values))), 1e-300)
        if abs(f.mean()) >= 1e-8 * scale:
            raise DomainError("negative powers need a mean-zero field")
    out = apply_multiplier(f, _power_multiplier(s), basis)
    out.mean_zero = s < 0
    return out


def laplacian(f: Field, basis: Eigenbasis | None = None) -> Field:
    """``-Delta_g f`` (the nonnegative operator)."""
    return apply_multiplier(f, lambda lam: lam, basis)


def resolvent_apply(f: Field, z: complex, basis: Eigenbasis | None = None, exclude_constant: bool = False) -> Field:
    """``(-Delta_g - z)^{-1} f``; with ``exclude_constant`` the zero mode is dropped."""
    basis = basis or default_basis(f.grid)
    lams = basis.lambdas
    active = lams > 0 if exclude_constant else np.ones_like(lams, dtype=bool)
    if np.any(np.abs(lams[active] - z) < 1e-12):
        raise DomainError(f"z = {z} lies on the spectrum")

    def mult(lam):
        out = np.zeros(lam.shape, dtype=complex)
        out[active] = 1.0 / (lam[active] - z)
        return out

    return apply_multiplier(f, mult, basis)


def resolvent_norm(basis: Eigenbasis, z: complex, mean_zero: bool = True) -> float:
    """Operator norm of the resolvent on the span of ``basis`` (L^2, exact)."""
    lams = np.unique(basis.lambdas)
    if mean_zero:
        lams = lams[lams > 0]
    return float(np.max(1.0 / np.abs(lams - z)))


@dataclass(frozen=True)
class ContourSpec:
    """Truncated imaginary-axis contour for ``(1/2 pi i) int z^s (lambda - z)^{-1} dz``.

    ``tail_terms`` terms of the large-``|z|`` expansion of the integrand are
    integrated analytically beyond ``axis_extent``; with ``tail_terms = 0``
    the contour is plainly truncated.
    """

    axis_extent: float = 1.0e4
    node_count: int = 512
    tail_terms: int = 8

    def __post_init__(self):
        if self.node_count % 2:
            raise DomainError("node_count must be even")
        if self.axis_extent <= 0:
            raise DomainError("axis_extent must be positive")

    def doubled(self) -> "ContourSpec":
        return ContourSpec(2 * self.axis_extent, 2 * self.node_count, self.tail_terms)


def _contour_integral(lam: float, s: float, spec: ContourSpec) -> complex:
    R = spec.axis_extent
    y0 = 1e-8 * lam
    # y = lam * e^x; the integrand decays like e^{(1+s)x} as x -> -inf
    x_lo, x_hi = math.log(y0 / lam), math.log(R / lam)
    nodes, weights = np.polynomial.legendre.leggauss(spec.node_count)
    half = 0.5 * (x_hi - x_lo)
    x = x_lo + half * (nodes + 1.0)
    y = lam * np.exp(x)
    iy = 1j * y
    g = iy**s / (lam - iy) + (-iy) ** s / (lam + iy)
    body = half * np.sum(weights * g * y)
    # [0, y0]: leading small-y term of the folded integrand
    head = 2.0 * math.cos(math.pi * s / 2) * y0 ** (1 + s) / (lam * (1 + s))
    tail = 0.0
    for k in range(spec.tail_terms):
        a = s - 1 - k
        tail += -(lam**k) * 2.0 * math.cos(math.pi * a / 2) * R ** (s - k) / (k - s)
    return (body + head + tail) / (2.0 * math.pi)


def contour_power_scalar(lam: float, s: float, contour: ContourSpec | None = None, check: bool = True) -> complex:
    r"""Scalar model of the contour definition of fractional powers.

    Evaluates :math:`\frac{1}{2\pi i}\int_\gamma z^s(\lambda-z)^{-1}\,dz` with
    ``gamma`` the imaginary axis traversed upward and ``z^s`` on the principal
    branch. The integral is folded onto ``y > 0``, mapped to ``x = log(y/lambda)``
    and integrated with Gauss-Legendre nodes. The result converges to
    ``lambda**s`` for ``-1 < s < 0``.

    Raises
    ------
    ConvergenceError
        When ``check`` is set and doubling extent and node count moves the
        result by more than 1e-6 relative.
    """
    contour = contour or ContourSpec()
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if not (-1.0 < s < 0.0):
        raise DomainError("contour_power_scalar needs s in (-1, 0)")
    if contour.axis_extent < 100 * lam:
        raise DomainError("contour extent must be at least 100 * lambda")
    val = _contour_integral(lam, s, contour)
    if check:
        val2 = _contour_integral(lam, s, contour.doubled())
        if abs(val2 - val) > 1e-6 * abs(val2):
            raise ConvergenceError(f"contour integral not converged: {val} vs {val2}")
    return complex(val)


def linfty_embedding_check(f: Field, epsilon: float, basis: Eigenbasis | None = None) -> float:
    """``max|f| / ||f||_{H^{n/2+epsilon}}`` with the norm taken spectrally."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    basis = basis or default_basis(f.grid)
    a = basis.analyze(f.values)
    n = f.grid.manifold.dim
    h_norm = math.sqrt(float(np.sum((1.0 + basis.lambdas) ** (n / 2 + epsilon) * np.abs(a) ** 2)))
    return float(np.max(np.abs(f.values))) / h_norm


def write_coeffs_csv(c: SpectralCoeffs, path) -> None:
    """Columns: eigen_index, lambda, a_re, a_im."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eigen_index", "lambda", "a_re", "a_im"])
        for i, (lam, a) in enumerate(zip(c.basis.lambdas, np.asarray(c.coeffs, dtype=complex))):
            w.writerow([i, repr(float(lam)), repr(float(a.real)), repr(float(a.imag))])
