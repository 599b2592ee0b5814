r"""Special functions used by the kernels and the parametrix.

The modified Bessel function of the second kind is evaluated from

.. math::
    K_\nu(w) = \int_0^\infty e^{-w\cosh t}\cosh(\nu t)\,dt,\qquad \mathrm{Re}\,w > 0,

with the trapezoidal rule on a truncated half line. The integrand is even
and analytic in a strip around the real axis, so the rule converges
geometrically in the step size; the truncation point is chosen so the
dropped tail sits below double-precision underflow.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import special

from .errors import DomainError, PrecisionWarning

__all__ = [
    "gamma_fn",
    "bessel_k",
    "bessel_k_bound_check",
    "legendre_table",
    "normalized_legendre_table",
]

_UNDERFLOW = 745.0


def gamma_fn(x):
    """Euler Gamma function for real arguments.

    Raises
    ------
    DomainError
        If any argument is a nonpositive integer (a pole).
    """
    xa = np.asarray(x, dtype=float)
    if np.any((xa <= 0) & (xa == np.round(xa))):
        raise DomainError(f"Gamma has a pole at nonpositive integers, got {x!r}")
    out = special.gamma(xa)
    return float(out) if out.ndim == 0 else out


def _truncation_point(re_w, nu):
    # smallest T with re_w * (cosh T - 1) >= 745 + |nu| T, by fixed point
    re_w = np.maximum(re_w, 1e-300)
    t = np.arccosh(1.0 + _UNDERFLOW / re_w)
    for _ in range(60):
        t = np.arccosh(1.0 + (_UNDERFLOW + nu * t) / re_w)
    return t + 0.5


def _bessel_k_block(nu: np.ndarray, w: np.ndarray, step: np.ndarray) -> np.ndarray:
    T = _truncation_point(w.real, nu)
    m = int(np.max(np.ceil(T / step)))
    u = np.linspace(0.0, 1.0, m + 1)
    t = T[:, None] * u[None, :]
    h = T / m
    # e^{-w} is factored out so large |w| keeps full relative precision
    vals = np.exp(-w[:, None] * (np.cosh(t) - 1.0) + nu[:, None] * t)
    vals *= 0.5 * (1.0 + np.exp(-2.0 * nu[:, None] * t))
    vals[:, 0] *= 0.5
    vals[:, -1] *= 0.5
    return h * vals.sum(axis=1) * np.exp(-w)


def bessel_k(nu, w, step: float = 0.1):
    r"""Modified Bessel function of the second kind, :math:`K_\nu(w)`.

    Parameters
    ----------
    nu : float or array_like
        Real order. Negative orders are folded with :math:`K_{-\nu}=K_\nu`.
    w : complex or array_like
        Argument with positive real part. Broadcasts against ``nu``.
    step : float
        Base trapezoidal step. It is shrunk for large ``|w|`` (narrow peak)
        and for arguments close to the imaginary axis (narrow strip of
        analyticity).

    Returns
    -------
    complex or ndarray of complex
    """
    nu_a, w_a = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(w, dtype=complex))
    if np.any(w_a.real <= 0):
        raise DomainError("bessel_k requires Re(w) > 0")
    if np.any(np.abs(w_a) > 700):
        warnings.warn("bessel_k: |w| > 700, result underflows toward zero", PrecisionWarning, stacklevel=2)
    flat_nu = np.abs(nu_a).ravel()
    flat_w = w_a.ravel()
    strip = np.maximum(math.pi / 2 - np.abs(np.angle(flat_w)), 0.05) / (math.pi / 4)
    h = np.minimum(step, 0.5 / np.sqrt(np.abs(flat_w))) * np.minimum(strip, 1.0)
    out = np.empty(flat_w.shape, dtype=complex)
    block = 2048
    for i in range(0, flat_w.size, block):
        sl = slice(i, i + block)
        out[sl] = _bessel_k_block(flat_nu[sl], flat_w[sl], h[sl])
    out = out.reshape(w_a.shape)
    return complex(out) if out.ndim == 0 else out


def bessel_k_bound_check(nu: float, samples):
    r"""Empirical constants in the two-regime bound for :math:`K_\ell`.

    Returns ``(C_small, C_large, holds)`` with ``C_small`` the sup of
    ``|K_l(w)| w^l`` over samples ``w <= 1`` and ``C_large`` the sup of
    ``|K_l(w)| e^w`` over samples ``w > 1``. For ``l = 0`` the small-argument
    factor ``w^0 = 1`` cannot control the logarithmic growth of ``K_0``: the
    bound is flagged with ``C_small = inf`` and ``holds = False`` whenever
    samples reach ``w <= 1``.
    """
    w = np.asarray(samples, dtype=float)
    if np.any(w <= 0):
        raise DomainError("samples must be positive")
    ell = abs(float(nu))
    k = np.abs(bessel_k(ell, w.astype(complex)))
    small = w <= 1.0
    if ell == 0 and small.any():
        c_small = math.inf
    else:
        c_small = float(np.max(k[small] * w[small] ** ell)) if small.any() else 0.0
    c_large = float(np.max(k[~small] * np.exp(w[~small]))) if (~small).any() else 0.0
    holds = bool(np.isfinite(c_small) and np.isfinite(c_large))
    return c_small, c_large, holds


def legendre_table(lmax: int, x) -> np.ndarray:
    """Legendre polynomials ``P_0..P_lmax`` at ``x``; shape ``(lmax+1,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((lmax + 1,) + x.shape)
    out[0] = 1.0
    if lmax >= 1:
        out[1] = x
    for ell in range(1, lmax):
        out[ell + 1] = ((2 * ell + 1) * x * out[ell] - ell * out[ell - 1]) / (ell + 1)
    return out


def normalized_legendre_table(lmax: int, theta) -> np.ndarray:
    r"""Orthonormalized associated Legendre functions.

    ``q[l, m]`` equals :math:`\sqrt{\frac{2l+1}{4\pi}\frac{(l-m)!}{(l+m)!}}\,P_l^m(\cos\theta)`
    without the Condon-Shortley phase, computed by the standard stable
    recurrence in ``l`` at fixed ``m``. Entries with ``m > l`` are zero.
    """
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    q = np.zeros((lmax + 1, lmax + 1) + theta.shape)
    q[0, 0] = 1.0 / math.sqrt(4 * math.pi)
    for m in range(1, lmax + 1):
        q[m, m] = math.sqrt((2 * m + 1) / (2 * m)) * s * q[m - 1, m - 1]
    for m in range(0, lmax):
        q[m + 1, m] = math.sqrt(2 * m + 3) * c * q[m, m]
        for ell in range(m + 2, lmax + 1):
            a = math.sqrt((4 * ell * ell - 1) / (ell * ell - m * m))
            b = math.sqrt(((ell - 1) ** 2 - m * m) / (4 * (ell - 1) ** 2 - 1))
            q[ell, m] = a * (c * q[ell - 1, m] - b * q[ell - 2, m])
    return q
