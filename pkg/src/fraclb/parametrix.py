r"""Hadamard parametrix for the resolvent :math:`(-\Delta_g - z)^{-1}`.

The Bessel potentials are

.. math::
    F_\nu^z(r) = c_\nu\,r^{-p}\,\mu^{p}\,K_p(\mu r),\qquad p = \tfrac n2-\nu-1,
    \quad \mu = \sqrt{-z},\ \mathrm{Re}\,\mu > 0,

with :math:`c_0=(2\pi)^{-n/2}` (so that :math:`(-\Delta-z)F_0=\delta` in
:math:`\mathbb R^n`) and :math:`c_\nu = c_0/2^\nu` from
:math:`-2F_\nu'(r)/r = F_{\nu-1}(r)`. The parametrix is

.. math::
    P_N^z f(x) = \int_M \chi\,\sum_{\nu\le N} u_\nu(x,y)\,F_\nu^z(d(x,y))\,f(y)\,d\mathrm{vol}(y).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.integrate import solve_ivp

from .errors import ConvergenceError, DomainError, GridMismatchError
from .geometry import Field, Grid, ManifoldGeometry, sphere_area, theta_of_distance
from .heat import calibrate_u1
from .pvkernel import smooth_cutoff
from .specfun import bessel_k, bessel_k_bound_check
from .spectral import laplacian

TWO_PI = 2.0 * math.pi

__all__ = [
    "BesselPotential",
    "f_nu_eval",
    "f_nu_recursion_check",
    "blowup_exponent",
    "bessel_orders_bound_check",
    "ParametrixGeometry",
    "RayProfile",
    "solve_transport_u0",
    "ResolventParametrix",
    "apply_parametrix",
    "remainder_probe",
    "write_ray_csv",
    "write_remainder_csv",
]


def _mu(z: complex) -> complex:
    z = complex(z)
    if z.imag == 0 and z.real >= 0:
        raise DomainError(f"z = {z} lies on the nonnegative real axis")
    return np.sqrt(-z)


@dataclass(frozen=True)
class BesselPotential:
    """``F_nu^z`` in dimension ``n``."""

    nu: int
    z: complex
    n: int

    def __post_init__(self):
        if self.nu < 0 or int(self.nu) != self.nu:
            raise DomainError("nu must be a nonnegative integer")
        _mu(self.z)

    @property
    def order(self) -> float:
        return self.n / 2 - self.nu - 1

    @property
    def mu(self) -> complex:
        return _mu(self.z)

    @property
    def c_nu(self) -> float:
        return TWO_PI ** (-self.n / 2) / 2.0**self.nu

    @property
    def singular(self) -> bool:
        return self.order >= 0


def f_nu_eval(p: BesselPotential, r):
    """Evaluate ``F_nu^z(r)``.

    ``r = 0`` is allowed only for non-singular orders (``n/2 - nu - 1 < 0``),
    where the finite limit is returned.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("r must be nonnegative")
    zero = r == 0
    if np.any(zero) and p.singular:
        raise DomainError("F_nu is singular at r = 0 for this order")
    mu, q = p.mu, p.order
    out = np.empty(r.shape, dtype=complex)
    rr = r[~zero]
    out[~zero] = p.c_nu * rr ** (-q) * mu**q * bessel_k(q, mu * rr)
    if np.any(zero):
        # w^{-q} K_q(w) -> 2^{-q-1} Gamma(-q) for q < 0
        out[zero] = p.c_nu * mu ** (2 * q) * 2.0 ** (-q - 1) * special.gamma(-q)
    return complex(out) if out.ndim == 0 else out


def f_nu_recursion_check(p: BesselPotential, r_samples) -> float:
    """Max relative residual of ``-2 F_nu'(r)/r = F_{nu-1}(r)`` by central differences."""
    if p.nu < 1:
        raise DomainError("recursion needs nu >= 1")
    r = np.asarray(r_samples, dtype=float)
    h = 1e-6 * r
    deriv = (f_nu_eval(p, r + h) - f_nu_eval(p, r - h)) / (2 * h)
    prev = f_nu_eval(BesselPotential(p.nu - 1, p.z, p.n), r)
    return float(np.max(np.abs(-2 * deriv / r - prev) / np.abs(prev)))


def blowup_exponent(p: BesselPotential, r_small=(1e-4, 1e-3)) -> float:
    """Log-log slope of ``|F_nu|`` between two small radii."""
    r = np.asarray(r_small, dtype=float)
    v = np.abs(f_nu_eval(p, r))
    return float(np.diff(np.log(v))[0] / np.diff(np.log(r))[0])


def bessel_orders_bound_check(n: int, depth: int, samples=None) -> dict:
    """``bessel_k_bound_check`` for every nonzero order ``n/2 - nu - 1``, ``nu <= depth``."""
    samples = np.geomspace(1e-3, 50.0, 200) if samples is None else samples
    out = {}
    for nu in range(depth + 1):
        order = n / 2 - nu - 1
        if order != 0:
            out[abs(order)] = bessel_k_bound_check(abs(order), samples)
    return out


# --- transport ------------------------------------------------------------------------


@dataclass(frozen=True)
class ParametrixGeometry:
    """Metric data of a model manifold in normal coordinates at a centre point.

    ``h(x) = n - tr g^{-1}(x) - <B(x), x>`` where ``B`` is the first-order
    coefficient of ``Delta_g`` in these coordinates,
    ``B^j = |g|^{-1/2} d_k(|g|^{1/2} g^{jk})``. It is the coefficient in
    ``Delta_g F(|x|) = Delta F(|x|) - h F'(|x|)/|x|`` for radial ``F``.
    """

    manifold: ManifoldGeometry
    center: tuple = (0.0, 0.0)
    fd_step: float = 1e-4

    @property
    def n(self) -> int:
        return self.manifold.dim

    def metric(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.n
        if not self.manifold.is_sphere:
            return np.eye(n)
        r = float(np.linalg.norm(x))
        if r == 0:
            return np.eye(2)
        e = x / r
        P = np.outer(e, e)
        return P + (math.sin(r) / r) ** 2 * (np.eye(2) - P)

    def inverse_metric(self, x) -> np.ndarray:
        return np.linalg.inv(self.metric(x))

    def sqrt_det(self, x) -> float:
        return math.sqrt(np.linalg.det(self.metric(x)))

    def first_order(self, x) -> np.ndarray:
        """``B^j`` by fourth-order central differences of ``sqrt|g| g^{jk}``."""
        x = np.asarray(x, dtype=float)
        n = self.n
        h = self.fd_step

        def flux(y):
            return self.sqrt_det(y) * self.inverse_metric(y)

        B = np.zeros(n)
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            dk = (8 * (flux(x + e) - flux(x - e)) - (flux(x + 2 * e) - flux(x - 2 * e))) / (12 * h)
            B += dk[:, k]
        return B / self.sqrt_det(x)

    def h(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.n - np.trace(self.inverse_metric(x)) - self.first_order(x) @ x)


@dataclass
class RayProfile:
    r: np.ndarray
    u0: np.ndarray
    theta_inv_sqrt: np.ndarray

    @property
    def abs_diff(self) -> np.ndarray:
        return np.abs(self.u0 - self.theta_inv_sqrt)


def solve_transport_u0(geom: ParametrixGeometry, direction, r_max: float, n_out: int = 200) -> RayProfile:
    """Integrate ``2 r u0' = h u0``, ``u0(0) = 1``, along a geodesic ray.

    ``direction`` is a unit vector in normal coordinates. The ODE is solved
    for ``log u0`` with an adaptive Runge-Kutta 4(5) scheme.

    Raises
    ------
    DomainError
        If ``r_max`` reaches the injectivity radius or ``h`` is not
        ``O(r^2)`` at the centre.
    ConvergenceError
        If the integrator fails.
    """
    M = geom.manifold
    if not (0 < r_max < M.injectivity_radius):
        raise DomainError("r_max must lie in (0, injectivity radius)")
    v = np.atleast_1d(np.asarray(direction, dtype=float))
    if v.size != geom.n:
        raise DomainError("direction has the wrong dimension")
    v = v / np.linalg.norm(v)

    r0 = (1e-2, 2e-2)
    h0 = [abs(geom.h(r * v)) for r in r0]
    if h0[1] > 1e-10 and (h0[0] > 1e-1 * r0[0] or h0[1] / max(h0[0], 1e-300) < 2.5):
        raise DomainError("h is not O(r^2) at the centre: malformed geometry")

    def rhs(r, y):
        if r < 1e-3:
            # h(r)/(2r) is O(r); evaluate at a safe radius and scale linearly
            return [geom.h(1e-3 * v) / 2e-3 * (r / 1e-3)]
        return [geom.h(r * v) / (2 * r)]

    r_out = np.linspace(0.0, r_max, n_out)
    sol = solve_ivp(rhs, (0.0, r_max), [0.0], method="RK45", t_eval=r_out, rtol=1e-10, atol=1e-12)
    if not sol.success:
        raise ConvergenceError(f"transport integration failed: {sol.message}")
    u0 = np.exp(sol.y[0])
    return RayProfile(r_out, u0, theta_of_distance(M, r_out) ** -0.5)


def write_ray_csv(profile: RayProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "u0", "theta_inv_sqrt", "abs_diff"])
        for row in zip(profile.r, profile.u0, profile.theta_inv_sqrt, profile.abs_diff):
            w.writerow([repr(float(v)) for v in row])


# --- parametrix assembly ------------------------------------------------------------------


@dataclass(frozen=True)
class ResolventParametrix:
    """Depth-``N`` parametrix on a model manifold.

    On the sphere ``u0 = (d/sin d)^{1/2}`` and ``u1`` is the calibrated heat
    coefficient (the resolvent and heat amplitudes agree through the Laplace
    transform); ``chi`` is cut at ``cutoff_radius``. On the torus the
    construction is carried out on the universal cover, where ``u0 = 1`` and
    ``u_nu = 0`` for ``nu >= 1``, with the cover cutoff at ``cutoff_radius``
    (which may exceed the injectivity radius) and summed over lattice images.
    """

    manifold: ManifoldGeometry
    depth: int = 0
    cutoff_radius: float | None = None

    def __post_init__(self):
        if not (0 <= self.depth <= 2):
            raise DomainError("depth must be 0, 1 or 2")
        if self.manifold.is_sphere and self.depth > 1:
            raise DomainError("sphere amplitudes are available up to depth 1")
        if self.cutoff_radius is None:
            object.__setattr__(self, "cutoff_radius", math.pi / 2 if self.manifold.is_sphere else 2 * TWO_PI)
        if self.manifold.is_sphere and self.cutoff_radius > calibrate_u1().d_max:
            raise DomainError("sphere cutoff must stay inside the u1 calibration range")

    def amplitude(self, nu: int, d):
        d = np.asarray(d, dtype=float)
        if not self.manifold.is_sphere:
            return np.ones_like(d) if nu == 0 else np.zeros_like(d)
        if nu == 0:
            return theta_of_distance(self.manifold, d) ** -0.5
        return calibrate_u1()(np.minimum(d, calibrate_u1().d_max))

    def radial_kernel(self, z: complex, d):
        """``chi(d) sum_nu u_nu(d) F_nu(d)`` for ``d > 0``."""
        d = np.asarray(d, dtype=float)
        n = self.manifold.dim
        chi = smooth_cutoff(d, self.cutoff_radius)
        out = np.zeros(d.shape, dtype=complex)
        live = chi > 0
        for nu in range(self.depth + 1):
            amp = self.amplitude(nu, d[live])
            if np.any(amp != 0):
                out[live] += amp * f_nu_eval(BesselPotential(nu, z, n), d[live])
        out[live] *= chi[live]
        return out

    def center_mass(self, z: complex, rho: float) -> complex:
        """``int_{B_rho} sum_nu u_nu F_nu`` by the flat model (``u_nu(0)`` constant)."""
        n = self.manifold.dim
        total = 0.0 + 0.0j
        for nu in range(self.depth + 1):
            amp = float(self.amplitude(nu, np.array([0.0]))[0])
            if amp == 0:
                continue
            p = BesselPotential(nu, z, n)
            mu = p.mu
            if n == 2 and nu == 0:
                # int_0^rho K0(mu r) 2 pi r dr = 2 pi (1 - mu rho K1(mu rho)) / mu^2
                w = mu * rho
                total += amp * p.c_nu * TWO_PI * (1 - w * bessel_k(1.0, w)) / mu**2
            else:
                total += amp * f_nu_eval(p, 0.0) * (sphere_area(n) * rho**n / n)
        return total


def _sphere_kernel(pr: ResolventParametrix, grid: Grid, z: complex):
    theta, phi, glw = grid.axes
    nphi = phi.size
    hav = (np.sin(0.5 * (theta[:, None, None] - theta[None, :, None])) ** 2
           + np.sin(theta)[:, None, None] * np.sin(theta)[None, :, None] * np.sin(0.5 * phi[None, None, :]) ** 2)
    d = 2 * np.arcsin(np.sqrt(np.clip(hav, 0.0, 1.0)))
    wj = glw * (TWO_PI / nphi)
    K = np.zeros(d.shape, dtype=complex)
    live = (d > 0) & (d < pr.cutoff_radius)
    K[live] = pr.radial_kernel(z, d[live])
    Kw = K * wj[None, :, None]
    for i in range(theta.size):
        rho = math.acos(1.0 - wj[i] / TWO_PI)
        Kw[i, i, 0] = pr.center_mass(z, rho)
    return np.fft.fft(Kw, axis=-1)


def _torus_kernel(pr: ResolventParametrix, grid: Grid, z: complex):
    n, res = grid.manifold.dim, grid.resolution
    off = TWO_PI * np.arange(res) / res
    off = np.where(off > math.pi, off - TWO_PI, off)
    diff = np.stack(np.meshgrid(*([off] * n), indexing="ij"), axis=-1)
    m = int(math.ceil(pr.cutoff_radius / TWO_PI)) + 1
    nus = np.arange(-m, m + 1)
    images = np.stack(np.meshgrid(*([nus] * n), indexing="ij"), axis=-1).reshape(-1, n)
    w = grid.weights[0]
    K = np.zeros(diff.shape[:-1], dtype=complex)
    for nu in images:
        rvec = diff - TWO_PI * nu
        d = np.linalg.norm(rvec, axis=-1)
        live = (d > 0) & (d < pr.cutoff_radius)
        K[live] += pr.radial_kernel(z, d[live]) * w
    rho = (w * n / sphere_area(n)) ** (1.0 / n)
    K[(0,) * n] += pr.center_mass(z, rho)
    return np.fft.fftn(K)


@lru_cache(maxsize=16)
def _assembled(pr: ResolventParametrix, grid: Grid, z: complex):
    if pr.manifold != grid.manifold:
        raise GridMismatchError("parametrix and grid disagree on the manifold")
    return _sphere_kernel(pr, grid, z) if grid.manifold.is_sphere else _torus_kernel(pr, grid, z)


def apply_parametrix(f: Field, pr: ResolventParametrix, z: complex) -> Field:
    """Quadrature of ``P_N^z f`` on the grid of ``f``.

    The point ``y = x`` carries the integral of the kernel over the geodesic
    ball whose volume equals the point's quadrature weight.
    """
    z = complex(z)
    _mu(z)
    grid = f.grid
    Khat = _assembled(pr, grid, z)
    vals = np.asarray(f.values).reshape(grid.shape)
    if grid.manifold.is_sphere:
        out = np.fft.ifft(np.einsum("ijm,jm->im", Khat, np.fft.fft(vals, axis=-1)), axis=-1)
    else:
        out = np.fft.ifftn(Khat * np.fft.fftn(vals))
    out = out.ravel()
    if not np.all(np.isfinite(out)):
        raise ConvergenceError("parametrix quadrature produced non-finite values")
    if f.is_real and z.imag == 0:
        out = out.real
    return Field(grid, out)


def remainder_probe(pr: ResolventParametrix, z: complex, f: Field):
    """``(-Delta_g - z) P_N^z f - f`` with the Laplacian applied spectrally.

    Returns the residual field and its L^2 norm.
    """
    u = apply_parametrix(f, pr, z)
    r = laplacian(u).values - complex(z) * u.values - f.values
    if f.is_real and complex(z).imag == 0:
        r = np.real(r)
    res = Field(f.grid, r)
    return res, res.l2_norm()


def write_remainder_csv(rows, path) -> None:
    """Rows of ``(N, z, residual_L2)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "z_re", "z_im", "residual_L2"])
        for N, z, norm in rows:
            z = complex(z)
            w.writerow([int(N), repr(z.real), repr(z.imag), repr(float(norm))])
