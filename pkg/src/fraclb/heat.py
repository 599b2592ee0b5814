r"""Heat kernels on the model manifolds and the heat-semigroup route to fractional powers.

The fractional power is normalized as

.. math::
    (-\Delta_g)^s f = \frac{1}{|\Gamma(-s)|}\int_0^\infty \bigl(f - e^{-t(-\Delta_g)}f\bigr)\,\frac{dt}{t^{1+s}},
    \qquad 0 < s < 1,

which reproduces :math:`\lambda^s` on every eigenfunction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError, DomainError
from .geometry import (
    Field,
    ManifoldGeometry,
    ball_volume,
    geodesic_distance,
    theta_of_distance,
)
from .specfun import legendre_table
from .spectral import apply_multiplier, default_basis

TWO_PI = 2.0 * math.pi
_EXP_CUT = 745.0

__all__ = [
    "TimeQuadrature",
    "HeatKernelModel",
    "sphere_heat",
    "sphere_heat_matrix",
    "torus_heat",
    "heat_kernel_exact",
    "u0_of_distance",
    "U1Calibration",
    "calibrate_u1",
    "heat_parametrix",
    "li_yau_check",
    "heat_scalar_integral",
    "heat_multiplier",
    "fractional_apply_heat",
    "heat_error_pieces",
    "time_completion_remainder",
]


def _gl_panels(edges: np.ndarray, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    t = 0.5 * (b - a) * (x + 1.0) + a
    wt = 0.5 * (b - a) * w
    return t.ravel(), wt.ravel()


@dataclass(frozen=True)
class TimeQuadrature:
    """Geometric Gauss-Legendre panels on ``(t_min, t_max]`` split at ``split_point``.

    Panel edges grow by ``ratio`` away from the split point in both
    directions; each panel carries ``order`` nodes.
    """

    split_point: float = 1.0
    t_max: float = 50.0
    ratio: float = 1.15
    order: int = 8

    def edges(self, t_lo: float, t_hi: float) -> np.ndarray:
        if not (0 < t_lo < t_hi):
            raise DomainError("need 0 < t_lo < t_hi")
        sp = self.split_point
        down = [sp]
        while down[-1] > t_lo:
            down.append(max(down[-1] / self.ratio, t_lo))
        up = [sp]
        while up[-1] < t_hi:
            up.append(min(up[-1] * self.ratio, t_hi))
        e = np.array(sorted(set(down) | set(up)))
        return e[(e >= t_lo) & (e <= t_hi)]

    def nodes(self, t_lo: float, t_hi: float | None = None):
        """Nodes and weights on ``[t_lo, t_hi]`` (``t_hi`` defaults to ``t_max``)."""
        return _gl_panels(self.edges(t_lo, self.t_max if t_hi is None else t_hi), self.order)

    def refined(self) -> "TimeQuadrature":
        return TimeQuadrature(self.split_point, self.t_max, math.sqrt(self.ratio), self.order)


@dataclass(frozen=True)
class HeatKernelModel:
    """Selects exact series/closed forms or the short-time parametrix of a given order."""

    manifold: ManifoldGeometry
    mode: str = "exact"
    order: int = 0
    band_limit: int | None = None

    def __post_init__(self):
        if self.mode not in ("exact", "parametrix"):
            raise DomainError(f"unknown heat kernel mode {self.mode!r}")

    def __call__(self, x, y, t):
        if self.mode == "exact":
            return heat_kernel_exact(self.manifold, x, y, t)
        return heat_parametrix(self.manifold, x, y, t, self.order)


# --- sphere ------------------------------------------------------------------


def _series_degree(t: float) -> int:
    return int(math.ceil(math.sqrt(40.0 / t))) + 2


def sphere_heat_matrix(d, t, max_degree: int = 20000) -> np.ndarray:
    """Legendre-series heat kernel on ``S^2``, shape ``(len(t), len(d))``.

    The series is summed in absolute precision (~1e-14); use
    :func:`sphere_heat` with ``method="images"`` where relative accuracy in
    the Gaussian tail matters.
    """
    d = np.atleast_1d(np.asarray(d, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise DomainError("t must be positive")
    L = _series_degree(float(t.min()))
    if L > max_degree:
        raise ConvergenceError(f"series needs degree {L} at t={t.min():.3g}; use the parametrix or images")
    ell = np.arange(L + 1)
    P = legendre_table(L, np.cos(d))
    coef = (2 * ell + 1) / (4 * math.pi)
    E = np.exp(-np.outer(t, ell * (ell + 1.0))) * coef
    G = E @ P
    # terms below e^{-745} relative to the Gaussian are pure cancellation noise
    G[(d[None, :] ** 2 / (4 * t[:, None])) > _EXP_CUT] = 0.0
    return G


def _images_integrand(u, theta, t, kmax):
    phi = theta + u * u
    base = 2.0 * math.sin(theta + 0.5 * u * u) * math.sin(0.5 * u * u)
    if base <= 0.0:
        return 0.0
    tot = phi * math.exp(-phi * phi / (4 * t))
    for k in range(1, kmax + 1):
        sgn = -1.0 if k % 2 else 1.0
        p1, p2 = phi + TWO_PI * k, phi - TWO_PI * k
        tot += sgn * (p1 * math.exp(-p1 * p1 / (4 * t)) + p2 * math.exp(-p2 * p2 / (4 * t)))
    return 2.0 * u * tot / math.sqrt(base)


def _sphere_heat_images_scalar(theta: float, t: float) -> float:
    # alternating image sum of the Mehler-type integral representation
    theta = min(max(theta, 0.0), math.pi)
    kmax = max(1, int(math.ceil(math.sqrt(4 * t * 40) / TWO_PI)) + 1)
    top = math.sqrt(math.pi - theta)
    if top == 0.0:
        top = 1e-12
    # split at the Gaussian width so quad sees the peak
    width = min(top, math.sqrt(max(8 * t / max(theta, math.sqrt(t)), 1e-14)))
    pts = [0.0, width, top] if width < top else [0.0, top]
    val = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        v, _ = integrate.quad(_images_integrand, a, b, args=(theta, t, kmax), epsabs=0.0, epsrel=1e-13, limit=200)
        val += v
    return math.sqrt(2.0) * math.exp(t / 4) / (4 * math.pi * t) ** 1.5 * val


def sphere_heat(d, t, method: str = "auto"):
    """Heat kernel on the unit sphere as a function of geodesic distance.

    ``method`` is ``"series"`` (Legendre expansion), ``"images"`` (integral
    representation with an alternating image sum, accurate in relative terms
    deep in the Gaussian tail) or ``"auto"`` (images for ``t < 0.1``).
    """
    d, t = np.broadcast_arrays(np.asarray(d, dtype=float), np.asarray(t, dtype=float))
    out = np.empty(d.shape)
    use_images = (t < 0.1) if method == "auto" else np.full(d.shape, method == "images")
    if method not in ("auto", "series", "images"):
        raise DomainError(f"unknown method {method!r}")
    for idx in np.ndindex(d.shape):
        if use_images[idx]:
            out[idx] = _sphere_heat_images_scalar(float(d[idx]), float(t[idx]))
    ser = ~use_images
    if ser.any():
        for tv in np.unique(t[ser]):
            mask = ser & (t == tv)
            out[mask] = sphere_heat_matrix(d[mask], [tv])[0]
    return float(out) if out.ndim == 0 else out


# --- torus -------------------------------------------------------------------


def _torus1d(delta, t):
    delta, t = np.broadcast_arrays(np.asarray(delta, dtype=float), np.asarray(t, dtype=float))
    delta = np.mod(delta + math.pi, TWO_PI) - math.pi
    out = np.empty(delta.shape)
    small = t <= 2.0
    if small.any():
        ts = t[small]
        m = int(math.ceil(math.sqrt(4 * float(ts.max()) * 35.0) / TWO_PI)) + 1
        nu = np.arange(-m, m + 1)
        x = delta[small][..., None] - TWO_PI * nu
        out[small] = np.sum(np.exp(-x * x / (4 * ts[..., None])), axis=-1) / np.sqrt(4 * math.pi * ts)
    if (~small).any():
        tl = t[~small]
        kmax = int(math.ceil(math.sqrt(35.0 / float(tl.min())))) + 1
        k = np.arange(1, kmax + 1)
        terms = np.exp(-np.multiply.outer(tl, k * k)) * np.cos(np.multiply.outer(delta[~small], k))
        out[~small] = (1.0 + 2.0 * terms.sum(axis=-1)) / TWO_PI
    return out


def torus_heat(diff, t):
    """Periodized Gaussian on ``T^n``; ``diff`` is the coordinate difference ``x - y``."""
    diff = np.asarray(diff, dtype=float)
    out = _torus1d(diff[..., 0], t)
    for j in range(1, diff.shape[-1]):
        out = out * _torus1d(diff[..., j], t)
    return float(out) if out.ndim == 0 else out


def heat_kernel_exact(M: ManifoldGeometry, x, y, t, method: str = "auto"):
    """Exact heat kernel ``G(x, y, t)``; broadcasts over points and times."""
    if np.any(np.asarray(t) <= 0):
        raise DomainError("t must be positive")
    if M.is_sphere:
        return sphere_heat(geodesic_distance(M, x, y), t, method)
    return torus_heat(np.asarray(x, float) - np.asarray(y, float), t)


# --- short-time parametrix -----------------------------------------------------


def u0_of_distance(M: ManifoldGeometry, d):
    """Leading amplitude ``Theta^{-1/2}``."""
    return theta_of_distance(M, d) ** -0.5


@dataclass(frozen=True)
class U1Calibration:
    """First heat-parametrix coefficient on ``S^2`` calibrated from the exact kernel.

    ``coef`` holds a polynomial in ``d^2``; ``node_values`` the per-node fits
    and ``fit_error`` the largest disagreement between the polynomial and
    the nodes. ``node_spread`` estimates the per-node extrapolation error.
    """

    d_max: float
    coef: np.ndarray
    nodes: np.ndarray = field(repr=False)
    node_values: np.ndarray = field(repr=False)
    fit_error: float = 0.0
    node_spread: float = 0.0

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        if np.any(d > self.d_max + 1e-12):
            raise DomainError(f"U1 calibrated only for d <= {self.d_max}")
        return np.polynomial.polynomial.polyval(d * d, self.coef)


def _u1_node(d: float, t_lo: float, degree: int):
    ts = np.geomspace(t_lo, 8 * t_lo, 14)
    G = np.array([sphere_heat(d, t, method="images") for t in ts])
    gauss = np.exp(-d * d / (4 * ts)) / (4 * math.pi * ts)
    r = (G / gauss - u0_of_distance(ManifoldGeometry.sphere(), d)) / ts
    fit = np.polynomial.polynomial.polyfit(ts, r, degree)
    fit_lo = np.polynomial.polynomial.polyfit(ts, r, degree - 1)
    return fit[0], abs(fit[0] - fit_lo[0])


@lru_cache(maxsize=4)
def calibrate_u1(d_max: float = 1.6, n_nodes: int = 17) -> U1Calibration:
    """Calibrate ``U_1(d)`` on ``S^2`` for ``0 <= d <= d_max``.

    At each Chebyshev node the rescaled residual
    ``(G / gauss - U_0) / t`` is fitted by a polynomial in ``t`` over a short
    geometric window and extrapolated to ``t = 0``.
    """
    k = np.arange(n_nodes)
    nodes = 0.5 * d_max * (1 - np.cos(math.pi * k / (n_nodes - 1)))
    vals, spreads = [], []
    for d in nodes:
        t_lo = max(4e-3, d * d / 60.0)
        v, sp = _u1_node(float(d), t_lo, 4)
        vals.append(v)
        spreads.append(sp)
    vals = np.array(vals)
    coef = np.polynomial.polynomial.polyfit(nodes**2, vals, 8)
    resid = np.max(np.abs(np.polynomial.polynomial.polyval(nodes**2, coef) - vals))
    return U1Calibration(d_max, coef, nodes, vals, float(resid), float(max(spreads)))


def heat_parametrix(M: ManifoldGeometry, x, y, t, order: int = 0):
    """Short-time expansion ``(4 pi t)^{-n/2} e^{-d^2/4t} sum_{j<=order} U_j t^j``.

    On the torus ``U_0 = 1`` and the higher coefficients vanish. On the
    sphere ``U_0 = Theta^{-1/2}`` and ``U_1`` comes from :func:`calibrate_u1`;
    orders above one are not available.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.any(t > 1):
        raise DomainError("heat_parametrix needs 0 < t <= 1")
    d = np.asarray(geodesic_distance(M, x, y))
    if np.any(d >= M.injectivity_radius):
        raise DomainError("heat_parametrix needs d < injectivity radius")
    n = M.dim
    gauss = (4 * math.pi * t) ** (-n / 2) * np.exp(-d * d / (4 * t))
    if not M.is_sphere:
        return gauss
    if order > 1:
        raise DomainError("sphere parametrix available up to order 1")
    amp = u0_of_distance(M, d)
    if order == 1:
        amp = amp + calibrate_u1()(d) * t
    return gauss * amp


# --- Li-Yau --------------------------------------------------------------------


def li_yau_check(
    M: ManifoldGeometry,
    d_samples,
    t_samples,
    C_candidate: float,
    exponent_constant: float = 1.0,
    clip_curvature: bool = True,
):
    """Compare the exact heat kernel with the Li-Yau Gaussian upper bound.

    The bound is ``C V(B(sqrt t))^{-1} e^{-a kappa t} e^{-d^2/5t}`` with
    ``a = exponent_constant``. With ``clip_curvature`` the lower Ricci bound
    enters as ``min(kappa, 0)``: a positive lower bound is also a lower bound
    zero, and the unclipped factor decays while the kernel tends to
    ``1/vol``.

    Returns
    -------
    holds : bool
        Whether ``C_candidate`` dominates at every sample.
    tightest_C : float
        Smallest constant that works on the sample lattice.
    """
    d = np.asarray(d_samples, dtype=float)
    t = np.asarray(t_samples, dtype=float)
    kappa = min(M.ricci_lower, 0.0) if clip_curvature else M.ricci_lower
    D, T = np.meshgrid(d, t, indexing="ij")
    if M.is_sphere:
        G = sphere_heat(D, T)
    else:
        diff = np.zeros(D.shape + (M.dim,))
        diff[..., 0] = D
        G = torus_heat(diff, T)
    # homogeneous spaces: both balls have the same volume
    vol = ball_volume(M, np.sqrt(T))
    shape = np.exp(-exponent_constant * kappa * T) * np.exp(-D * D / (5 * T)) / vol
    ratio = G / shape
    tightest = float(np.max(ratio))
    return bool(tightest <= C_candidate), tightest


# --- heat-semigroup route --------------------------------------------------------


def _check_s(s: float) -> None:
    if not (0.0 < s < 1.0):
        raise DomainError(f"heat route needs s in (0, 1), got {s}")


def _head(lam, s, t0):
    # int_0^t0 (1 - e^{-t lam}) t^{-1-s} dt by its power series, lam * t0 <= 1e-3
    out = np.zeros_like(lam, dtype=float)
    term_fact = 1.0
    for j in range(1, 8):
        term_fact *= j
        out += (-1) ** (j + 1) * lam**j * t0 ** (j - s) / (term_fact * (j - s))
    return out


def heat_multiplier(lam, s: float, tq: TimeQuadrature | None = None, t_lo: float | None = None, t_hi: float | None = None):
    """Quadrature of ``(1/|Gamma(-s)|) int (1 - e^{-t lam}) t^{-1-s} dt`` per eigenvalue.

    Without bounds the integral runs over ``(0, infinity)``: the piece below
    the first node is added by series and the piece above ``t_max`` is the
    exact ``t_max^{-s}/s`` minus an exponentially small remainder bounded by
    ``e^{-lam_min t_max} t_max^{-1-s} / lam_min``.

    Returns
    -------
    multiplier : ndarray
    tail_bound : float
        Bound on the dropped remainder, relative to ``|Gamma(-s)|``.
    """
    _check_s(s)
    tq = tq or TimeQuadrature()
    lam = np.asarray(lam, dtype=float)
    pos = lam[lam > 0]
    lam_max = float(pos.max()) if pos.size else 1.0
    lam_min = float(pos.min()) if pos.size else 1.0
    lower = 1e-3 / lam_max if t_lo is None else t_lo
    upper = tq.t_max if t_hi is None else t_hi
    t, w = tq.nodes(lower, upper)
    body = (1.0 - np.exp(-np.outer(lam, t))) @ (w * t ** (-1.0 - s))
    if t_lo is None:
        body = body + _head(lam, s, lower)
    tail_bound = 0.0
    if t_hi is None:
        body = body + np.where(lam > 0, upper ** (-s) / s, 0.0)
        tail_bound = math.exp(-lam_min * upper) * upper ** (-1.0 - s) / lam_min
    return body / abs(special.gamma(-s)), tail_bound / abs(special.gamma(-s))


def heat_scalar_integral(lam: float, s: float, tq: TimeQuadrature | None = None) -> float:
    """``int_0^infty (1 - e^{-t lam}) t^{-1-s} dt`` by the time quadrature (no normalization)."""
    m, _ = heat_multiplier(np.array([lam]), s, tq)
    return float(m[0]) * abs(special.gamma(-s))


def fractional_apply_heat(f: Field, s: float, tq: TimeQuadrature | None = None, basis=None, tail_tol: float = 1e-10) -> Field:
    """``(-Delta_g)^s f`` through the heat-semigroup integral.

    The semigroup acts spectrally on the band-limited input; the time
    integral is a quadrature, not a closed form.

    Raises
    ------
    ConvergenceError
        If the analytic tail bound beyond ``t_max`` exceeds ``tail_tol``.
    """
    basis = basis or default_basis(f.grid)
    a = basis.analyze(f.values)
    active = np.abs(a) > 1e-14 * max(np.max(np.abs(a)), 1e-300)
    lams = basis.lambdas[active]
    _, bound = heat_multiplier(lams if lams.size else np.array([1.0]), s, tq)
    if bound > tail_tol:
        raise ConvergenceError(f"time tail bound {bound:.2e} exceeds {tail_tol:.1e}; raise t_max")
    return apply_multiplier(f, lambda lam: heat_multiplier(lam, s, tq)[0], basis)


def heat_error_pieces(f: Field, s: float, point_index: int, tq: TimeQuadrature | None = None, radius: float = 1.0) -> dict:
    """Split the heat representation at one grid point into its three pieces.

    ``large``: times ``t > 1``; ``far``: ``t <= 1`` and ``d > radius``;
    ``near``: the remainder (small times near the diagonal). The ratios
    ``C_large`` and ``C_far`` divide the first two by ``max|f|``.
    """
    _check_s(s)
    tq = tq or TimeQuadrature()
    grid = f.grid
    M = grid.manifold
    basis = default_basis(grid)
    total = fractional_apply_heat(f, s, tq, basis).values[point_index]
    m_large, _ = heat_multiplier(basis.lambdas, s, tq, t_lo=tq.split_point, t_hi=tq.t_max)
    m_large = m_large + np.where(basis.lambdas > 0, tq.t_max ** (-s) / s, 0.0) / abs(special.gamma(-s))
    a = basis.analyze(f.values)
    large = np.real(basis.synthesize(m_large * a))[point_index]
    x = grid.points[point_index]
    d = np.asarray(geodesic_distance(M, x, grid.points))
    far_mask = d > radius
    t_lo = radius * radius / (4 * 700.0)
    t, w = tq.nodes(t_lo, tq.split_point)
    if M.is_sphere:
        G = sphere_heat_matrix(d[far_mask], t)
    else:
        diff = np.asarray(x) - grid.points[far_mask]
        G = np.array([torus_heat(diff, tv) for tv in t])
    df = (np.real(f.values[point_index]) - np.real(f.values[far_mask])) * grid.weights[far_mask]
    far = float((G @ df) @ (w * t ** (-1.0 - s))) / abs(special.gamma(-s))
    near = float(np.real(total)) - large - far
    scale = float(np.max(np.abs(f.values)))
    pieces = {"total": float(np.real(total)), "large": float(large), "far": float(far), "near": float(near)}
    pieces["C_large"] = abs(pieces["large"]) / scale
    pieces["C_far"] = abs(pieces["far"]) / scale
    return pieces


def time_completion_remainder(n: int, s: float, d) -> np.ndarray:
    """Fraction of the full-range time integral contributed by ``t > 1``.

    For the Gaussian model ``(4 pi t)^{-n/2} e^{-d^2/4t} t^{-1-s}`` the integral
    over ``(0, infinity)`` is ``Gamma(n/2+s) (d^2/4)^{-n/2-s} (4 pi)^{-n/2}``;
    the share above ``t = 1`` is the regularized lower incomplete gamma
    ``P(n/2+s, d^2/4)``.
    """
    d = np.asarray(d, dtype=float)
    return special.gammainc(n / 2 + s, d * d / 4.0)
