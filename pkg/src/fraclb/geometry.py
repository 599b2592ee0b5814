"""Model manifolds, quadrature grids and eigenbases.

Two closed manifolds are supported: the flat torus ``R^n / (2 pi Z)^n`` for
``n`` in {1, 2}, and the unit sphere ``S^2``. Points are plain arrays of
chart coordinates (angles on the torus, ``(theta, phi)`` colatitude and
longitude on the sphere) with the last axis holding the coordinates.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, GridMismatchError
from .specfun import normalized_legendre_table

TWO_PI = 2.0 * math.pi

__all__ = [
    "ManifoldGeometry",
    "Grid",
    "Field",
    "EigenPair",
    "Eigenbasis",
    "canonical_point",
    "geodesic_distance",
    "exp_map",
    "jacobian_theta",
    "theta_of_distance",
    "ball_volume",
    "sphere_area",
    "build_grid",
    "eigenbasis",
    "write_field_csv",
    "read_field_csv",
]


@dataclass(frozen=True)
class ManifoldGeometry:
    """A model closed manifold.

    Use :meth:`torus` or :meth:`sphere` rather than the constructor.
    """

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind == "torus" and self.dim not in (1, 2):
            raise DomainError("torus dimension must be 1 or 2")
        if self.kind == "sphere" and self.dim != 2:
            raise DomainError("only the unit 2-sphere is supported")
        if self.kind not in ("torus", "sphere"):
            raise DomainError(f"unknown manifold kind {self.kind!r}")

    @classmethod
    def torus(cls, n: int = 1) -> "ManifoldGeometry":
        return cls("torus", n)

    @classmethod
    def sphere(cls) -> "ManifoldGeometry":
        return cls("sphere", 2)

    @property
    def is_sphere(self) -> bool:
        return self.kind == "sphere"

    @property
    def ricci_lower(self) -> float:
        return 1.0 if self.is_sphere else 0.0

    @property
    def injectivity_radius(self) -> float:
        return math.pi

    @property
    def diameter(self) -> float:
        return math.pi if self.is_sphere else math.pi * math.sqrt(self.dim)

    @property
    def volume(self) -> float:
        return 4.0 * math.pi if self.is_sphere else TWO_PI**self.dim

    def __str__(self) -> str:
        return "S2" if self.is_sphere else f"T{self.dim}"


def canonical_point(M: ManifoldGeometry, x) -> np.ndarray:
    """Normalize chart coordinates into their canonical ranges."""
    x = np.array(x, dtype=float)
    if x.shape[-1] != M.dim:
        raise DomainError(f"expected {M.dim} coordinates, got shape {x.shape}")
    if not M.is_sphere:
        return np.mod(x, TWO_PI)
    return _from_unit(_to_unit(x))


def _to_unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    th, ph = x[..., 0], x[..., 1]
    st = np.sin(th)
    return np.stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)], axis=-1)


def _from_unit(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    th = np.arccos(np.clip(p[..., 2], -1.0, 1.0))
    ph = np.mod(np.arctan2(p[..., 1], p[..., 0]), TWO_PI)
    return np.stack([th, ph], axis=-1)


def geodesic_distance(M: ManifoldGeometry, x, y) -> np.ndarray | float:
    """Geodesic distance; broadcasts over leading axes of ``x`` and ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if M.is_sphere:
        # atan2 form is accurate at both small and near-antipodal separations
        px, py = _to_unit(x), _to_unit(y)
        cross = np.linalg.norm(np.cross(px, py), axis=-1)
        dot = np.sum(px * py, axis=-1)
        d = np.arctan2(cross, dot)
    else:
        diff = np.mod(x - y, TWO_PI)
        diff = np.minimum(diff, TWO_PI - diff)
        d = np.sqrt(np.sum(diff * diff, axis=-1))
    return float(d) if np.ndim(d) == 0 else d


def exp_map(M: ManifoldGeometry, x, direction, r):
    """Point reached from ``x`` along a unit tangent ``direction`` after length ``r``.

    On the sphere ``direction`` is an angle measured in the tangent frame
    ``(e_theta, e_phi)``; on the torus it is a vector of length ``dim``.
    """
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    if not M.is_sphere:
        v = np.asarray(direction, dtype=float)
        v = v / np.linalg.norm(v)
        return np.mod(x + r[..., None] * v, TWO_PI)
    alpha = float(direction)
    th, ph = x[0], x[1]
    p = _to_unit(x)
    e_th = np.array([math.cos(th) * math.cos(ph), math.cos(th) * math.sin(ph), -math.sin(th)])
    e_ph = np.array([-math.sin(ph), math.cos(ph), 0.0])
    v = math.cos(alpha) * e_th + math.sin(alpha) * e_ph
    y = np.cos(r)[..., None] * p + np.sin(r)[..., None] * v
    return _from_unit(y)


def theta_of_distance(M: ManifoldGeometry, d):
    """Volume density of the exponential map at geodesic distance ``d``."""
    d = np.asarray(d, dtype=float)
    if not M.is_sphere:
        out = np.ones_like(d)
    else:
        out = np.ones_like(d)
        nz = d > 0
        out[nz] = np.sin(d[nz]) / d[nz]
    return float(out) if out.ndim == 0 else out


def jacobian_theta(M: ManifoldGeometry, x, y):
    """Jacobian of the exponential map centred at ``x``, evaluated at ``y``."""
    d = geodesic_distance(M, x, y)
    if np.any(np.asarray(d) >= M.injectivity_radius):
        raise DomainError("jacobian_theta requires d(x, y) < injectivity radius")
    return theta_of_distance(M, d)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2 for n=1, 2 pi for n=2)."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def ball_volume(M: ManifoldGeometry, r):
    """Volume of a geodesic ball; capped at the total volume."""
    r = np.asarray(r, dtype=float)
    if M.is_sphere:
        v = TWO_PI * (1.0 - np.cos(np.minimum(r, math.pi)))
    else:
        n = M.dim
        v = np.minimum(sphere_area(n) * r**n / n, M.volume)
    return float(v) if v.ndim == 0 else v


@dataclass(frozen=True, eq=False)
class Grid:
    """Product quadrature grid on a model manifold.

    Attributes
    ----------
    manifold : ManifoldGeometry
    resolution : int
    points : ndarray, shape (N, dim)
    weights : ndarray, shape (N,)
    shape : tuple
        Tensor shape of the grid; values reshape to it in C order.
        ``(res,)`` or ``(res, res)`` on the torus, ``(res, 2 res)`` on the sphere.
    """

    manifold: ManifoldGeometry
    resolution: int
    points: np.ndarray
    weights: np.ndarray
    shape: tuple
    axes: tuple = field(repr=False)

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def spacing(self) -> float:
        """Nominal point spacing: ``2 pi / res`` on the torus, ``pi / res`` on the sphere."""
        return (math.pi if self.manifold.is_sphere else TWO_PI) / self.resolution

    def integrate(self, values) -> complex | float:
        """Quadrature sum over the first axis of ``values``."""
        out = np.tensordot(self.weights, np.asarray(values), axes=(0, 0))
        return out.item() if out.ndim == 0 else out

    def refined(self, factor: int = 2) -> "Grid":
        return build_grid(self.manifold, self.resolution * factor)


def build_grid(M: ManifoldGeometry, resolution: int) -> Grid:
    """Quadrature grid with exact integration of band-limited products.

    Torus: uniform product rule. Sphere: Gauss-Legendre in ``cos(theta)``
    times ``2 * resolution`` uniform longitudes.
    """
    if resolution < 4:
        raise DomainError("resolution must be >= 4")
    res = int(resolution)
    if not M.is_sphere:
        x = TWO_PI * np.arange(res) / res
        mesh = np.meshgrid(*([x] * M.dim), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        w = np.full(res**M.dim, (TWO_PI / res) ** M.dim)
        return Grid(M, res, pts, w, (res,) * M.dim, (x,) * M.dim)
    nodes, glw = np.polynomial.legendre.leggauss(res)
    order = np.argsort(-nodes)
    theta = np.arccos(nodes[order])
    glw = glw[order]
    phi = TWO_PI * np.arange(2 * res) / (2 * res)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    pts = np.stack([th.ravel(), ph.ravel()], axis=-1)
    w = np.repeat(glw * (TWO_PI / (2 * res)), 2 * res)
    return Grid(M, res, pts, w, (res, 2 * res), (theta, phi, glw))


@dataclass(eq=False)
class Field:
    """Samples of a function on a grid.

    ``coeffs`` optionally caches the spectral coefficients together with the
    basis they refer to, as a ``(Eigenbasis, ndarray)`` pair.
    """

    grid: Grid
    values: np.ndarray
    mean_zero: bool = False
    coeffs: tuple | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.grid.size,):
            raise GridMismatchError(f"values have shape {self.values.shape}, grid has {self.grid.size} points")
        if self.mean_zero:
            mean = self.grid.integrate(self.values) / self.grid.manifold.volume
            scale = max(float(np.max(np.abs(self.values))), 1e-300)
            if abs(mean) >= 1e-8 * scale:
                raise DomainError(f"field flagged mean-zero has mean {abs(mean):.3e}")

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def mean(self):
        return self.grid.integrate(self.values) / self.grid.manifold.volume

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.integrate(np.abs(self.values) ** 2)))

    def with_values(self, values, mean_zero: bool = False) -> "Field":
        return Field(self.grid, values, mean_zero=mean_zero)


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalue of ``-Delta_g`` with its label and grid eigenfunction."""

    label: tuple
    lam: float
    eigenfunction: Field


class Eigenbasis:
    """Orthonormal eigenbasis of ``-Delta_g`` through a band limit.

    Torus: ``e^{i k.x} / (2 pi)^{n/2}`` with ``max |k_j| <= band_limit``.
    Sphere: real spherical harmonics ``Y_{l,m}``, ``l <= band_limit``, stored at
    flat index ``l^2 + l + m``.

    Transforms run through FFTs (torus) or a direct Legendre/Fourier
    transform on the Gauss-Legendre grid (sphere), so the dense eigenfunction matrix is only formed on request.
    """

    def __init__(self, manifold: ManifoldGeometry, band_limit: int, grid: Grid | None = None):
        if band_limit < 0:
            raise DomainError("band_limit must be >= 0")
        if grid is not None:
            if grid.manifold != manifold:
                raise GridMismatchError("grid belongs to a different manifold")
            nyq = grid.resolution - 1 if manifold.is_sphere else (grid.resolution - 1) // 2
            if band_limit > nyq:
                raise DomainError(f"band_limit {band_limit} exceeds grid Nyquist limit {nyq}")
        self.manifold = manifold
        self.band_limit = int(band_limit)
        self.grid = grid
        L = self.band_limit
        if manifold.is_sphere:
            self.labels = [(ell, m) for ell in range(L + 1) for m in range(-ell, ell + 1)]
            self.lambdas = np.array([ell * (ell + 1) for ell, _ in self.labels], dtype=float)
        else:
            ks = range(-L, L + 1)
            self.labels = list(itertools.product(ks, repeat=manifold.dim))
            self.lambdas = np.array([sum(k * k for k in lab) for lab in self.labels], dtype=float)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        mat = self.matrix()
        for i, lab in enumerate(self.labels):
            yield EigenPair(lab, float(self.lambdas[i]), Field(self.grid, mat[i]))

    def index(self, label) -> int:
        return self.labels.index(tuple(label))

    @property
    def is_complex(self) -> bool:
        return not self.manifold.is_sphere

    def _require_grid(self) -> Grid:
        if self.grid is None:
            raise GridMismatchError("basis has no grid attached")
        return self.grid

    @cached_property
    def _sphere_tables(self):
        grid = self._require_grid()
        theta, phi, glw = grid.axes
        L = self.band_limit
        q = normalized_legendre_table(L, theta)  # [l, m, i]
        m = np.arange(L + 1)
        cos_t = np.cos(np.outer(m, phi))
        sin_t = np.sin(np.outer(m, phi))
        return q, cos_t, sin_t, glw * (TWO_PI / phi.size)

    def analyze(self, values) -> np.ndarray:
        """Weighted inner products with every basis function."""
        grid = self._require_grid()
        values = np.asarray(values)
        if values.shape != (grid.size,):
            raise GridMismatchError("values do not match the basis grid")
        L = self.band_limit
        if self.manifold.is_sphere:
            q, cos_t, sin_t, wth = self._sphere_tables
            f = values.reshape(grid.shape)
            fc = (f @ cos_t.T) * wth[:, None]  # [i, m]
            fs = (f @ sin_t.T) * wth[:, None]
            ac = np.einsum("lmi,im->lm", q, fc)
            as_ = np.einsum("lmi,im->lm", q, fs)
            out = np.zeros(len(self), dtype=np.result_type(values, float))
            root2 = math.sqrt(2.0)
            for ell in range(L + 1):
                base = ell * ell + ell
                out[base] = ac[ell, 0]
                for m in range(1, ell + 1):
                    out[base + m] = root2 * ac[ell, m]
                    out[base - m] = root2 * as_[ell, m]
            return out
        n, res = self.manifold.dim, grid.resolution
        F = np.fft.fftn(values.reshape(grid.shape))
        scale = (TWO_PI / res) ** n / TWO_PI ** (n / 2)
        idx = tuple(np.array([lab[j] for lab in self.labels]) % res for j in range(n))
        return F[idx] * scale

    def synthesize(self, coeffs) -> np.ndarray:
        """Grid samples of ``sum_k coeffs[k] * phi_k``."""
        grid = self._require_grid()
        coeffs = np.asarray(coeffs)
        L = self.band_limit
        if self.manifold.is_sphere:
            q, cos_t, sin_t, _ = self._sphere_tables
            ac = np.zeros((L + 1, L + 1), dtype=np.result_type(coeffs, float))
            as_ = np.zeros_like(ac)
            root2 = math.sqrt(2.0)
            for ell in range(L + 1):
                base = ell * ell + ell
                ac[ell, 0] = coeffs[base]
                for m in range(1, ell + 1):
                    ac[ell, m] = root2 * coeffs[base + m]
                    as_[ell, m] = root2 * coeffs[base - m]
            gc = np.einsum("lmi,lm->im", q, ac)
            gs = np.einsum("lmi,lm->im", q, as_)
            return (gc @ cos_t + gs @ sin_t).ravel()
        n, res = self.manifold.dim, grid.resolution
        F = np.zeros(grid.shape, dtype=complex)
        idx = tuple(np.array([lab[j] for lab in self.labels]) % res for j in range(n))
        F[idx] = coeffs
        return np.fft.ifftn(F).ravel() * (res**n / TWO_PI ** (n / 2))

    @cached_property
    def _sphere_dtheta(self):
        q, _, _, _ = self._sphere_tables
        L = self.band_limit
        dq = np.zeros_like(q)
        qp = np.concatenate([q, np.zeros((L + 1, 1) + q.shape[2:])], axis=1)  # q[l, L+1] = 0
        for ell in range(1, L + 1):
            dq[ell, 0] = -math.sqrt(ell * (ell + 1)) * qp[ell, 1]
            for m in range(1, ell + 1):
                a = math.sqrt((ell + m) * (ell - m + 1))
                b = math.sqrt((ell - m) * (ell + m + 1))
                dq[ell, m] = 0.5 * (a * qp[ell, m - 1] - b * qp[ell, m + 1])
        return dq

    def synthesize_dtheta(self, coeffs) -> np.ndarray:
        """Grid samples of the colatitude derivative (sphere only)."""
        if not self.manifold.is_sphere:
            raise DomainError("colatitude derivative is defined on the sphere")
        _, cos_t, sin_t, _ = self._sphere_tables
        dq = self._sphere_dtheta
        coeffs = np.asarray(coeffs)
        L = self.band_limit
        ac = np.zeros((L + 1, L + 1), dtype=np.result_type(coeffs, float))
        as_ = np.zeros_like(ac)
        root2 = math.sqrt(2.0)
        for ell in range(L + 1):
            base = ell * ell + ell
            ac[ell, 0] = coeffs[base]
            for m in range(1, ell + 1):
                ac[ell, m] = root2 * coeffs[base + m]
                as_[ell, m] = root2 * coeffs[base - m]
        gc = np.einsum("lmi,lm->im", dq, ac)
        gs = np.einsum("lmi,lm->im", dq, as_)
        return (gc @ cos_t + gs @ sin_t).ravel()

    def matrix(self) -> np.ndarray:
        """Dense samples, shape ``(len(self), grid.size)``."""
        eye = np.eye(len(self))
        return np.array([self.synthesize(e) for e in eye])

    def gram(self) -> np.ndarray:
        """Weighted Gram matrix of the sampled basis."""
        mat = self.matrix()
        return (mat.conj() * self._require_grid().weights) @ mat.T


def eigenbasis(M: ManifoldGeometry, band_limit: int, grid: Grid | None = None) -> Eigenbasis:
    """Eigenbasis of ``-Delta_g`` through ``band_limit``, optionally sampled on ``grid``."""
    return Eigenbasis(M, band_limit, grid)


def write_field_csv(f: Field, path) -> None:
    """One row per grid point: coord_1..coord_n, weight, value_re, value_im."""
    n = f.grid.manifold.dim
    vals = np.asarray(f.values, dtype=complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"coord_{j + 1}" for j in range(n)] + ["weight", "value_re", "value_im"])
        for p, wt, v in zip(f.grid.points, f.grid.weights, vals):
            w.writerow([repr(float(c)) for c in p] + [repr(float(wt)), repr(float(v.real)), repr(float(v.imag))])


def read_field_csv(path, grid: Grid) -> Field:
    """Read values written by :func:`write_field_csv` back onto ``grid``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != grid.size:
        raise GridMismatchError(f"{path}: {len(rows)} rows for a grid of {grid.size} points")
    n = grid.manifold.dim
    pts = np.array([[float(r[f"coord_{j + 1}"]) for j in range(n)] for r in rows])
    if not np.allclose(pts, grid.points, atol=1e-12):
        raise GridMismatchError(f"{path}: coordinates do not match the grid")
    vals = np.array([complex(float(r["value_re"]), float(r["value_im"])) for r in rows])
    if np.all(vals.imag == 0):
        vals = vals.real
    return Field(grid, vals)
