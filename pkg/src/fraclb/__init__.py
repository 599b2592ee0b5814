"""Numerical lab for fractional Laplace-Beltrami operators on T^1, T^2 and S^2.

Three routes to ``(-Delta_g)^s`` are implemented and cross-checked: the
spectral calculus (ground truth on band-limited fields), the heat-semigroup
integral, and the principal-value singular integral with its
Hadamard-parametrix kernel.
"""

from .errors import ConvergenceError, DomainError, GridMismatchError, PrecisionWarning
from .geometry import (
    Eigenbasis,
    Field,
    Grid,
    ManifoldGeometry,
    build_grid,
    eigenbasis,
    exp_map,
    geodesic_distance,
    jacobian_theta,
)
from .heat import fractional_apply_heat, heat_kernel_exact, li_yau_check
from .parametrix import (
    BesselPotential,
    ParametrixGeometry,
    ResolventParametrix,
    apply_parametrix,
    f_nu_eval,
    remainder_probe,
    solve_transport_u0,
)
from .pvkernel import (
    KernelSpec,
    PVScheme,
    c_ns_constant,
    diagonal_asymptotics_check,
    exact_offdiagonal_kernel,
    kernel_eval,
    pv_apply,
    riesz_apply,
)
from .spectral import contour_power_scalar, fractional_apply_spectral, resolvent_apply

__version__ = "0.1.0"
