"""
Hadamard parametrix for the resolvent
=====================================

"""

# the transport equation gives the leading amplitude along geodesics
import math
import numpy as np
from fraclb.geometry import ManifoldGeometry, build_grid
from fraclb.parametrix import ParametrixGeometry, ResolventParametrix, apply_parametrix, remainder_probe, solve_transport_u0
S2 = ManifoldGeometry.sphere()
prof = solve_transport_u0(ParametrixGeometry(S2), [1.0, 0.0], 0.9 * math.pi)
print(f"max |u0 - (r/sin r)^(1/2)| = {prof.abs_diff.max():.2e}")

# on T1 the depth-0 parametrix already reproduces (-Delta - z)^{-1}
from fraclb.checks import reference_field
from fraclb.spectral import resolvent_apply
T1 = ManifoldGeometry.torus(1)
grid = build_grid(T1, 256)
f = reference_field(grid)
approx = apply_parametrix(f, ResolventParametrix(T1, 0), -1.0).values
exact = resolvent_apply(f, -1.0).values
print(f"T1 rel L2 error {np.linalg.norm(approx - exact) / np.linalg.norm(exact):.2e}")

# on S2 the curvature term in depth 1 shrinks the remainder for low modes
grid = build_grid(S2, 32)
g = reference_field(grid)
for depth in (0, 1):
    _, norm = remainder_probe(ResolventParametrix(S2, depth), -4.0, g)
    print(f"S2 depth {depth} remainder {norm:.3e}")
