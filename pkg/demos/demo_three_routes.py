"""
Three routes to the fractional Laplacian on the sphere
======================================================

"""

# build a Gauss-Legendre grid on S2 and a band-limited test field
import numpy as np
from fraclb.checks import reference_field
from fraclb.geometry import ManifoldGeometry, build_grid
grid = build_grid(ManifoldGeometry.sphere(), 64)
f = reference_field(grid)

# ground truth: multiply each spherical harmonic coefficient by lambda^s
from fraclb.spectral import fractional_apply_spectral
s = 0.5
truth = fractional_apply_spectral(f, s).values

# heat route: integrate f - e^{-tL} f against t^{-1-s}
from fraclb.heat import fractional_apply_heat
heat = fractional_apply_heat(f, s).values

# kernel route: principal value quadrature with the exact kernel
from fraclb.pvkernel import KernelSpec, PVScheme, pv_apply
pv = pv_apply(f, KernelSpec.default(grid.manifold, s), PVScheme.from_spacing(grid)).values

# compare in relative L2
def rel(a):
    return np.linalg.norm(a - truth) / np.linalg.norm(truth)

print(f"heat route  rel L2 error {rel(heat):.2e}")
print(f"pv route    rel L2 error {rel(pv):.2e}")
