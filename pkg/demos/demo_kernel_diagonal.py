"""
Near-diagonal behaviour of the fractional kernel
================================================

"""

# the kernel of (-Delta)^s blows up like c_ns d^{-n-2s} near the diagonal
from fraclb.geometry import ManifoldGeometry
from fraclb.pvkernel import c_ns_constant, diagonal_asymptotics_check

# extrapolate d^{n+2s} K_s to d = 0 and compare with the flat constant
for M in (ManifoldGeometry.sphere(), ManifoldGeometry.torus(2)):
    for s in (0.25, 0.5, 0.75):
        rep = diagonal_asymptotics_check(M, s)
        print(f"{M}  s={s}  c_ns={c_ns_constant(M.dim, s):.6f}  "
              f"rel error {rep.relative_error:.2e}  residual slope {rep.slope:.2f}")
