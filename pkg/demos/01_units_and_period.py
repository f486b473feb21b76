# From fabricated waveguide numbers to the dimensionless model, and the
# Bloch period that sets the length scale of every later demo.
import math

from zigzag import PhysicalParams, bloch_period, nondimensionalize

# Coupling C = 0.44 /cm, propagation-constant step alpha0 = 0.044 /mm.
# Note the mixed units: the unit tags are converted before dividing.
phys = PhysicalParams(C=0.44, alpha0=0.044, alpha0_unit="1/mm",
                      alpha_plus=1.8, alpha_minus=2.0, beta=0.15)
params, c_per_cm = nondimensionalize(phys)
print("lambda =", params.lam)
print("Z = C z, with C =", c_per_cm, "per cm")

zp = bloch_period(params.lam, params.beta)
print(f"Bloch period Z_p = {zp:.5f}  ->  {zp / c_per_cm:.2f} cm of waveguide")

# Without next-nearest coupling the period is exactly 2 pi / lambda.
print(bloch_period(1.0, 0.0), 2 * math.pi)

# The period only exists while lambda^2 > 4 beta^2.
try:
    bloch_period(0.2, 0.15)
except ValueError as exc:
    print("error:", exc)
