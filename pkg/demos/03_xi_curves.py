# The displacement parameters xi+ and xi- decide which regime we are in:
# whichever has the larger swing dominates the dynamics.
import numpy as np

from zigzag import AMPLIFIED, ATTENUATED, make_context, xi_curves, z_factors

z = np.linspace(0, 10, 11)
for name, params in (("amplified", AMPLIFIED), ("attenuated", ATTENUATED)):
    rp, ip, rm, im = xi_curves(z, make_context(params))
    print(name)
    print("   Z    |xi+|   |xi-|")
    for row in zip(z, np.hypot(rp, ip), np.hypot(rm, im)):
        print("  %4.1f  %6.3f  %6.3f" % row)

# The remaining Z-dependent factors at one distance.
zf = z_factors(3.2, make_context(AMPLIFIED))
print("nu =", zf.nu)
print("g0 =", zf.g0)
print("g1 =", zf.g1)
