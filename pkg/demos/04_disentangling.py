# exp(A+ K+ + A0 K0 + A- K-) = exp(f K+) exp(g K0) exp(h K-), checked three
# ways: in 2x2 matrices, against the propagator factors, and in the Fock basis.
import numpy as np
from scipy.linalg import expm

from zigzag import AMPLIFIED, TripleCoefficients, disentangle, make_context, z_factors
from zigzag.exact import s_element
from zigzag.su11 import annihilation, creation, factored_product_2x2, su11_closed_form_2x2

t = TripleCoefficients(0.3 + 0.1j, -0.8j, 0.5)
ff = disentangle(t)
print("f, g, h =", ff.f, ff.g, ff.h)
print("2x2 residual:", np.abs(factored_product_2x2(ff) - su11_closed_form_2x2(t)).max())

# The propagator needs A+- = 2 i beta Z and A0 = 2 i lambda Z.
lam, beta, Z = AMPLIFIED.lam, AMPLIFIED.beta, 3.2
ff = disentangle(TripleCoefficients(2j * beta * Z, 2j * lam * Z, 2j * beta * Z))
zf = z_factors(Z, make_context(AMPLIFIED))
print("g1 vs f:", zf.g1, ff.f)
print("exp(-g0/2) vs exp(-g/2):", np.exp(-zf.g0 / 2), ff.exp_minus_half_g)

# Fock-basis elements of the squeezing factor against a dense product.
dim = 60
a, ad = annihilation(dim), creation(dim)
k0 = np.diag((np.arange(dim) + 0.5) / 2)
dense = expm(zf.g1 * ad @ ad / 2) @ expm(zf.g0 * k0) @ expm(zf.g1 * a @ a / 2)
block = np.array([[s_element(m, k, zf) for k in range(12)] for m in range(12)])
print("max |S - dense| over 12x12:", np.abs(block - dense[:12, :12]).max())
