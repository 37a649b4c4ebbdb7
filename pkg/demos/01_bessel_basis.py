"""
The radial Bessel basis
=======================

Build the first few eigenmodes of the radial operator on the unit disk and
look at what the quadrature says about them.
"""

# %%
import numpy as np

from ldplab import build_basis, eval_field

basis = build_basis(8)
print("zeros  ", np.round(basis.zeros, 6))
print("lambdas", np.round(basis.lambdas, 3))

# %%
# Orthonormality under the area weight 2*pi*r dr, and the gradient energy of
# each mode, which should reproduce its eigenvalue.
print("max |G - I| =", basis.gram_deviation())
print("H1 energy / lambda - 1:", np.abs(basis.h1_energies() / basis.lambdas - 1).max())

# %%
# Every mode vanishes at the wall.
r = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
vals, ders = basis.phi(r)
print(np.round(vals, 4))

# %%
# A field is a coefficient vector; evaluate one on a radial grid.
coeffs = 1.0 / np.arange(1, 9) ** 2
u, du = eval_field(basis, coeffs, np.linspace(0, 1, 6))
print("u  =", np.round(u, 4))
print("u' =", np.round(du, 4))
