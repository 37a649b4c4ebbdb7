"""
Vanishing viscosity and the boundary strip
==========================================

Compare the viscous solution with the Euler solution as eps shrinks, then
measure how much dissipation happens inside the strip of width c*eps.
"""

# %%
import numpy as np

from ldplab import ModelParams, NoiseSpec, build_basis, fit_slope, simulate
from ldplab.diagnostics import KatoSpec, kato_functional
from ldplab.experiments import inviscid_sweep

basis = build_basis(16)
noise = NoiseSpec.canonical(basis)
eps_list = [0.1, 0.05, 0.025, 0.0125]
chi = np.zeros(16)
chi[0] = 1.0

# %%
rows, fits = inviscid_sweep(basis, noise, chi, eps_list, n=300, T=0.1, n_steps=256, seed=0)
for row in rows:
    print("eps={:<7} total={:.3e} semigroup={:.3e} noise={:.3e}".format(
        row[0], row[1], row[3], row[5]))
print({k: round(v.slope, 3) for k, v in fits.items()})

# %%
vals = []
for eps in eps_list:
    tr = simulate(basis, ModelParams("NS", eps, n_steps=256), chi, noise, seed=1,
                  replicas=np.arange(50))
    vals.append(kato_functional(basis, tr, KatoSpec(c=1.0)).mean())
print("strip dissipation", np.round(vals, 6), "slope", round(fit_slope(eps_list, vals).slope, 3))
