"""
Pathwise energy balance
=======================

The Ito energy identity holds exactly in continuous time. On a grid the
left-point sums leave a residual, and refining the grid shows how fast it
goes away.
"""

# %%
import numpy as np

from ldplab import ModelParams, NoiseSpec, build_basis, fit_slope, simulate
from ldplab.diagnostics import energy_residual_ns, energy_residual_sg

basis = build_basis(8)
noise = NoiseSpec.canonical(basis)
chi = 1.0 / np.arange(1, 9) ** 2

# %%
for model, which in (("NS", None), ("SG", "V_norm"), ("SG", "vorticity")):
    hs, rms = [], []
    for n in (256, 512, 1024, 2048):
        p = ModelParams(model, 0.1, n_steps=n, nu=0.05 if model == "SG" else 0.0)
        tr = simulate(basis, p, chi, noise, seed=1, replicas=np.arange(100))
        res = energy_residual_ns(basis, tr, noise) if model == "NS" else \
            energy_residual_sg(basis, tr, noise, which)
        hs.append(p.h)
        rms.append(np.sqrt(np.mean(res.final**2)))
    print(f"{model:2s} {which or '':9s} residual exponent {fit_slope(hs, rms).slope:.3f}")
