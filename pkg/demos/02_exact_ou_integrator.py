"""
Exact stepping of the radial dynamics
=====================================

In the radial class the nonlinearity drops out, so each mode is an
Ornstein-Uhlenbeck process. The integrator uses the exact transition law,
which means the terminal moments do not depend on the step size.
"""

# %%
import numpy as np

from ldplab import ModelParams, NoiseSpec, build_basis, simulate

basis = build_basis(1)
noise = NoiseSpec([1.0])
eps = 0.1

# %%
for n_steps in (1, 8, 256):
    p = ModelParams("NS", eps, T=1.0, n_steps=n_steps)
    x = simulate(basis, p, [1.0], noise, seed=n_steps, replicas=np.arange(50_000)).states[:, -1, 0]
    print(f"n_steps={n_steps:4d}  mean={x.mean():.5f}  var={x.var():.3e}")

a = eps * basis.lambdas[0]
print(f"closed form       mean={np.exp(-a):.5f}  var={eps * (1 - np.exp(-2 * a)) / (2 * a):.3e}")

# %%
# The second-grade model damps mode k at rate nu*lambda/(1 + eps*lambda),
# never faster than nu/eps.
basis32 = build_basis(32)
sg = ModelParams("SG", eps, nu=0.05)
print("largest SG rate", sg.rates(basis32).max(), "<= nu/eps =", 0.05 / eps)

# %%
# Paths on a grid and on its dyadic refinement share the same Brownian motion.
noise32 = NoiseSpec.canonical(basis32)
coarse = simulate(basis32, ModelParams("NS", eps, n_steps=64), np.zeros(32), noise32, seed=3)
fine = simulate(basis32, ModelParams("NS", eps, n_steps=128), np.zeros(32), noise32, seed=3)
print("coupling defect", np.abs(fine.dW[0::2] + fine.dW[1::2] - coarse.dW).max())
