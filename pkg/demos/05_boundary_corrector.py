"""
A boundary-layer corrector
==========================

Cut the Euler profile off inside a strip of width delta so that the
difference satisfies the no-slip condition, then watch the norms scale.
"""

# %%
import numpy as np

from ldplab.diagnostics import CorrectorSpec, corrector_build, corrector_scaling_check


def solid_rotation(r):
    r = np.asarray(r, dtype=float)
    return r, np.ones_like(r)


# %%
v = corrector_build(None, solid_rotation, CorrectorSpec(0.1))
r = np.linspace(0.85, 1.0, 7)
print(np.round(v(r)[0], 4))

# %%
rows, fits = corrector_scaling_check(None, solid_rotation, [0.1, 0.05, 0.025, 0.0125])
for d, l2, grad, linf, rho_grad in rows:
    print(f"delta={d:<7} |v|={l2:.4f} |grad v|={grad:.3f} sup={linf:.3f} sup(rho|grad v|)={rho_grad:.3f}")
print({k: round(f.slope, 3) for k, f in fits.items()})
