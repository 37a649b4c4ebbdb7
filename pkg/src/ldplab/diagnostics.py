"""Pathwise energy identities, Kato boundary-layer dissipation and corrector scalings.

All time integrals are left-point Riemann sums and all stochastic integrals
left-point Ito sums over the stored increments, so the residuals below measure
the discretization defect of the corresponding Ito identity.
"""
from dataclasses import dataclass

import numpy as np

from .fitting import fit_slope
from .spectral import composite_gauss_legendre, eval_field


@dataclass
class ResidualSeries:
    times: np.ndarray
    values: np.ndarray
    h: float

    @property
    def final(self):
        return self.values[..., -1]

    def rows(self):
        if self.values.ndim != 1:
            raise ValueError("rows() is defined for a single path")
        return list(zip(self.times, self.values))


def _cum_left(x, h):
    # left-point integral from 0 to t_i, for i = 0..n, along axis -1
    out = np.zeros(x.shape[:-1] + (x.shape[-1] + 1,))
    out[..., 1:] = np.cumsum(h * x, axis=-1)
    return out


def _require_increments(traj):
    if traj.dW is None:
        raise ValueError("trajectory has no stored Brownian increments")


def _ito_parts(traj, noise, weight):
    """Left-point sums ``sum_j sum_k w_k q_k u_jk dW_jk`` and ``h sum_j <w f_j, u_j>``."""
    u = traj.states[..., :-1, :]
    mart = np.sum(weight * noise.q * u * traj.dW, axis=-1)
    force = np.sum(weight * traj.forcing * u, axis=-1)
    return _cum_left(mart, 1.0), _cum_left(force, traj.h)


def energy_residual_ns(basis, traj, noise):
    """Defect of the NS energy identity at every grid time.

    ``|u_t|^2 + 2 eps int |grad u|^2 - |u_0|^2 - t eps tr Q
    - 2 sqrt(eps) int <u, dW> - 2 int <f, u>``.
    """
    _require_increments(traj)
    if traj.params.model != "NS":
        raise ValueError("energy_residual_ns needs an NS trajectory")
    eps = traj.params.epsilon
    u = traj.states
    en = np.sum(u**2, axis=-1)
    diss = _cum_left(np.sum(basis.lambdas * u[..., :-1, :] ** 2, axis=-1), traj.h)
    mart, force = _ito_parts(traj, noise, 1.0)
    res = (en + 2 * eps * diss - en[..., :1] - traj.times * eps * noise.trace
           - 2 * np.sqrt(eps) * mart - 2 * force)
    res[..., 0] = 0.0
    return ResidualSeries(traj.times, res, traj.h)


def energy_residual_sg(basis, traj, noise, which="V_norm"):
    """Defect of the second-grade identities.

    ``V_norm``: ``|u|_V^2 + 2 nu int |grad u|^2`` balance.
    ``vorticity``: balance of ``|curl(u - eps Lap u)|^2`` with drift
    ``-(2 nu/eps) <q - curl u, q>``.
    """
    _require_increments(traj)
    if traj.params.model != "SG":
        raise ValueError("energy_residual_sg needs an SG trajectory")
    eps, nu = traj.params.epsilon, traj.params.nu
    lam = basis.lambdas
    s = 1 + eps * lam
    u = traj.states
    left = u[..., :-1, :]
    if which == "V_norm":
        en = np.sum(s * u**2, axis=-1)
        drift = 2 * nu * _cum_left(np.sum(lam * left**2, axis=-1), traj.h)
        trace = eps * np.sum(noise.q**2 / s)
        mart, force = _ito_parts(traj, noise, 1.0)
    elif which == "vorticity":
        en = np.sum(lam * s**2 * u**2, axis=-1)
        drift = (2 * nu / eps) * _cum_left(np.sum(eps * lam**2 * s * left**2, axis=-1), traj.h)
        trace = eps * np.sum(lam * noise.q**2)
        mart, force = _ito_parts(traj, noise, lam * s)
    else:
        raise ValueError("which must be 'V_norm' or 'vorticity'")
    res = en + drift - en[..., :1] - traj.times * trace - 2 * np.sqrt(eps) * mart - 2 * force
    res[..., 0] = 0.0
    return ResidualSeries(traj.times, res, traj.h)


def energy_residual_euler(traj):
    """Defect of ``|u_t|^2 = |u_0|^2 + 2 int <f, u>`` along an Euler skeleton."""
    u = traj.states
    en = np.sum(u**2, axis=-1)
    force = _cum_left(np.sum(traj.forcing * u[..., :-1, :], axis=-1), traj.h)
    res = en - en[..., :1] - 2 * force
    res[..., 0] = 0.0
    return ResidualSeries(traj.times, res, traj.h)


def energy_balance_gap(basis, traj, noise):
    """Energy supplied to the path minus the viscous dissipation ``2 eps int |grad u|^2``, at T.

    Supplied energy is ``|u_0|^2 - |u_T|^2 + T eps tr Q + 2 sqrt(eps) int <u, dW>
    + 2 int <f, u>``. The Ito identity makes this ``-residual(T)``, and its
    eps -> 0 limit is what the inverse Kato argument controls.
    """
    _require_increments(traj)
    eps = traj.params.epsilon
    u = traj.states
    diss = traj.h * np.sum(basis.lambdas * u[..., :-1, :] ** 2, axis=(-2, -1))
    mart = np.sum(noise.q * u[..., :-1, :] * traj.dW, axis=(-2, -1))
    force = traj.h * np.sum(traj.forcing * u[..., :-1, :], axis=(-2, -1))
    supplied = (np.sum(u[..., 0, :] ** 2, axis=-1) - np.sum(u[..., -1, :] ** 2, axis=-1)
                + traj.params.T * eps * noise.trace + 2 * np.sqrt(eps) * mart + 2 * force)
    return supplied - 2 * eps * diss


# --------------------------------------------------------------------------
# Kato functional
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KatoSpec:
    c: float = 1.0
    epsilon: float = None
    annulus_panels: int = 16

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.annulus_panels < 16:
            raise ValueError("annulus_panels must be >= 16")


def annulus_dissipation(basis, coeffs, width, panels=16):
    """``2 pi int_{1-width}^1 (u'^2 + u^2/r^2) r dr`` for coefficient arrays."""
    if not 0 < width <= 1:
        raise ValueError("annulus must lie inside (0, 1]")
    r, w = composite_gauss_legendre(panels, 1.0 - width, 1.0)
    val, der = eval_field(basis, coeffs, r)
    return 2 * np.pi * np.sum((der**2 + (val / r) ** 2) * (w * r), axis=-1)


def kato_functional(basis, traj, spec, t_end=None):
    """``eps int_0^T |grad u|^2_{L2(strip of width c eps)} dt`` (left-point in time)."""
    eps = traj.params.epsilon if spec.epsilon is None else spec.epsilon
    width = spec.c * eps
    if not 0 < width < 1:
        raise ValueError(f"strip width c*eps = {width} must lie in (0, 1)")
    n = traj.states.shape[-2] - 1
    if t_end is not None:
        n = int(round(t_end / traj.h))
    dens = annulus_dissipation(basis, traj.states[..., :n, :], width, spec.annulus_panels)
    return eps * traj.h * np.sum(dens, axis=-1)


def full_dissipation(basis, traj, t_end=None):
    """``eps int_0^T |grad u|^2 dt`` over the whole disk, spectrally."""
    n = traj.states.shape[-2] - 1 if t_end is None else int(round(t_end / traj.h))
    u = traj.states[..., :n, :]
    return traj.params.epsilon * traj.h * np.sum(basis.lambdas * u**2, axis=(-2, -1))


# --------------------------------------------------------------------------
# Boundary-layer corrector
# --------------------------------------------------------------------------

def smoothstep(s):
    """Cutoff ``1 - 3s^2 + 2s^3`` and its derivative."""
    s = np.asarray(s, dtype=float)
    return 1 - 3 * s**2 + 2 * s**3, -6 * s + 6 * s**2


@dataclass(frozen=True)
class CorrectorSpec:
    delta: float
    profile: object = smoothstep

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        e0, _ = self.profile(0.0)
        e1, _ = self.profile(1.0)
        if e0 != 1 or e1 != 0:
            raise ValueError("profile must satisfy eta(0) = 1 and eta(1) = 0")


def _as_profile(basis, euler_field):
    if callable(euler_field):
        return euler_field
    coeffs = np.asarray(euler_field, dtype=float)
    return lambda r: eval_field(basis, coeffs, r)


class Corrector:
    """Radial corrector ``v(r) = u_E(r) eta((1 - r)/delta)`` on the outer strip."""

    def __init__(self, euler_profile, spec):
        self.u = euler_profile
        self.spec = spec

    def __call__(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        d = self.spec.delta
        inside = r > 1 - d
        s = np.clip((1 - r) / d, 0.0, 1.0)
        eta, deta = self.spec.profile(s)
        u, du = self.u(r)
        v = np.where(inside, u * eta, 0.0)
        dv = np.where(inside, du * eta - u * deta / d, 0.0)
        return v, dv

    def norms(self, panels=64):
        """``(|v|_L2, |grad v|_L2, |v|_inf, |rho grad v|_inf)`` with ``rho = 1 - r``."""
        d = self.spec.delta
        r, w = composite_gauss_legendre(panels, 1 - d, 1.0)
        v, dv = self(r)
        l2 = np.sqrt(2 * np.pi * np.sum(v**2 * w * r))
        grad = np.sqrt(2 * np.pi * np.sum((dv**2 + (v / r) ** 2) * w * r))
        dense = np.linspace(1 - d, 1.0, 8 * panels + 1)
        vd, dvd = self(dense)
        linf = float(np.max(np.abs(vd)))
        rho_grad = float(np.max((1 - dense) * np.sqrt(dvd**2 + (vd / dense) ** 2)))
        return float(l2), float(grad), linf, rho_grad


def corrector_build(basis, euler_field, spec):
    """Corrector for an Euler profile given as coefficients or as ``r -> (u, u')``."""
    return Corrector(_as_profile(basis, euler_field), spec)


def corrector_scaling_check(basis, euler_field, delta_list, profile=smoothstep, panels=64):
    """Log-log exponents of ``|v|``, ``|grad v|``, ``|v|_inf`` against delta.

    Returns ``(rows, fits)``; rows are ``(delta, l2, grad_l2, linf, rho_grad_linf)``.
    """
    rows = []
    for d in delta_list:
        c = corrector_build(basis, euler_field, CorrectorSpec(d, profile))
        rows.append((d,) + c.norms(panels))
    arr = np.array(rows)
    usable = arr[:, 1] > 0
    if usable.sum() < 3:
        raise ValueError("degenerate fit: fewer than 3 usable points")
    fits = {name: fit_slope(arr[usable, 0], arr[usable, col])
            for name, col in (("l2", 1), ("grad_l2", 2), ("linf", 3))}
    return rows, fits
