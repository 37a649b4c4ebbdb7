"""Exact mode-wise integration of the radial stochastic NS and second-grade systems.

In the circularly symmetric class the self-advection is a pure pressure
gradient, so both systems reduce to independent Ornstein-Uhlenbeck processes

    du_k = (-a_k u_k + g_k f_k) dt + s_k sqrt(eps) q_k dW_k

with ``a_k = eps lambda_k``, ``g_k = s_k = 1`` (NS) or
``a_k = nu lambda_k / (1 + eps lambda_k)``, ``g_k = s_k = 1/(1 + eps lambda_k)`` (SG).
Controls are piecewise constant on the time grid, which makes the forcing
convolution closed form.
"""
import csv
import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from . import rng
from .spectral import decay_rates, rkhs_norm_sq

MODELS = ("NS", "SG", "Euler")


@dataclass(frozen=True)
class ModelParams:
    model: str
    epsilon: float
    T: float = 1.0
    n_steps: int = 512
    nu: float = 0.0
    c_ratio: float = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.model != "Euler" and not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not self.T > 0:
            raise ValueError("T must be > 0")
        if int(self.n_steps) < 1:
            raise ValueError("n_steps must be >= 1")
        if self.nu < 0:
            raise ValueError("nu must be >= 0")
        if self.model == "SG" and self.c_ratio is not None and self.nu > self.c_ratio * self.epsilon:
            raise ValueError(f"nu={self.nu} violates nu <= {self.c_ratio} * epsilon")

    @property
    def h(self):
        return self.T / self.n_steps

    @property
    def times(self):
        return np.linspace(0.0, self.T, self.n_steps + 1)

    def rates(self, basis):
        return decay_rates(basis, self.model, self.epsilon, self.nu)

    def gain(self, basis):
        """Factor multiplying both forcing and noise in the u-equation."""
        if self.model == "SG":
            return 1.0 / (1.0 + self.epsilon * basis.lambdas)
        return np.ones(basis.K)

    def with_(self, **kw):
        d = asdict(self)
        d.update(kw)
        return ModelParams(**d)


@dataclass(frozen=True, eq=False)
class ControlPath:
    """Piecewise-constant control: row ``i`` holds ``f`` on ``[t_i, t_{i+1})``."""
    values: np.ndarray
    energy_bound: float = np.inf

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim < 2:
            raise ValueError("control values must be (n_steps, K) or (replicas, n_steps, K)")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, n_steps, K):
        return cls(np.zeros((n_steps, K)))

    @classmethod
    def constant(cls, f, n_steps):
        f = np.atleast_1d(np.asarray(f, dtype=float))
        return cls(np.tile(f, (n_steps, 1)))

    @property
    def n_steps(self):
        return self.values.shape[-2]

    def energy(self, noise, h):
        """``int_0^T ||f_s||_H0^2 ds``; +inf outside the RKHS span."""
        return np.sum(h * rkhs_norm_sq(noise, self.values), axis=-1)

    def check(self, noise, h):
        if np.any(np.isinf(rkhs_norm_sq(noise, self.values))):
            raise ValueError("control charges a mode with q_k = 0 (outside the RKHS span)")
        e = self.energy(noise, h)
        if np.any(e > self.energy_bound * (1 + 1e-12)):
            raise ValueError(f"control energy {np.max(e):.4g} exceeds bound N={self.energy_bound}")


@dataclass(eq=False)
class Trajectory:
    """States on a uniform grid plus the Brownian increments that drove them.

    ``states`` has shape ``(n_steps + 1, K)`` for one path or
    ``(R, n_steps + 1, K)`` for a batch; ``dW`` matches with ``n_steps`` rows.
    """
    times: np.ndarray
    states: np.ndarray
    dW: np.ndarray
    params: ModelParams
    seed: int = 0
    control: ControlPath = None
    replicas: np.ndarray = field(default=None, repr=False)

    @property
    def h(self):
        return self.params.h

    @property
    def forcing(self):
        if self.control is None:
            return np.zeros(self.dW.shape)
        return np.broadcast_to(self.control.values, self.dW.shape)

    def to_csv(self, path):
        """Write ``t,mode_1..`` states, a sibling ``_dw.csv`` and a JSON sidecar."""
        if self.states.ndim != 2:
            raise ValueError("export handles single paths only")
        stem = path[:-4] if path.endswith(".csv") else path
        K = self.states.shape[1]
        header = ["t"] + [f"mode_{k + 1}" for k in range(K)]
        _write_rows(stem + ".csv", header, np.column_stack([self.times, self.states]))
        _write_rows(stem + "_dw.csv", header,
                    np.column_stack([self.times[:-1], self.dW]))
        side = {"params": asdict(self.params), "seed": int(self.seed)}
        with open(stem + ".json", "w") as fh:
            json.dump(side, fh, indent=1)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format(float(x), ".17g") for x in row])


def read_trajectory_csv(path):
    """Inverse of ``Trajectory.to_csv``."""
    stem = path[:-4] if path.endswith(".csv") else path
    states = np.loadtxt(stem + ".csv", delimiter=",", skiprows=1, ndmin=2)
    dw = np.loadtxt(stem + "_dw.csv", delimiter=",", skiprows=1, ndmin=2)
    with open(stem + ".json") as fh:
        side = json.load(fh)
    return Trajectory(states[:, 0], states[:, 1:], dw[:, 1:], ModelParams(**side["params"]),
                      side["seed"])


def _phi_factors(a, h):
    """``(1 - e^{-ah})/a`` and ``sqrt((1 - e^{-2ah})/(2ah))`` with their a -> 0 limits."""
    ah = a * h
    small = ah < 1e-300
    safe = np.where(small, 1.0, ah)
    drift = np.where(small, h, -np.expm1(-safe) / np.where(small, 1.0, a))
    noise = np.where(small, 1.0, np.sqrt(-np.expm1(-2 * safe) / (2 * safe)))
    return drift, noise


def simulate(basis, params, chi, noise, control=None, seed=0, replicas=None):
    """Exact OU update of every mode over the grid of ``params``.

    Brownian increments are drawn first (variance ``h``) and the exact
    convolution Gaussian is set to ``G = dW sqrt((1 - e^{-2ah})/(2ah))``, so
    the stored ``dW`` are genuine Brownian increments of a grid-coupled path.
    ``replicas=None`` simulates the single path with replica id 0; an array of
    ids gives a batch with a leading replica axis.
    """
    if params.model == "Euler":
        raise ValueError("use euler_skeleton for the inviscid skeleton")
    chi = np.asarray(chi, dtype=float)
    K, n, h = basis.K, params.n_steps, params.h
    if chi.shape[-1] != K or noise.K != K:
        raise ValueError("initial condition, noise and basis sizes differ")
    if control is None:
        control = ControlPath.zeros(n, K)
    if control.n_steps != n or control.values.shape[-1] != K:
        raise ValueError("control grid does not match params")
    control.check(noise, h)

    single = replicas is None
    ids = np.atleast_1d(np.asarray(0 if single else replicas, dtype=np.uint64))
    dW = np.transpose(rng.brownian_increments(seed, ids, K, n, params.T), (0, 2, 1))

    a = params.rates(basis)
    gain = params.gain(basis)
    drift_f, noise_f = _phi_factors(a, h)
    decay = np.exp(-a * h)
    sig = np.sqrt(params.epsilon) * noise.q * gain * noise_f
    fvals = np.broadcast_to(control.values, (len(ids), n, K))

    states = np.empty((len(ids), n + 1, K))
    states[:, 0] = chi
    v = np.broadcast_to(chi, (len(ids), K)).copy()
    for i in range(n):
        v = decay * v + gain * drift_f * fvals[:, i] + sig * dW[:, i]
        states[:, i + 1] = v
    if not np.all(np.isfinite(states)):
        raise FloatingPointError("non-finite state encountered")
    if single:
        states, dW = states[0], dW[0]
        if control.values.ndim == 3:
            control = ControlPath(control.values[0], control.energy_bound)
    return Trajectory(params.times, states, dW, params, seed, control,
                      None if single else ids)


def simulate_radial_ns(basis, params, chi, noise, control=None, seed=0, replicas=None):
    if params.model != "NS":
        raise ValueError("simulate_radial_ns needs model='NS'")
    return simulate(basis, params, chi, noise, control, seed, replicas)


def simulate_radial_sg(basis, params, chi, noise, control=None, seed=0, replicas=None):
    if params.model != "SG":
        raise ValueError("simulate_radial_sg needs model='SG'")
    return simulate(basis, params, chi, noise, control, seed, replicas)


def euler_skeleton(chi, control, T):
    """Radial Euler solution ``chi + int_0^t f ds`` for a piecewise-constant control."""
    chi = np.asarray(chi, dtype=float)
    n = control.n_steps
    h = T / n
    states = np.empty((n + 1, chi.shape[-1]))
    states[0] = chi
    states[1:] = chi + h * np.cumsum(control.values, axis=0)
    params = ModelParams("Euler", 0.0, T, n)
    return Trajectory(params.times, states, np.zeros((n, chi.shape[-1])), params, 0, control)


def mild_forcing(basis, params, control):
    """Deterministic forcing convolution ``z`` with ``z_0 = 0`` (exact at grid times)."""
    n, h = params.n_steps, params.h
    a = params.rates(basis)
    gain = params.gain(basis)
    drift_f, _ = _phi_factors(a, h)
    decay = np.exp(-a * h)
    z = np.zeros((n + 1, basis.K))
    for i in range(n):
        z[i + 1] = decay * z[i] + gain * drift_f * control.values[i]
    return Trajectory(params.times, z, np.zeros((n, basis.K)), params, 0, control)


def increment_shift(basis, params, noise, tilt_values):
    """Brownian-increment shift equivalent to applying ``tilt`` over one cell.

    The exact update adds ``g (1 - e^{-ah})/a f`` to the state and scales the
    increment by ``g sqrt(eps) q sqrt((1 - e^{-2ah})/(2ah))``; their ratio is the
    shift of ``dW`` that reproduces the control. It tends to ``f h/(sqrt(eps) q)``
    as ``ah -> 0``. Modes with ``q_k = 0`` get no shift.
    """
    a = params.rates(basis)
    drift_f, noise_f = _phi_factors(a, params.h)
    live = noise.q > 0
    scale = np.sqrt(params.epsilon) * np.where(live, noise.q, 1.0) * noise_f
    return np.where(live, np.asarray(tilt_values) * drift_f / scale, 0.0)


def girsanov_log_weight(shift, dW, h):
    """``log dP/dQ = -sum(s dW)/h - sum(s^2)/(2h)`` for increment shifts ``s``.

    With ``s = f h/(sqrt(eps) q)`` this is the usual
    ``-(1/sqrt(eps)) sum (f/q) dW - (1/(2 eps)) sum h ||f||_H0^2``.
    """
    return -(np.sum(shift * dW, axis=(-2, -1)) + 0.5 * np.sum(shift**2, axis=(-2, -1))) / h


def tilted_simulate(basis, params, chi, noise, tilt, seed=0, replicas=None):
    """Simulate under the Girsanov-shifted measure; return ``(traj, log_weight)``.

    ``E_tilted[1_A exp(log_weight)] = P(A)`` for events of the zero-control system.
    """
    if np.any(np.isinf(rkhs_norm_sq(noise, tilt.values))):
        raise ValueError("tilt is outside the RKHS span")
    traj = simulate(basis, params, chi, noise, tilt, seed, replicas)
    shift = increment_shift(basis, params, noise, traj.forcing)
    lw = girsanov_log_weight(shift, traj.dW, params.h)
    return traj, lw


def sg_layer_width(eps):
    """Boundary-layer width used for second-grade experiments, ``delta = eps^(1/2)``."""
    return float(np.sqrt(eps))


def batches(n, chunk):
    """Replica id ranges ``[lo, hi)`` covering ``n`` replicas."""
    for lo in range(0, n, chunk):
        yield np.arange(lo, min(n, lo + chunk), dtype=np.uint64)
