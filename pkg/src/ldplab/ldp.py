"""Rate functionals, optimal controls and rare-event / Laplace estimators.

The rate of a path ``v`` in the radial class is ``(1/2) int ||Q^{-1/2} dv/dt||^2 dt``:
the nonlinearity is a pure gradient there, so the skeleton is ``dv/dt = f``.
"""
from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import logsumexp

from . import rng
from .sde import ControlPath, batches, increment_shift, simulate
from .spectral import rkhs_norm_sq

Z95 = 1.959963984540054


def rate_functional(noise, states, T):
    """Rate of the piecewise-linear interpolant of ``states`` on a uniform grid over [0, T].

    The derivative is taken cell-wise, ``(v_{i+1} - v_i)/h``, so the value is
    exact for every skeleton driven by a grid-aligned piecewise-constant control.
    Returns ``inf`` if a mode with ``q_k = 0`` moves.
    """
    v = np.asarray(states, dtype=float)
    if v.ndim != 2 or v.shape[0] < 3:
        raise ValueError("rate_functional needs a (n_nodes >= 3, K) state grid")
    h = T / (v.shape[0] - 1)
    dv = np.diff(v, axis=0)
    dead = noise.q == 0
    tol = 1e-12 * (1 + np.max(np.abs(v)))
    if np.any(np.abs(v[:, dead] - v[0, dead]) > tol):
        return np.inf
    live = ~dead
    speed = dv[:, live] / h
    return float(0.5 * h * np.sum(speed**2 / noise.q[live] ** 2))


def optimal_terminal_control(noise, target_offset, T, n_steps=1, chi=None):
    """Cheapest control moving the skeleton's terminal state by ``target_offset``.

    Constant in time, ``f = offset/T``, at cost ``sum offset_k^2 / (2 T q_k^2)``.
    ``chi`` is accepted for symmetry with the skeleton; the cost does not depend on it.
    """
    off = np.asarray(target_offset, dtype=float)
    if np.any((off != 0) & (noise.q == 0)):
        raise ValueError("offset charges a mode with q_k = 0")
    ctrl = ControlPath.constant(off / T, n_steps)
    cost = 0.5 * rkhs_norm_sq(noise, off) / T
    return ctrl, float(cost)


def terminal_ball_rate(noise, rho, T):
    """``rho^2 / (2 T max_k q_k^2)``: cheapest exit from the ball of radius ``rho``."""
    qmax = float(np.max(noise.q)) if noise.K else 0.0
    if qmax == 0:
        raise ValueError("all noise amplitudes vanish")
    return rho**2 / (2 * T * qmax**2)


@dataclass(frozen=True)
class RareEventSpec:
    kind: str
    rho: float
    mode: int = 1
    center: np.ndarray = None

    def __post_init__(self):
        if self.kind not in ("terminal_ball", "single_mode_exceed"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if not self.rho > 0:
            raise ValueError("rho must be > 0")
        if self.mode < 1:
            raise ValueError("mode is 1-based")

    def hit(self, terminal, center):
        d = terminal - center
        if self.kind == "terminal_ball":
            return np.sqrt(np.sum(d**2, axis=-1)) > self.rho
        return np.abs(d[..., self.mode - 1]) > self.rho

    def rate(self, noise, T):
        if self.kind == "terminal_ball":
            return terminal_ball_rate(noise, self.rho, T)
        q = noise.q[self.mode - 1]
        return np.inf if q == 0 else self.rho**2 / (2 * T * q**2)

    def minimizers(self, noise):
        """Offsets of least cost on the event boundary (one per sign and tied mode)."""
        K = noise.K
        if self.mode > K:
            raise ValueError("mode exceeds basis size")
        if self.kind == "single_mode_exceed":
            modes = [self.mode - 1] if noise.q[self.mode - 1] > 0 else []
        else:
            qmax = np.max(noise.q)
            modes = [k for k in range(K) if qmax > 0 and noise.q[k] == qmax]
        out = []
        for k in modes:
            for sgn in (1.0, -1.0):
                e = np.zeros(K)
                e[k] = sgn * self.rho
                out.append(e)
        return out


@dataclass
class EstimatorResult:
    p_hat: float
    ci_low: float
    ci_high: float
    n_samples: int
    epsilon: float
    neg_eps_log_p: float
    method: str
    hits: int = 0
    std_error: float = 0.0

    def to_dict(self):
        return asdict(self)


def _result(samples_sum, samples_sq, hits, n, eps, method):
    p = samples_sum / n
    var = max(samples_sq / n - p**2, 0.0)
    se = np.sqrt(var / n)
    if hits == 0:
        lo, hi = 0.0, 3.0 / n if method == "plain" else 0.0
    else:
        lo, hi = max(p - Z95 * se, 0.0), min(p + Z95 * se, 1.0)
    p = min(p, 1.0)
    nelp = np.inf if p == 0 else float(-eps * np.log(p))
    return EstimatorResult(float(p), float(min(lo, p)), float(max(hi, p)), int(n), float(eps),
                           nelp, method, int(hits), float(se))


def mixture_log_weights(shifts, used_shift, dW, h):
    """``log dP/dQ_mix`` for paths drawn from an equal-weight mixture of tilts.

    ``shifts`` holds the increment shift ``(n_steps, K)`` of every component;
    each path was simulated with ``used_shift`` (its own component) and ``dW``.
    With a single component this is the ordinary Girsanov log weight.
    """
    dW_p = dW + used_shift  # increments of the untilted Brownian motion
    logs = [(np.sum(s * dW_p, axis=(-2, -1)) - 0.5 * np.sum(s**2)) / h for s in shifts]
    return -(logsumexp(np.stack(logs), axis=0) - np.log(len(shifts)))


def estimate_rare_event(basis, params, chi, noise, spec, n, method="plain", seed=0,
                        control=None, margin=0.1, chunk=20000):
    """Monte Carlo estimate of the event probability at ``params.epsilon``.

    The event is measured against the Euler terminal state ``chi + int f``.
    ``tilted`` samples from the equal mixture of Girsanov shifts toward every
    least-cost offset (scaled by ``1 + margin``), weighting each path by the
    mixture likelihood ratio.
    """
    if n < 1000:
        raise ValueError("n must be >= 1000")
    if method not in ("plain", "tilted"):
        raise ValueError("method must be 'plain' or 'tilted'")
    K, T, ns = basis.K, params.T, params.n_steps
    base = np.zeros((ns, K)) if control is None else control.values
    center = np.asarray(chi, dtype=float) + params.h * base.sum(axis=0) \
        if spec.center is None else np.asarray(spec.center, dtype=float)

    if method == "tilted":
        offsets = spec.minimizers(noise)
        if not offsets:
            raise ValueError("event is unreachable for this noise (no live minimizer)")
        comps = [np.tile((1 + margin) * o / T, (ns, 1)) for o in offsets]
        shifts = np.stack([increment_shift(basis, params, noise, c) for c in comps])

    s1 = s2 = 0.0
    hits = 0
    for ids in batches(n, chunk):
        if method == "plain":
            tr = simulate(basis, params, chi, noise, ControlPath(base), seed, ids)
            ind = spec.hit(tr.states[:, -1], center).astype(float)
            s1 += ind.sum()
            s2 += ind.sum()
            hits += int(ind.sum())
            continue
        if len(comps) == 1:
            labels = np.zeros(len(ids), dtype=int)
        else:
            u = rng.uniforms(seed, ids, 0, 0, tag=rng.MIXTURE)
            labels = np.minimum((u * len(comps)).astype(int), len(comps) - 1)
        tilt = np.stack(comps)[labels]
        tr = simulate(basis, params, chi, noise, ControlPath(base + tilt), seed, ids)
        lw = mixture_log_weights(shifts, shifts[labels], tr.dW, params.h)
        ind = spec.hit(tr.states[:, -1], center)
        w = np.where(ind, np.exp(lw), 0.0)
        s1 += w.sum()
        s2 += (w**2).sum()
        hits += int(ind.sum())
    return _result(s1, s2, hits, n, params.epsilon, method)


def laplace_functional(basis, params, chi, noise, beta, mode=1, n=10**5, seed=0,
                       chunk=200000):
    """Estimate ``-eps log E exp(-beta u_mode(T)^2 / eps)`` by plain Monte Carlo.

    The average is taken in log space so that tiny exponentials do not underflow.
    Plain sampling is biased upward once the paths that dominate the expectation
    lie many standard deviations from the mean.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if beta == 0:
        return 0.0
    eps = params.epsilon
    parts, count = [], 0
    for ids in batches(n, chunk):
        tr = simulate(basis, params, chi, noise, None, seed, ids)
        x = tr.states[:, -1, mode - 1]
        parts.append(logsumexp(-beta * x**2 / eps))
        count += len(ids)
    log_mean = logsumexp(parts) - np.log(count)
    if not np.isfinite(log_mean):
        raise FloatingPointError("all exponentials underflowed; use a tilted estimator")
    return float(-eps * log_mean)


def laplace_limit(beta, m0, T, q):
    """``inf_f {h(skeleton) + I(f)} = beta m0^2 / (1 + 2 beta T q^2)``."""
    return beta * m0**2 / (1 + 2 * beta * T * q**2)


def _is_dyadic(eps_list):
    e = sorted(eps_list, reverse=True)
    return all(np.isclose(a / b, 2.0, rtol=1e-9) for a, b in zip(e, e[1:]))


def ldp_convergence_study(basis, params, chi, noise, spec, eps_list, n, seed=0,
                          method="tilted", control=None):
    """Sweep ``eps`` and compare ``-eps log p`` with the rate prediction.

    Returns ``(rows, extrapolated)``; ``extrapolated`` is the Richardson limit
    ``2 y(eps_min) - y(2 eps_min)`` from the two smallest values.
    """
    if len(eps_list) < 4 or not _is_dyadic(eps_list):
        raise ValueError("eps_list must hold >= 4 dyadic values")
    pred = spec.rate(noise, params.T)
    rows = []
    for eps in sorted(eps_list, reverse=True):
        res = estimate_rare_event(basis, params.with_(epsilon=eps), chi, noise, spec, n,
                                  method, seed, control)
        rows.append({"epsilon": eps, "p_hat": res.p_hat, "ci_low": res.ci_low,
                     "ci_high": res.ci_high, "neg_eps_log_p": res.neg_eps_log_p,
                     "rate_prediction": pred, "method": method, "n": n, "seed": seed})
    y1, y2 = rows[-2]["neg_eps_log_p"], rows[-1]["neg_eps_log_p"]
    return rows, 2 * y2 - y1
