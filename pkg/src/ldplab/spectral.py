"""Bessel eigenbasis of the radial Stokes-type operator on the unit disk.

A circularly symmetric field ``u(r) x^perp/|x|`` with no-slip trace is expanded
in ``phi_k(r) = c_k J_1(j_k r)`` where ``j_k`` is the k-th positive zero of
``J_1``. The modes satisfy ``phi'' + phi'/r - phi/r**2 = -lambda_k phi`` with
``lambda_k = j_k**2``, and are orthonormal for the disk measure ``2 pi r dr``.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq

SERIES_SWITCH = 12.0
GL_NODES = 8


# --------------------------------------------------------------------------
# Bessel functions of order 0 and 1
# --------------------------------------------------------------------------

def _bessel_series(n, x):
    # sum_m (-1)^m (x/2)^(2m+n) / (m! (m+n)!), Neumaier-compensated
    y = 0.25 * x * x
    term = np.ones_like(x) if n == 0 else 0.5 * x
    total = term.copy()
    comp = np.zeros_like(x)
    for m in range(1, 60):
        term = -term * y / (m * (m + n))
        t = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - t) + term, (term - t) + total)
        total = t
        if np.all(np.abs(term) < 1e-18 * np.maximum(1.0, np.abs(total))):
            break
    return total + comp


def _bessel_hankel(n, x):
    # J_n(x) = sqrt(2/(pi x)) (P cos(chi) - Q sin(chi)), chi = x - (n/2 + 1/4) pi
    mu = 4.0 * n * n
    P = np.ones_like(x)
    Q = np.zeros_like(x)
    term = np.ones_like(x)
    prev = np.full_like(x, np.inf)
    done = np.zeros(x.shape, dtype=bool)
    for k in range(1, 60):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        growing = np.abs(term) > prev
        done |= growing
        active = ~done
        if k % 2:
            Q = np.where(active, Q + (1 if k % 4 == 1 else -1) * term, Q)
        else:
            P = np.where(active, P + (-1 if k % 4 == 2 else 1) * term, P)
        prev = np.abs(term)
        if np.all(done | (np.abs(term) < 1e-17)):
            break
    chi = x - (0.5 * n + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (P * np.cos(chi) - Q * np.sin(chi))


def bessel_j(order, x):
    """Bessel function of the first kind, order 0 or 1, for ``x >= 0``.

    Ascending series below ``SERIES_SWITCH``, Hankel asymptotic expansion above.
    Accepts scalars or arrays.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(~np.isfinite(xa)):
        raise ValueError("bessel_j is defined here for finite x >= 0 only")
    flat = np.atleast_1d(xa).ravel()
    out = np.empty_like(flat)
    small = flat <= SERIES_SWITCH
    if small.any():
        out[small] = _bessel_series(order, flat[small])
    if (~small).any():
        out[~small] = _bessel_hankel(order, flat[~small])
    out = out.reshape(np.shape(xa))
    return float(out) if out.ndim == 0 else out


def bessel_j1_prime(x):
    """Derivative J_1'(x) = J_0(x) - J_1(x)/x, with the limit 1/2 at x = 0."""
    xa = np.asarray(x, dtype=float)
    safe = np.where(xa == 0, 1.0, xa)
    val = np.where(xa == 0, 0.5, bessel_j(0, xa) - bessel_j(1, xa) / safe)
    return float(val) if np.ndim(val) == 0 else val


def find_bessel_zeros(count):
    """First ``count`` positive zeros of J_1, refined to ``|J_1(j)| <= 1e-12``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    zeros = []
    for k in range(1, count + 1):
        guess = (k + 0.25) * np.pi
        a, b = guess - 0.6, guess + 0.6
        fa, fb = bessel_j(1, a), bessel_j(1, b)
        if fa * fb > 0:
            raise RuntimeError(f"could not bracket zero {k} of J_1 in ({a}, {b})")
        z = brentq(lambda t: bessel_j(1, t), a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                   maxiter=200)
        # one Newton polish step using J_1' = J_0 at a zero
        z_newton = z - bessel_j(1, z) / bessel_j(0, z)
        if abs(bessel_j(1, z_newton)) < abs(bessel_j(1, z)):
            z = z_newton
        if abs(bessel_j(1, z)) > 1e-12:
            raise RuntimeError(f"zero {k} of J_1 not resolved: residual {bessel_j(1, z):.3e}")
        if zeros and z <= zeros[-1]:
            raise RuntimeError("zeros are not strictly increasing")
        zeros.append(z)
    return zeros


# --------------------------------------------------------------------------
# Quadrature and basis
# --------------------------------------------------------------------------

def composite_gauss_legendre(panels, a=0.0, b=1.0, nodes=GL_NODES):
    """Nodes and weights of a composite Gauss-Legendre rule on [a, b]."""
    x, w = leggauss(nodes)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    r = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    return r, wt


@dataclass(frozen=True)
class EigenMode:
    index: int
    bessel_zero: float
    eigenvalue: float
    norm_const: float


@dataclass(frozen=True, eq=False)
class EigenBasis:
    zeros: np.ndarray
    lambdas: np.ndarray
    norm_consts: np.ndarray
    panels: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    gram_tolerance: float = 1e-10

    @property
    def K(self):
        return len(self.zeros)

    @property
    def modes(self):
        return [EigenMode(k + 1, float(z), float(l), float(c))
                for k, (z, l, c) in enumerate(zip(self.zeros, self.lambdas, self.norm_consts))]

    def phi(self, r):
        """Mode values and radial derivatives at radii ``r``; each (len(r), K)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        x = r[:, None] * self.zeros[None, :]
        vals = self.norm_consts * bessel_j(1, x)
        ders = self.norm_consts * self.zeros * bessel_j1_prime(x)
        return vals, ders

    def phi_over_r(self, r):
        """``phi_k(r)/r`` with the series limit ``c_k j_k / 2`` at r = 0."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        vals, _ = self.phi(r)
        safe = np.where(r == 0, 1.0, r)[:, None]
        return np.where(r[:, None] == 0, 0.5 * self.norm_consts * self.zeros, vals / safe)

    def gram(self, panels=None):
        """Quadrature Gram matrix ``2 pi int phi_k phi_m r dr``."""
        r, w = (self.nodes, self.weights) if panels is None else composite_gauss_legendre(panels)
        vals, _ = self.phi(r)
        return 2 * np.pi * (vals * (w * r)[:, None]).T @ vals

    def gram_deviation(self, panels=None):
        return float(np.max(np.abs(self.gram(panels) - np.eye(self.K))))

    def h1_energies(self, panels=None):
        """Quadrature of ``2 pi int (phi'^2 + phi^2/r^2) r dr`` per mode."""
        r, w = (self.nodes, self.weights) if panels is None else composite_gauss_legendre(panels)
        _, ders = self.phi(r)
        over = self.phi_over_r(r)
        return 2 * np.pi * ((ders**2 + over**2) * (w * r)[:, None]).sum(axis=0)

    def to_json(self):
        doc = {
            "K": self.K,
            "zeros": [format(z, ".17g") for z in self.zeros],
            "lambdas": [format(l, ".17g") for l in self.lambdas],
            "norm_consts": [format(c, ".17g") for c in self.norm_consts],
            "panels": self.panels,
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        zeros = np.array([float(s) for s in doc["zeros"]])
        if len(zeros) != doc["K"]:
            raise ValueError("K does not match the number of zeros")
        r, w = composite_gauss_legendre(doc["panels"])
        return cls(zeros=zeros,
                   lambdas=np.array([float(s) for s in doc["lambdas"]]),
                   norm_consts=np.array([float(s) for s in doc["norm_consts"]]),
                   panels=int(doc["panels"]), nodes=r, weights=w)


def build_basis(K, panels=None, gram_tolerance=1e-10):
    """Build the first ``K`` radial modes and verify orthonormality by quadrature.

    ``c_k = 1/(sqrt(pi) |J_0(j_k)|)`` follows from ``int_0^1 J_1(j r)^2 r dr = J_0(j)^2/2``
    at a zero of ``J_1``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    min_panels = max(64, 4 * K)
    panels = min_panels if panels is None else int(panels)
    if panels < min_panels:
        raise ValueError(f"panels must be >= max(64, 4K) = {min_panels}")
    zeros = np.array(find_bessel_zeros(K))
    c = 1.0 / (np.sqrt(np.pi) * np.abs(bessel_j(0, zeros)))
    r, w = composite_gauss_legendre(panels)
    basis = EigenBasis(zeros=zeros, lambdas=zeros**2, norm_consts=np.atleast_1d(c),
                       panels=panels, nodes=r, weights=w, gram_tolerance=gram_tolerance)
    dev = basis.gram_deviation()
    if dev > gram_tolerance:
        raise RuntimeError(f"Gram deviation {dev:.2e} exceeds {gram_tolerance:.1e}; "
                           "increase panels")
    return basis


# --------------------------------------------------------------------------
# Fields, norms and semigroups
# --------------------------------------------------------------------------

def eval_field(basis, coeffs, radii):
    """Profile ``u(r)`` and ``u'(r)`` of the field with coefficients ``coeffs``.

    ``coeffs`` may carry leading batch axes; the result then has shape
    ``coeffs.shape[:-1] + (len(radii),)``.
    """
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii < 0) or np.any(radii > 1):
        raise ValueError("radii must lie in [0, 1]")
    coeffs = np.asarray(coeffs, dtype=float)
    vals, ders = basis.phi(radii)
    return coeffs @ vals.T, coeffs @ ders.T


def sobolev_norm(basis, coeffs, s):
    """``||u||_s = sqrt(sum lambda_k^(2s) u_k^2)``; ``s = 0`` is the L2 norm."""
    coeffs = np.asarray(coeffs, dtype=float)
    return np.sqrt(np.sum(basis.lambdas ** (2 * s) * coeffs**2, axis=-1))


def v_norm(basis, coeffs, eps):
    """``||u||_V = sqrt(||u||^2 + eps ||grad u||^2)``."""
    coeffs = np.asarray(coeffs, dtype=float)
    return np.sqrt(np.sum((1 + eps * basis.lambdas) * coeffs**2, axis=-1))


def grad_norm_sq(basis, coeffs):
    """``||grad u||^2 = sum lambda_k u_k^2`` (the H^1 isometry of the basis)."""
    coeffs = np.asarray(coeffs, dtype=float)
    return np.sum(basis.lambdas * coeffs**2, axis=-1)


@dataclass(frozen=True)
class NoiseSpec:
    """Per-mode noise amplitudes; ``W = sum_k q_k phi_k beta_k``."""
    q: np.ndarray
    gamma: float = 2.0
    delta_reg: float = 0.01

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if np.any(q < 0) or np.any(~np.isfinite(q)):
            raise ValueError("noise amplitudes must be finite and nonnegative")
        object.__setattr__(self, "q", q)

    @classmethod
    def canonical(cls, basis, gamma=2.0, delta_reg=0.01):
        """``q_k = lambda_k^-(gamma + 1/2 + delta_reg)``."""
        if gamma < 2 or delta_reg <= 0:
            raise ValueError("need gamma >= 2 and delta_reg > 0")
        return cls(basis.lambdas ** (-(gamma + 0.5 + delta_reg)), gamma, delta_reg)

    @classmethod
    def custom(cls, q, lambdas, gamma=2.0, delta_reg=0.01, tol=1e-6):
        """Custom amplitudes, checked for summability in D((-A)^gamma)."""
        noise = cls(q, gamma, delta_reg)
        terms = noise.q**2 * np.asarray(lambdas) ** (2 * gamma)
        if not np.all(np.isfinite(terms)):
            raise ValueError("noise is not summable in D((-A)^gamma)")
        tail = terms[len(terms) - len(terms) // 4:]
        if tail.sum() > tol:
            raise ValueError(f"partial sums not Cauchy within {tol}: tail {tail.sum():.2e}")
        return noise

    @property
    def K(self):
        return len(self.q)

    @property
    def trace(self):
        return float(np.sum(self.q**2))


def rkhs_norm_sq(noise, f):
    """``sum f_k^2 / q_k^2``; +inf when f charges a mode with ``q_k = 0``.

    ``f`` may carry leading axes; the reduction is over the last one.
    """
    f = np.asarray(f, dtype=float)
    q = noise.q
    live = q > 0
    dead_charge = np.any((f != 0) & ~live, axis=-1)
    ratio = np.where(live, f / np.where(live, q, 1.0), 0.0)
    val = np.sum(ratio**2, axis=-1)
    return np.where(dead_charge, np.inf, val) if np.ndim(val) else (math.inf if dead_charge else float(val))


def decay_rates(basis, model, eps, nu=0.0):
    """Per-mode decay rates of the linear radial dynamics.

    NS: ``eps lambda_k``; SG: ``nu lambda_k / (1 + eps lambda_k)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if model == "NS":
        return eps * basis.lambdas
    if model == "SG":
        if nu < 0:
            raise ValueError("nu must be nonnegative")
        return nu * basis.lambdas / (1 + eps * basis.lambdas)
    raise ValueError(f"unknown model {model!r}")


def semigroup_apply(basis, coeffs, model, t, eps, nu=0.0):
    """Apply the NS or second-grade semigroup for time ``t`` mode-wise."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return np.exp(-decay_rates(basis, model, eps, nu) * t) * np.asarray(coeffs, dtype=float)
