"""Configuration-driven studies: one function per experiment, each writing a CSV
and returning the checks it was judged against."""
import csv
import datetime
import hashlib
import json
import os
from dataclasses import dataclass, field, fields, asdict

import numpy as np

from . import __version__
from .diagnostics import (KatoSpec, corrector_scaling_check, energy_balance_gap,
                          energy_residual_ns, energy_residual_sg, kato_functional)
from .fitting import SlopeFit, fit_slope
from .ldp import (RareEventSpec, laplace_functional, laplace_limit, ldp_convergence_study,
                  rate_functional)
from .sde import ControlPath, ModelParams, euler_skeleton, mild_forcing, simulate, batches
from .spectral import NoiseSpec, build_basis, sobolev_norm

EXPERIMENTS = ("basis_check", "inviscid_sweep", "forcing_rate", "sg_forcing_rate",
               "identity_refinement", "kato_sweep", "corrector_sweep", "rare_event",
               "laplace", "rate_roundtrip")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    K: int = 32
    gamma: float = 2.0
    delta_reg: float = 0.01
    q: list = None
    model: str = "NS"
    T: float = 1.0
    n_steps: int = 512
    nu: float = None
    c_ratio: float = 1.0
    c: float = 1.0
    eps_list: list = field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])
    delta_list: list = field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])
    c_list: list = field(default_factory=lambda: [0.25, 1.0, 4.0])
    n_steps_list: list = field(default_factory=lambda: [512, 1024, 2048, 4096])
    n_samples: int = 10000
    chi: list = None
    chi_file: str = None
    theta: float = 0.05
    beta: float = 1.0
    mode: int = 1
    rho: float = 0.5
    event: str = "single_mode_exceed"
    method: str = "tilted"
    epsilon: float = 0.1
    trials: int = 50
    out_dir: str = "ldplab-out"

    def noise(self, basis):
        if self.q is not None:
            return NoiseSpec(np.asarray(self.q, dtype=float), self.gamma, self.delta_reg)
        return NoiseSpec.canonical(basis, self.gamma, self.delta_reg)

    def initial(self, K):
        if self.chi_file is not None:
            with open(self.chi_file) as fh:
                chi = np.asarray(json.load(fh), dtype=float)
        elif self.chi is not None:
            chi = np.asarray(self.chi, dtype=float)
        else:
            chi = np.zeros(K)
            chi[0] = 1.0
        if chi.shape != (K,):
            raise ConfigError(f"initial condition must have {K} coefficients")
        return chi

    def params(self, eps, **kw):
        nu = self.nu if self.nu is not None else (eps if self.model == "SG" else 0.0)
        d = dict(model=self.model, epsilon=eps, T=self.T, n_steps=self.n_steps, nu=nu,
                 c_ratio=self.c_ratio if self.model == "SG" else None)
        d.update(kw)
        return ModelParams(**d)


# experiment-specific defaults, applied before user keys
DEFAULTS = {
    "inviscid_sweep": {"T": 0.1, "n_samples": 2000},
    "forcing_rate": {"model": "NS"},
    "sg_forcing_rate": {"model": "SG"},
    "identity_refinement": {"K": 8, "epsilon": 0.1, "n_samples": 100},
    "kato_sweep": {"n_samples": 100, "n_steps": 256},
    "rare_event": {"K": 1, "q": [1.0], "chi": [0.0], "n_steps": 1,
                   "eps_list": [0.04, 0.02, 0.01, 0.005]},
    "laplace": {"K": 1, "q": [1.0], "chi": [1.0], "n_steps": 1, "n_samples": 10**6,
                "eps_list": [0.08, 0.04, 0.02]},
    "rate_roundtrip": {"K": 8, "n_steps": 64},
}


def validate(raw, experiment=None, seed=None, out_dir=None):
    """Build an ``ExperimentConfig`` from a JSON mapping; raise ``ConfigError`` on any defect."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    if experiment is not None:
        if raw.get("experiment", experiment) != experiment:
            raise ConfigError(f"config is for {raw['experiment']!r}, not {experiment!r}")
        raw["experiment"] = experiment
    if seed is not None:
        raw["seed"] = seed
    if out_dir is not None:
        raw["out_dir"] = out_dir
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    if "experiment" not in raw:
        raise ConfigError("missing 'experiment'")
    if raw["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {raw['experiment']!r}")
    if "seed" not in raw or not isinstance(raw["seed"], int) or not 0 <= raw["seed"] < 2**64:
        raise ConfigError("'seed' must be present as a 64-bit unsigned integer")
    merged = dict(DEFAULTS.get(raw["experiment"], {}))
    merged.update(raw)
    try:
        cfg = ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    for name in ("eps_list", "delta_list", "c_list", "n_steps_list"):
        vals = getattr(cfg, name)
        if len(vals) < 3:
            raise ConfigError(f"{name} needs at least 3 entries")
        if any(not v > 0 for v in vals):
            raise ConfigError(f"{name} entries must be positive")
    if cfg.chi_file is not None and not os.path.exists(cfg.chi_file):
        raise ConfigError(f"chi_file {cfg.chi_file!r} does not exist")
    if cfg.q is not None and len(cfg.q) != cfg.K:
        raise ConfigError("q must have K entries")
    if cfg.model not in ("NS", "SG"):
        raise ConfigError("model must be NS or SG")
    if cfg.K < 1 or cfg.n_steps < 1 or cfg.n_samples < 1:
        raise ConfigError("K, n_steps and n_samples must be positive")
    if not cfg.rho > 0:
        raise ConfigError("rho must be > 0")
    if cfg.event not in ("single_mode_exceed", "terminal_ball"):
        raise ConfigError("event must be single_mode_exceed or terminal_ball")
    if not 1 <= cfg.mode <= cfg.K:
        raise ConfigError("mode must lie in 1..K")
    return cfg


def load_config(path, **overrides):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return validate(raw, **overrides)


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (str, np.str_)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def check(name, value, lo=-np.inf, hi=np.inf):
    value = float(value)
    return {"name": name, "value": value, "window": [lo, hi], "pass": bool(lo <= value <= hi)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, SlopeFit):
        return obj.as_dict()
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# --------------------------------------------------------------------------
# studies
# --------------------------------------------------------------------------

def sup_sq(coeffs):
    return np.max(np.sum(coeffs**2, axis=-1), axis=-1)


def inviscid_sweep(basis, noise, chi, eps_list, n, T=0.1, n_steps=512, seed=0, control=None,
                   chi_eps=None, chunk=500):
    """Mean ``sup_t |u^eps_t - u_t|^2`` against the Euler solution, with its parts.

    The difference splits into the initial-datum term ``S(t)(chi_eps - chi)``,
    the semigroup defect ``(S(t) - I) chi``, the forcing-convolution defect
    ``z^eps - F`` and the stochastic convolution. Paths are coupled across eps
    (same seed, same increments scaled by sqrt(eps)).
    """
    K = basis.K
    chi = np.asarray(chi, dtype=float)
    chi_eps = chi if chi_eps is None else np.asarray(chi_eps, dtype=float)
    control = ControlPath.zeros(n_steps, K) if control is None else control
    euler = euler_skeleton(chi, control, T).states
    rows = []
    for eps in eps_list:
        p = ModelParams("NS", eps, T, n_steps)
        decay = np.exp(-np.outer(p.times, p.rates(basis)))
        init_term = sup_sq(decay * (chi_eps - chi))
        semi_term = sup_sq(decay * chi - chi)
        z = mild_forcing(basis, p, control).states
        force_term = sup_sq(z - (euler - chi))
        total = stoch = 0.0
        for ids in batches(n, chunk):
            full = simulate(basis, p, chi_eps, noise, control, seed, ids).states
            total += np.sum(sup_sq(full - euler))
            if np.any(noise.q > 0):
                zs = simulate(basis, p, np.zeros(K), noise, None, seed, ids).states
                stoch += np.sum(sup_sq(zs))
        rows.append((eps, total / n, init_term, semi_term, force_term, stoch / n))
    arr = np.array(rows)
    fits = {}
    for name, col in (("total", 1), ("semigroup", 3), ("stochastic", 5)):
        if np.all(arr[:, col] > 0):
            fits[name] = fit_slope(arr[:, 0], arr[:, col])
    return rows, fits


def forcing_rate(basis, noise, eps_list, model="NS", theta=0.05, T=1.0, n_steps=512,
                 c_ratio=1.0, control=None):
    """``sup_t |z^eps_t - F_t|`` in the norm used for each model.

    NS uses ``D((-A)^(gamma - 1/2 - theta))``; SG uses ``D((-A)^(gamma - 2 theta))``
    with ``nu = c_ratio eps``.
    """
    K = basis.K
    if control is None:
        control = ControlPath.constant(noise.q / np.arange(1, K + 1), n_steps)
    s = noise.gamma - 0.5 - theta if model == "NS" else noise.gamma - 2 * theta
    F = euler_skeleton(np.zeros(K), control, T).states
    rows = []
    for eps in eps_list:
        nu = c_ratio * eps if model == "SG" else 0.0
        p = ModelParams(model, eps, T, n_steps, nu=nu)
        z = mild_forcing(basis, p, control).states
        rows.append((eps, float(np.max(sobolev_norm(basis, z - F, s)))))
    arr = np.array(rows)
    return rows, fit_slope(arr[:, 0], arr[:, 1])


def resolvent_bound_factor(theta):
    """``((1-theta)/theta)^(1-theta) / (1 + (1-theta)/theta)``.

    ``eps^theta`` times this equals ``sup_{lam > 0} lam^(1-theta)/(1/eps + lam)``.
    """
    r = (1 - theta) / theta
    return r ** (1 - theta) / (1 + r)


def identity_rms(basis, params, chi, noise, n_steps_list, n_paths, seed, which=None):
    """RMS of the final-time energy residual over coupled paths, per grid."""
    out = []
    for ns in n_steps_list:
        p = params.with_(n_steps=int(ns))
        tr = simulate(basis, p, chi, noise, None, seed, np.arange(n_paths))
        if p.model == "NS":
            res = energy_residual_ns(basis, tr, noise)
        else:
            res = energy_residual_sg(basis, tr, noise, which)
        out.append((p.h, float(np.sqrt(np.mean(res.final**2)))))
    return out


def _run_basis_check(cfg):
    basis = build_basis(cfg.K)
    h1 = basis.h1_energies()
    rel = np.abs(h1 / basis.lambdas - 1)
    dev = basis.gram_deviation()
    dev2 = basis.gram_deviation(2 * basis.panels)
    rows = [(k + 1, basis.zeros[k], basis.lambdas[k], basis.norm_consts[k], rel[k])
            for k in range(basis.K)]
    files = {"basis.csv": (["k", "zero", "lambda", "norm_const", "h1_rel_err"], rows)}
    with open(os.path.join(cfg.out_dir, "basis.json"), "w") as fh:
        fh.write(basis.to_json())
    checks = [check("gram_deviation", dev, hi=1e-10),
              check("gram_deviation_doubled_panels", dev2, hi=1e-10),
              check("h1_eigen_residual_rel", np.max(rel), hi=1e-8)]
    return files, checks, {}


def _run_inviscid(cfg):
    basis = build_basis(cfg.K)
    noise = cfg.noise(basis)
    chi = cfg.initial(basis.K)
    rows, fits = inviscid_sweep(basis, noise, chi, cfg.eps_list, cfg.n_samples, cfg.T,
                                cfg.n_steps, cfg.seed)
    files = {"inviscid.csv": (["epsilon", "mean_sup_sq_error", "initial_term", "semigroup_term",
                               "forcing_term", "stochastic_term"], rows)}
    checks = []
    if "stochastic" in fits:
        checks.append(check("stochastic_slope", fits["stochastic"].slope, 0.8, 1.2))
    if "semigroup" in fits:
        checks.append(check("semigroup_slope", fits["semigroup"].slope, 1.8, 2.2))
    return files, checks, fits


def _run_forcing(cfg, model):
    basis = build_basis(cfg.K)
    noise = cfg.noise(basis)
    rows, fit = forcing_rate(basis, noise, cfg.eps_list, model, cfg.theta, cfg.T, cfg.n_steps,
                             cfg.c_ratio)
    lo = 0.5 if model == "NS" else cfg.theta
    files = {"forcing.csv": (["epsilon", "sup_norm_error"], rows)}
    extra = {"fit": fit}
    if model == "SG":
        extra["resolvent_bound_factor"] = resolvent_bound_factor(cfg.theta)
    return files, [check("forcing_slope", fit.slope, lo)], extra


def _run_identity(cfg):
    basis = build_basis(cfg.K)
    noise = cfg.noise(basis)
    chi = 1.0 / np.arange(1, basis.K + 1) ** 2
    params = cfg.params(cfg.epsilon)
    which_list = [None] if cfg.model == "NS" else ["V_norm", "vorticity"]
    rows, checks, fits = [], [], {}
    quiet = NoiseSpec(np.zeros(basis.K), noise.gamma, noise.delta_reg)
    for which in which_list:
        tag = which or "ns"
        for label, nz, lo in (("stochastic", noise, 0.5), ("deterministic", quiet, 0.9)):
            data = identity_rms(basis, params, chi, nz, cfg.n_steps_list, cfg.n_samples,
                                cfg.seed, which)
            for h, rms in data:
                rows.append((tag, label, h, rms))
            fit = fit_slope([d[0] for d in data], [max(d[1], 1e-300) for d in data])
            fits[f"{tag}_{label}"] = fit
            checks.append(check(f"{tag}_{label}_exponent", fit.slope, lo))
    # single-path residual series at the finest grid
    p = params.with_(n_steps=int(max(cfg.n_steps_list)))
    tr = simulate(basis, p, chi, noise, None, cfg.seed)
    res = energy_residual_ns(basis, tr, noise) if cfg.model == "NS" else \
        energy_residual_sg(basis, tr, noise, "V_norm")
    files = {"refinement.csv": (["identity", "noise", "h", "rms_residual"], rows),
             "residual.csv": (["t", "residual"], res.rows())}
    return files, checks, fits


def _run_kato(cfg):
    basis = build_basis(cfg.K)
    noise = cfg.noise(basis)
    chi = cfg.initial(basis.K)
    rows, at_c1, gaps = [], [], []
    for eps in cfg.eps_list:
        p = cfg.params(eps, model="NS", nu=0.0, c_ratio=None)
        tr = simulate(basis, p, chi, noise, None, cfg.seed, np.arange(cfg.n_samples))
        for c in cfg.c_list:
            if c * eps >= 1:
                continue
            val = float(np.mean(kato_functional(basis, tr, KatoSpec(c, eps))))
            rows.append((eps, c, val))
            if c == cfg.c:
                at_c1.append((eps, val))
        gap = energy_balance_gap(basis, tr, noise)
        res = energy_residual_ns(basis, tr, noise).final
        gaps.append(float(np.max(np.abs(gap + res))))
    fit = fit_slope([a for a, _ in at_c1], [b for _, b in at_c1])
    files = {"kato.csv": (["epsilon", "c", "K_value"], rows)}
    checks = [check("kato_slope_c", fit.slope, 0.9),
              check("gap_plus_residual", max(gaps), hi=1e-12)]
    return files, checks, {"kato_c": fit}


def _solid_rotation(r):
    r = np.asarray(r, dtype=float)
    return r, np.ones_like(r)


def _run_corrector(cfg):
    basis = build_basis(cfg.K)
    rows, fits = corrector_scaling_check(basis, _solid_rotation, cfg.delta_list)
    files = {"corrector.csv": (["delta", "l2", "grad_l2", "linf"], [r[:4] for r in rows])}
    checks = [check("l2_exponent", fits["l2"].slope, 0.4, 0.6),
              check("grad_l2_exponent", fits["grad_l2"].slope, -0.6, -0.4),
              check("linf_exponent", fits["linf"].slope, -0.1, 0.1)]
    extra = dict(fits)
    extra["rho_grad_linf"] = [r[4] for r in rows]
    return files, checks, extra


def _run_rare_event(cfg):
    basis = build_basis(cfg.K)
    noise = cfg.noise(basis)
    chi = cfg.initial(basis.K)
    spec = RareEventSpec(cfg.event, cfg.rho, cfg.mode)
    params = cfg.params(cfg.eps_list[0], model="NS", nu=0.0, c_ratio=None)
    rows, extrap = ldp_convergence_study(basis, params, chi, noise, spec, cfg.eps_list,
                                         cfg.n_samples, cfg.seed, cfg.method)
    keys = ["epsilon", "p_hat", "ci_low", "ci_high", "neg_eps_log_p", "rate_prediction",
            "method", "n", "seed"]
    files = {"study.csv": (keys, [[r[k] for k in keys] for r in rows])}
    pred = rows[0]["rate_prediction"]
    rel = abs(extrap - pred) / pred
    return files, [check("extrapolated_rel_err", rel, hi=0.15)], {"extrapolated": extrap,
                                                                  "rate_prediction": pred}


def _run_laplace(cfg):
    basis = build_basis(cfg.K)
    noise = cfg.noise(basis)
    chi = cfg.initial(basis.K)
    k = cfg.mode - 1
    limit = laplace_limit(cfg.beta, chi[k], cfg.T, noise.q[k])
    rows = []
    for eps in cfg.eps_list:
        p = cfg.params(eps, model="NS", nu=0.0, c_ratio=None)
        est = laplace_functional(basis, p, chi, noise, cfg.beta, cfg.mode, cfg.n_samples,
                                 cfg.seed)
        rows.append((eps, est, limit, cfg.n_samples, cfg.seed))
    files = {"laplace.csv": (["epsilon", "estimate", "limit", "n", "seed"], rows)}
    smallest = min(rows, key=lambda r: r[0])
    return files, [check("abs_err_smallest_eps", abs(smallest[1] - limit), hi=0.05)], \
        {"limit": limit}


def _run_roundtrip(cfg):
    basis = build_basis(cfg.K)
    noise = cfg.noise(basis)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for trial in range(cfg.trials):
        f = noise.q * rng.standard_normal((cfg.n_steps, basis.K))
        ctrl = ControlPath(f)
        chi = noise.q * rng.standard_normal(basis.K)
        sk = euler_skeleton(chi, ctrl, cfg.T)
        rate = rate_functional(noise, sk.states, cfg.T)
        half = 0.5 * float(ctrl.energy(noise, cfg.T / cfg.n_steps))
        rows.append((trial, rate, half, abs(rate - half) / half))
    files = {"roundtrip.csv": (["trial", "rate", "half_energy", "rel_err"], rows)}
    return files, [check("max_rel_err", max(r[3] for r in rows), hi=1e-10)], {}


RUNNERS = {
    "basis_check": _run_basis_check,
    "inviscid_sweep": _run_inviscid,
    "forcing_rate": lambda cfg: _run_forcing(cfg, "NS"),
    "sg_forcing_rate": lambda cfg: _run_forcing(cfg, "SG"),
    "identity_refinement": _run_identity,
    "kato_sweep": _run_kato,
    "corrector_sweep": _run_corrector,
    "rare_event": _run_rare_event,
    "laplace": _run_laplace,
    "rate_roundtrip": _run_roundtrip,
}


def config_hash(cfg):
    blob = json.dumps(_jsonable(asdict(cfg)), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def run(cfg):
    """Run one experiment; write CSVs, ``summary.json`` and finally ``manifest.json``.

    Returns 0 when every check passes, 1 otherwise.
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    status = "error"
    try:
        files, checks, extra = RUNNERS[cfg.experiment](cfg)
        for name, (header, rows) in files.items():
            write_csv(os.path.join(cfg.out_dir, name), header, rows)
        passed = all(c["pass"] for c in checks)
        summary = {"experiment": cfg.experiment, "pass": passed, "checks": checks,
                   "details": extra}
        with open(os.path.join(cfg.out_dir, "summary.json"), "w") as fh:
            json.dump(_jsonable(summary), fh, indent=1, sort_keys=True)
        status = "pass" if passed else "fail"
        return 0 if passed else 1
    finally:
        manifest = {"experiment": cfg.experiment, "config_hash": config_hash(cfg),
                    "seed": cfg.seed, "version": __version__, "status": status,
                    "config": _jsonable(asdict(cfg)),
                    "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()}
        with open(os.path.join(cfg.out_dir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
