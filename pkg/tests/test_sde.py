import numpy as np
import pytest
import sympy

from ldplab.sde import (ControlPath, ModelParams, Trajectory, euler_skeleton, increment_shift,
                        mild_forcing, read_trajectory_csv, sg_layer_width, simulate,
                        simulate_radial_ns, simulate_radial_sg, tilted_simulate)
from ldplab.spectral import NoiseSpec, build_basis
from ldplab.diagnostics import energy_residual_euler
from ldplab.fitting import fit_slope
from oracles import ou_moments

LAM1 = 14.6819706421


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            ModelParams("XX", 0.1)
        with pytest.raises(ValueError):
            ModelParams("NS", 0.0)
        with pytest.raises(ValueError):
            ModelParams("NS", 0.1, n_steps=0)
        with pytest.raises(ValueError):
            ModelParams("SG", 0.1, nu=0.5, c_ratio=1.0)
        assert ModelParams("NS", 0.1, T=2.0, n_steps=4).h == 0.5

    def test_sg_rates_bounded_by_nu_over_eps(self, basis32):
        for eps in (1e-3, 0.1, 10.0, 1e3):
            p = ModelParams("SG", eps, nu=0.7)
            assert np.all(p.rates(basis32) <= 0.7 / eps)


class TestSimulate:
    def test_zero_trajectory(self, basis1):
        p = ModelParams("NS", 0.1, 1.0, 8)
        tr = simulate_radial_ns(basis1, p, [0.0], NoiseSpec([0.0]))
        assert np.all(tr.states == 0)

    def test_sg_constant_without_drift_or_noise(self, basis1):
        p = ModelParams("SG", 0.1, 1.0, 8, nu=0.0)
        tr = simulate_radial_sg(basis1, p, [1.0], NoiseSpec([0.0]))
        assert np.all(tr.states == 1.0)

    def test_initial_state_exact(self, basis8):
        chi = np.random.default_rng(3).standard_normal(8)
        p = ModelParams("NS", 0.05, 1.0, 16)
        tr = simulate(basis8, p, chi, NoiseSpec.canonical(basis8), seed=1, replicas=np.arange(3))
        assert np.all(tr.states[:, 0] == chi)

    def test_model_guard(self, basis1):
        with pytest.raises(ValueError):
            simulate_radial_ns(basis1, ModelParams("SG", 0.1), [0.0], NoiseSpec([1.0]))
        with pytest.raises(ValueError):
            simulate_radial_sg(basis1, ModelParams("NS", 0.1), [0.0], NoiseSpec([1.0]))

    def test_control_outside_rkhs(self, basis8):
        q = np.ones(8)
        q[3] = 0
        f = np.zeros(8)
        f[3] = 1.0
        p = ModelParams("NS", 0.1, 1.0, 4)
        with pytest.raises(ValueError):
            simulate(basis8, p, np.zeros(8), NoiseSpec(q), ControlPath.constant(f, 4))

    def test_energy_bound(self, basis1):
        p = ModelParams("NS", 0.1, 1.0, 4)
        ctrl = ControlPath(np.full((4, 1), 2.0), energy_bound=1.0)
        with pytest.raises(ValueError):
            simulate(basis1, p, [0.0], NoiseSpec([1.0]), ctrl)

    def test_determinism(self, basis8):
        p = ModelParams("NS", 0.05, 1.0, 32)
        noise = NoiseSpec.canonical(basis8)
        a = simulate(basis8, p, np.ones(8), noise, seed=99, replicas=np.arange(5))
        b = simulate(basis8, p, np.ones(8), noise, seed=99, replicas=np.arange(5))
        assert np.array_equal(a.states, b.states) and np.array_equal(a.dW, b.dW)
        c = simulate(basis8, p, np.ones(8), noise, seed=100, replicas=np.arange(5))
        assert not np.array_equal(a.states, c.states)

    def test_grid_coupling(self, basis8):
        noise = NoiseSpec.canonical(basis8)
        coarse = simulate(basis8, ModelParams("NS", 0.1, 1.0, 64), np.ones(8), noise, seed=5)
        fine = simulate(basis8, ModelParams("NS", 0.1, 1.0, 128), np.ones(8), noise, seed=5)
        np.testing.assert_allclose(fine.dW[0::2] + fine.dW[1::2], coarse.dW, atol=1e-14)

    @pytest.mark.parametrize("model,nu", [("NS", 0.0), ("SG", 0.05)])
    def test_single_step_moments(self, basis1, model, nu):
        eps, T, n = 0.1, 1.0, 40_000
        p = ModelParams(model, eps, T, 1, nu=nu)
        tr = simulate(basis1, p, [1.0], NoiseSpec([1.0]), seed=2, replicas=np.arange(n))
        a = p.rates(basis1)[0]
        g = p.gain(basis1)[0]
        mean, var = ou_moments(a, np.sqrt(eps) * g, 1.0, T)
        x = tr.states[:, -1, 0]
        assert abs(x.mean() - mean) < 4 * np.sqrt(var / n)
        assert abs(x.var() - var) < 4 * var * np.sqrt(2 / n)

    def test_moments_independent_of_grid(self, basis1):
        # exactness: the law at T does not depend on how many steps are taken
        eps, n = 0.1, 40_000
        for steps in (1, 7, 64):
            p = ModelParams("NS", eps, 1.0, steps)
            x = simulate(basis1, p, [1.0], NoiseSpec([1.0]), seed=steps,
                         replicas=np.arange(n)).states[:, -1, 0]
            mean, var = ou_moments(eps * LAM1, np.sqrt(eps), 1.0, 1.0)
            assert abs(x.mean() - mean) < 4 * np.sqrt(var / n)
            assert abs(x.var() - var) < 4 * var * np.sqrt(2 / n)

    def test_csv_round_trip(self, basis8, tmp_path):
        p = ModelParams("NS", 0.1, 1.0, 8)
        tr = simulate(basis8, p, np.ones(8), NoiseSpec.canonical(basis8), seed=4)
        path = str(tmp_path / "traj.csv")
        tr.to_csv(path)
        header = open(path).readline().strip()
        assert header == "t," + ",".join(f"mode_{k}" for k in range(1, 9))
        assert (tmp_path / "traj_dw.csv").exists() and (tmp_path / "traj.json").exists()
        back = read_trajectory_csv(path)
        assert np.array_equal(back.states, tr.states)
        assert np.array_equal(back.dW, tr.dW)
        assert back.params == tr.params and back.seed == 4


class TestSkeletonAndForcing:
    def test_skeleton_integral(self):
        tr = euler_skeleton([1.0], ControlPath.constant([2.0], 10), 1.0)
        assert tr.states[-1, 0] == pytest.approx(3.0, abs=1e-14)
        assert np.all(tr.dW == 0)

    def test_skeleton_unforced(self):
        tr = euler_skeleton([1.0, -2.0], ControlPath.zeros(5, 2), 1.0)
        assert np.all(tr.states == [1.0, -2.0])

    def test_euler_energy_identity_first_order(self):
        errs, hs = [], []
        for n in (64, 128, 256, 512):
            cells = np.arange(n) / n
            f = np.column_stack([np.cos(3 * cells), np.sin(2 * cells)])
            tr = euler_skeleton([1.0, 0.5], ControlPath(f), 1.0)
            errs.append(abs(energy_residual_euler(tr).final))
            hs.append(1 / n)
        assert fit_slope(hs, errs).slope == pytest.approx(1.0, abs=0.1)

    def test_mild_zero_control(self, basis8):
        z = mild_forcing(basis8, ModelParams("NS", 0.1, 1.0, 16), ControlPath.zeros(16, 8))
        assert np.all(z.states == 0)

    def test_mild_symbolic(self, basis1):
        s, T, a = sympy.symbols("s T a", positive=True)
        expr = sympy.integrate(sympy.exp(-a * (T - s)), (s, 0, T))
        eps = 0.1
        lam = basis1.lambdas[0]
        exact = float(expr.subs({a: eps * lam, T: 1.0}))
        for n in (1, 3, 50):
            z = mild_forcing(basis1, ModelParams("NS", eps, 1.0, n), ControlPath.constant([1.0], n))
            assert z.states[-1, 0] == pytest.approx(exact, rel=1e-13)

    def test_mild_stationary(self, basis1):
        eps, T = 1.0, 5.0
        z = mild_forcing(basis1, ModelParams("NS", eps, T, 10), ControlPath.constant([1.0], 10))
        target = 1 / (eps * basis1.lambdas[0])
        assert abs(z.states[-1, 0] - target) <= np.exp(-eps * basis1.lambdas[0] * T)

    def test_mild_matches_quadrature(self, basis8):
        rng = np.random.default_rng(8)
        ctrl = ControlPath(rng.standard_normal((12, 8)))
        for model in ("NS", "SG"):
            p = ModelParams(model, 0.05, 1.0, 12, nu=0.03)
            z = mild_forcing(basis8, p, ctrl).states
            t = (np.arange(12000) + 0.5) / 12000
            a = p.rates(basis8)
            g = p.gain(basis8)
            cell = np.minimum((t * 12).astype(int), 11)
            integrand = g * ctrl.values[cell] * np.exp(-np.outer(1.0 - t, a))
            ref = integrand.mean(axis=0)
            np.testing.assert_allclose(z[-1], ref, rtol=1e-5, atol=1e-9)


class TestTilting:
    def test_zero_tilt(self, basis1):
        p = ModelParams("NS", 0.5, 1.0, 4)
        _, lw = tilted_simulate(basis1, p, [0.0], NoiseSpec([1.0]), ControlPath.zeros(4, 1),
                                replicas=np.arange(10))
        assert np.all(lw == 0)

    def test_tilt_outside_span(self, basis8):
        q = np.ones(8)
        q[0] = 0
        p = ModelParams("NS", 0.5, 1.0, 2)
        with pytest.raises(ValueError):
            tilted_simulate(basis8, p, np.zeros(8), NoiseSpec(q), ControlPath(np.ones((2, 8))))

    def test_shift_tends_to_continuous_girsanov(self, basis1):
        f = np.array([[1.3]])
        for n in (1, 16, 1024):
            p = ModelParams("NS", 0.05, 1.0, n)
            s = increment_shift(basis1, p, NoiseSpec([2.0]), f)[0, 0]
            cont = 1.3 * p.h / (np.sqrt(0.05) * 2.0)
            assert abs(s / cont - 1) <= (0.05 * LAM1 * p.h) ** 2 / 20 + 1e-15

    def test_martingale(self, basis1):
        n = 100_000
        p = ModelParams("NS", 0.5, 1.0, 4)
        _, lw = tilted_simulate(basis1, p, [0.0], NoiseSpec([1.0]), ControlPath.constant([0.7], 4),
                                seed=21, replicas=np.arange(n))
        w = np.exp(lw)
        assert abs(w.mean() - 1) < 4 * w.std() / np.sqrt(n)

    def test_tilted_matches_plain(self, basis1):
        eps, m, n = 0.2, 0.35, 100_000
        noise = NoiseSpec([1.0])
        p = ModelParams("NS", eps, 1.0, 2)
        plain = simulate(basis1, p, [0.0], noise, seed=1, replicas=np.arange(n)).states[:, -1, 0]
        hit = plain > m
        p_plain, se_plain = hit.mean(), hit.std() / np.sqrt(n)
        tr, lw = tilted_simulate(basis1, p, [0.0], noise, ControlPath.constant([0.8], 2), seed=2,
                                 replicas=np.arange(n))
        vals = (tr.states[:, -1, 0] > m) * np.exp(lw)
        p_tilt, se_tilt = vals.mean(), vals.std() / np.sqrt(n)
        assert hit.sum() >= 100
        assert abs(p_plain - p_tilt) < 1.96 * (se_plain + se_tilt)


def test_sg_layer_width():
    assert sg_layer_width(0.01) == pytest.approx(0.1)
    eps = np.array([1e-2, 1e-4, 1e-6])
    assert np.all(np.diff(eps / np.array([sg_layer_width(e) for e in eps])) < 0)
