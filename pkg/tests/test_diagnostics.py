import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ldplab.diagnostics import (CorrectorSpec, KatoSpec, annulus_dissipation, corrector_build,
                                corrector_scaling_check, energy_balance_gap, energy_residual_ns,
                                energy_residual_sg, full_dissipation, kato_functional, smoothstep)
from ldplab.experiments import identity_rms
from ldplab.fitting import fit_slope
from ldplab.sde import ControlPath, ModelParams, Trajectory, simulate
from ldplab.spectral import NoiseSpec, build_basis, eval_field


def _ns(basis, eps=0.1, n=64, seed=0, replicas=None, chi=None, q=None):
    p = ModelParams("NS", eps, 1.0, n)
    noise = NoiseSpec.canonical(basis) if q is None else NoiseSpec(q)
    chi = np.ones(basis.K) if chi is None else chi
    return simulate(basis, p, chi, noise, seed=seed, replicas=replicas), noise


class TestResiduals:
    def test_zero_trajectory(self, basis8):
        tr, noise = _ns(basis8, chi=np.zeros(8), q=np.zeros(8))
        assert np.all(energy_residual_ns(basis8, tr, noise).values == 0)

    def test_starts_at_zero(self, basis8):
        tr, noise = _ns(basis8, replicas=np.arange(4))
        assert np.all(energy_residual_ns(basis8, tr, noise).values[:, 0] == 0)

    def test_sg_conservative_limit(self, basis8):
        p = ModelParams("SG", 0.1, 1.0, 32, nu=0.0)
        noise = NoiseSpec(np.zeros(8))
        tr = simulate(basis8, p, np.linspace(1, 2, 8), noise)
        for which in ("V_norm", "vorticity"):
            np.testing.assert_allclose(energy_residual_sg(basis8, tr, noise, which).values, 0,
                                       atol=1e-12)

    def test_model_and_kind_guards(self, basis8):
        tr, noise = _ns(basis8)
        with pytest.raises(ValueError):
            energy_residual_sg(basis8, tr, noise)
        p = ModelParams("SG", 0.1, 1.0, 8, nu=0.1)
        sg = simulate(basis8, p, np.ones(8), noise)
        with pytest.raises(ValueError):
            energy_residual_sg(basis8, sg, noise, which="enstrophy")
        with pytest.raises(ValueError):
            energy_residual_ns(basis8, sg, noise)

    def test_dead_modes_do_not_change_residual(self):
        b4, b6 = build_basis(4), build_basis(6)
        q4 = np.array([1.0, 0.5, 0.25, 0.1])
        q6 = np.concatenate([q4, [0.0, 0.0]])
        chi6 = np.array([1.0, -1.0, 0.5, 0.2, 0.0, 0.0])
        p = ModelParams("NS", 0.1, 1.0, 32)
        r4 = energy_residual_ns(b4, simulate(b4, p, chi6[:4], NoiseSpec(q4), seed=3),
                                NoiseSpec(q4)).values
        r6 = energy_residual_ns(b6, simulate(b6, p, chi6, NoiseSpec(q6), seed=3),
                                NoiseSpec(q6)).values
        np.testing.assert_allclose(r6, r4, rtol=1e-12, atol=1e-15)

    def test_rows(self, basis8):
        tr, noise = _ns(basis8, n=4)
        rows = energy_residual_ns(basis8, tr, noise).rows()
        assert len(rows) == 5 and rows[0] == (0.0, 0.0)

    def test_gap_is_negative_residual(self, basis8):
        tr, noise = _ns(basis8, replicas=np.arange(6), seed=11)
        gap = energy_balance_gap(basis8, tr, noise)
        res = energy_residual_ns(basis8, tr, noise).final
        np.testing.assert_allclose(gap + res, 0, atol=1e-12)

    def test_ns_refinement_first_order(self, basis8):
        noise = NoiseSpec.canonical(basis8)
        pts = identity_rms(basis8, ModelParams("NS", 0.1), np.ones(8), noise,
                           [64, 128, 256, 512], 100, seed=7)
        fit = fit_slope(*zip(*pts))
        assert 0.8 <= fit.slope <= 1.2
        ratios = [pts[i][1] / pts[i + 1][1] for i in range(3)]
        assert all(1.6 <= r <= 2.5 for r in ratios)

    def test_order_one_noise_is_half_order(self, basis1):
        # a single slow mode with unit noise: the sum of dW^2 - h dominates, error ~ h^{1/2}
        pts = identity_rms(basis1, ModelParams("NS", 0.001), [1.0], NoiseSpec([1.0]),
                           [64, 128, 256, 512], 100, seed=7)
        assert 0.35 <= fit_slope(*zip(*pts)).slope <= 0.75

    @pytest.mark.parametrize("which", ["V_norm", "vorticity"])
    def test_sg_refinement(self, basis8, which):
        noise = NoiseSpec.canonical(basis8)
        pts = identity_rms(basis8, ModelParams("SG", 0.1, nu=0.1), np.ones(8), noise,
                           [64, 128, 256, 512], 100, seed=7, which=which)
        assert 0.8 <= fit_slope(*zip(*pts)).slope <= 1.2


class TestKato:
    def test_monotone_in_c_and_time(self, basis8):
        tr, _ = _ns(basis8, eps=0.05, seed=2)
        vals = [kato_functional(basis8, tr, KatoSpec(c)) for c in (0.5, 1, 2, 4)]
        assert np.all(np.diff(vals) > 0)
        ts = [kato_functional(basis8, tr, KatoSpec(1.0), t_end=t) for t in (0.25, 0.5, 1.0)]
        assert np.all(np.diff(ts) > 0)

    def test_bounded_by_full_dissipation(self, basis8):
        tr, _ = _ns(basis8, eps=0.05, seed=2, replicas=np.arange(5))
        k = kato_functional(basis8, tr, KatoSpec(2.0))
        assert np.all(k <= full_dissipation(basis8, tr) * (1 + 1e-12))

    def test_strip_guard(self, basis8):
        tr, _ = _ns(basis8, eps=0.5)
        with pytest.raises(ValueError):
            kato_functional(basis8, tr, KatoSpec(4.0))
        with pytest.raises(ValueError):
            KatoSpec(0.0)
        with pytest.raises(ValueError):
            KatoSpec(1.0, annulus_panels=8)

    def test_static_mode_scales_quadratically(self, basis1):
        # a frozen phi_1 has O(1) gradient near the wall, so eps * (c eps) ~ eps^2
        eps_list = [0.04, 0.02, 0.01, 0.005]
        vals = []
        for eps in eps_list:
            p = ModelParams("NS", eps, 1.0, 8)
            tr = Trajectory(p.times, np.ones((9, 1)), np.zeros((8, 1)), p, 0,
                            ControlPath.zeros(8, 1))
            vals.append(kato_functional(basis1, tr, KatoSpec(1.0)))
        assert fit_slope(eps_list, vals).slope == pytest.approx(2.0, abs=0.15)

    def test_annulus_against_trapezoid(self, basis8):
        coeffs = np.linspace(1, 0.2, 8)
        width = 0.03
        r = np.linspace(1 - width, 1, 100_001)
        v, dv = eval_field(basis8, coeffs, r)
        ref = 2 * np.pi * np.trapezoid((dv**2 + (v / r) ** 2) * r, r)
        assert annulus_dissipation(basis8, coeffs, width) == pytest.approx(ref, abs=1e-8)

    def test_full_disk_annulus_is_h1(self, basis8):
        coeffs = np.linspace(1, 0.2, 8)
        full = annulus_dissipation(basis8, coeffs, 1.0, panels=64)
        assert full == pytest.approx(np.sum(basis8.lambdas * coeffs**2), rel=1e-10)


def _solid(r):
    r = np.asarray(r, dtype=float)
    return r, np.ones_like(r)


class TestCorrector:
    def test_support_and_boundary_value(self, basis8):
        c = corrector_build(basis8, _solid, CorrectorSpec(0.1))
        v, _ = c(np.array([0.0, 0.5, 0.9, 0.95, 1.0]))
        assert np.all(v[:3] == 0) and v[3] > 0
        assert v[4] == pytest.approx(1.0)

    def test_coefficient_profile_matches_boundary_trace(self, basis8):
        coeffs = np.linspace(1, 0.2, 8)
        c = corrector_build(basis8, coeffs, CorrectorSpec(0.05))
        u1, _ = eval_field(basis8, coeffs, np.array([1.0]))
        assert c(1.0)[0][0] == pytest.approx(u1[0], abs=1e-12)

    def test_profile_guard(self):
        with pytest.raises(ValueError):
            CorrectorSpec(0.1, profile=lambda s: (np.asarray(s) * 0 + 1.0, 0 * np.asarray(s)))
        with pytest.raises(ValueError):
            CorrectorSpec(1.5)

    def test_l2_leading_term(self, basis8):
        # |v|^2 ~ 2 pi delta int_0^1 eta^2 = 2 pi delta * 13/35 for the smoothstep cutoff
        for d in (1e-2, 1e-3):
            l2 = corrector_build(basis8, _solid, CorrectorSpec(d)).norms()[0]
            assert l2 == pytest.approx(np.sqrt(2 * np.pi * d * 13 / 35), rel=2 * d)

    def test_halving_factor(self, basis8):
        a = corrector_build(basis8, _solid, CorrectorSpec(0.02)).norms()[0]
        b = corrector_build(basis8, _solid, CorrectorSpec(0.01)).norms()[0]
        assert 1.30 <= a / b <= 1.53

    def test_scaling_exponents(self, basis8):
        _, fits = corrector_scaling_check(basis8, _solid, [0.04, 0.02, 0.01, 0.005])
        assert fits["l2"].slope == pytest.approx(0.5, abs=0.05)
        assert fits["grad_l2"].slope == pytest.approx(-0.5, abs=0.05)
        assert fits["linf"].slope == pytest.approx(0.0, abs=0.05)

    def test_vanishing_trace_gives_faster_decay(self, basis8):
        # u(1) = 0: the corrector sees only u ~ (1 - r), so |v| ~ delta^{3/2}
        prof = lambda r: (1 - np.asarray(r), -np.ones_like(np.asarray(r, dtype=float)))
        _, fits = corrector_scaling_check(basis8, prof, [0.04, 0.02, 0.01, 0.005])
        assert fits["l2"].slope >= 1.4

    @given(st.floats(0.0, 1.0))
    def test_smoothstep_range(self, s):
        eta, _ = smoothstep(s)
        assert -1e-15 <= eta <= 1 + 1e-15

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1e-3, 0.5))
    def test_corrector_bounded_by_trace(self, d):
        c = corrector_build(None, _solid, CorrectorSpec(d))
        assert c.norms(panels=16)[2] <= 1.0 + 1e-12
