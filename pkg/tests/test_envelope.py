"""Funnel dynamics and switching tests with analytic oracles."""

import math

import numpy as np
import pytest

from slewguard.envelope import (
    ERROR_RATIO_FLOOR,
    EnvelopeConfig,
    EnvelopeState,
    SwitchConfig,
    blf_value,
    effective_switches,
    omega_s,
    omega_v,
    sppf_rhs,
    translated_error,
)


def make_switch(lo=0.8, hi=0.9, delta=0.005, m=5.0, n=2.0, p1=None):
    return SwitchConfig.from_principles(lo, hi, delta=delta, m=m, n=n, p1=p1)


class TestSwitchConfig:
    def test_from_principles_layout(self):
        cfg = make_switch()
        assert cfg.v1 == pytest.approx(0.8, abs=1e-15)
        assert cfg.v0 == pytest.approx(0.8 - 0.01, abs=1e-15)
        assert cfg.vm == pytest.approx(0.8 - 0.005, abs=1e-15)
        assert cfg.p0 == cfg.v1
        assert cfg.p1 == pytest.approx(0.9, abs=1e-15)
        assert cfg.pm == pytest.approx(0.85, abs=1e-15)

    def test_p1_cannot_exceed_plateau_edge(self):
        with pytest.raises(ValueError):
            make_switch(p1=0.95)

    def test_asynchronous_layout_enforced(self):
        with pytest.raises(ValueError):
            SwitchConfig(v0=0.79, v1=0.8, vm=0.795, m=5.0,
                         p0=0.81, p1=0.9, pm=0.855, n=2.0, delta=0.005)

    def test_centering_enforced(self):
        with pytest.raises(ValueError):
            SwitchConfig(v0=0.79, v1=0.8, vm=0.791, m=5.0,
                         p0=0.8, p1=0.9, pm=0.85, n=2.0, delta=0.005)


class TestSwitches:
    def test_omega_s_endpoints_and_mid(self):
        cfg = make_switch()
        assert omega_s(cfg, cfg.v0 - 0.01) == 0.0
        assert omega_s(cfg, cfg.v0) == 0.0
        assert omega_s(cfg, cfg.vm) == pytest.approx(0.5, abs=1e-15)
        assert omega_s(cfg, cfg.v1) == 1.0
        assert omega_s(cfg, cfg.v1 + 0.05) == 1.0

    def test_omega_v_endpoints_and_mid(self):
        cfg = make_switch()
        assert omega_v(cfg, cfg.p0) == 0.0
        assert omega_v(cfg, cfg.pm) == pytest.approx(0.5, abs=1e-15)
        assert omega_v(cfg, cfg.p1) == 1.0

    def test_freeze_completes_where_blend_starts(self):
        cfg = make_switch()
        beta = cfg.v1
        assert omega_s(cfg, beta) == 1.0
        assert omega_v(cfg, beta) == 0.0

    def test_monotone(self):
        cfg = make_switch()
        grid = np.linspace(cfg.v0 - 0.01, cfg.p1 + 0.01, 4001)
        s_vals = [omega_s(cfg, float(b)) for b in grid]
        v_vals = [omega_v(cfg, float(b)) for b in grid]
        assert all(b >= a - 1e-15 for a, b in zip(s_vals, s_vals[1:]))
        assert all(b >= a - 1e-15 for a, b in zip(v_vals, v_vals[1:]))

    def test_effective_switches_takes_worst(self):
        cfg = make_switch()
        betas = [cfg.v0 - 0.1, cfg.vm, cfg.v0]
        s_eff, v_eff = effective_switches(cfg, betas)
        assert s_eff == pytest.approx(0.5, abs=1e-15)
        assert v_eff == 0.0

    def test_effective_switches_empty(self):
        assert effective_switches(make_switch(), []) == (0.0, 0.0)


class TestFunnel:
    def setup_method(self):
        self.cfg = EnvelopeConfig(rho_0=3.0, rho_inf=1e-3, k_rho=0.1)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            EnvelopeConfig(rho_0=1e-3, rho_inf=1e-3, k_rho=0.1)
        with pytest.raises(ValueError):
            EnvelopeConfig(rho_0=3.0, rho_inf=1e-3, k_rho=0.0)
        with pytest.raises(ValueError):
            EnvelopeState(rho=0.0, epsilon=0.0)

    def test_shrink_mode_value(self):
        state = EnvelopeState(rho=3.0, epsilon=0.1)
        got = sppf_rhs(state, self.cfg, 0.0, e=0.3, e_dot=-0.1)
        assert got == pytest.approx(-0.1 * (3.0 - 1e-3), rel=1e-15)

    def test_shrink_mode_analytic_trajectory(self):
        # rho(t) = rho_inf + (rho_0 - rho_inf) exp(-k t) under omega_s = 0
        dt = 0.01
        rho = self.cfg.rho_0
        checks = {1.0: None, 10.0: None, 50.0: None}
        t = 0.0
        n_steps = int(round(50.0 / dt))
        for k in range(n_steps):
            def f(r):
                return sppf_rhs(EnvelopeState(rho=r, epsilon=0.0), self.cfg,
                                0.0, e=1.0, e_dot=0.0)
            k1 = f(rho)
            k2 = f(rho + 0.5 * dt * k1)
            k3 = f(rho + 0.5 * dt * k2)
            k4 = f(rho + dt * k3)
            rho += (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t = (k + 1) * dt
            for tc in checks:
                if abs(t - tc) < 1e-9:
                    checks[tc] = rho
        for tc, got in checks.items():
            want = 1e-3 + (3.0 - 1e-3) * math.exp(-0.1 * tc)
            assert got == pytest.approx(want, abs=1e-8)

    def test_follow_mode_freezes_translated_error(self):
        # co-integrate rho against a prescribed error signal with omega_s = 1
        dt = 0.01

        def e(t):
            return 0.5 + 0.2 * math.sin(0.3 * t)

        def e_dot(t):
            return 0.2 * 0.3 * math.cos(0.3 * t)

        rho = 2.0
        eps0 = e(0.0) / rho
        t = 0.0
        for k in range(5000):
            def f(tt, r):
                return sppf_rhs(EnvelopeState(rho=r, epsilon=0.0), self.cfg,
                                1.0, e=e(tt), e_dot=e_dot(tt))
            k1 = f(t, rho)
            k2 = f(t + 0.5 * dt, rho + 0.5 * dt * k1)
            k3 = f(t + 0.5 * dt, rho + 0.5 * dt * k2)
            k4 = f(t + dt, rho + dt * k3)
            rho += (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t = (k + 1) * dt
            eps = e(t) / rho
            assert abs(eps - eps0) < 1e-8

    def test_blend_is_convex_combination(self):
        state = EnvelopeState(rho=2.0, epsilon=0.2)
        pure0 = sppf_rhs(state, self.cfg, 0.0, e=0.4, e_dot=-0.2)
        pure1 = sppf_rhs(state, self.cfg, 1.0, e=0.4, e_dot=-0.2)
        mix = sppf_rhs(state, self.cfg, 0.3, e=0.4, e_dot=-0.2)
        assert mix == pytest.approx(0.7 * pure0 + 0.3 * pure1, rel=1e-12)

    def test_ratio_floor_guard(self):
        state = EnvelopeState(rho=2.0, epsilon=0.0)
        got = sppf_rhs(state, self.cfg, 1.0, e=ERROR_RATIO_FLOOR / 10.0,
                       e_dot=5.0)
        assert got == 0.0

    def test_translated_error(self):
        assert translated_error(0.3, 2.0) == pytest.approx(0.15)
        with pytest.raises(ValueError):
            translated_error(0.3, 0.0)


class TestBarrier:
    def test_zero_at_origin(self):
        assert blf_value(0.0, 1.0, 0.25) == 0.0

    def test_matches_direct_formula(self):
        for eps in (-0.9, -0.3, 0.01, 0.4, 0.999):
            want = 1.3 * 0.25 * math.log(math.cosh(eps / 0.25))
            assert blf_value(eps, 1.3, 0.25) == pytest.approx(want, rel=1e-12)

    def test_large_argument_stable(self):
        v = blf_value(500.0, 1.0, 1.0)
        assert math.isfinite(v)
        assert v == pytest.approx(500.0 - math.log(2.0), rel=1e-12)

    def test_nonnegative_and_even(self):
        rng = np.random.default_rng(5)
        for eps in rng.uniform(-3.0, 3.0, size=200):
            v = blf_value(float(eps), 1.0, 0.5)
            assert v >= 0.0
            assert v == pytest.approx(blf_value(float(-eps), 1.0, 0.5), rel=1e-12)

    def test_tanh_identity_property(self):
        # x tanh(x) - log cosh(x) >= 0, the inequality behind the barrier
        # cancellation argument
        rng = np.random.default_rng(17)
        xs = rng.uniform(0.0, 100.0, size=10000)
        for x in xs:
            lhs = float(x) * math.tanh(float(x))
            az = abs(float(x))
            lncosh = az + math.log1p(math.exp(-2.0 * az)) - math.log(2.0)
            assert lhs - lncosh >= 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            blf_value(0.1, 0.0, 0.5)
        with pytest.raises(ValueError):
            blf_value(0.1, 1.0, -0.5)
