"""Closed-loop engine tests: RHS composition, determinism, logging, aborts."""

import json
import math

import numpy as np
import pytest

from slewguard.attitude import (
    BodyState,
    SpacecraftParams,
    UnitQuaternion,
    attitude_kinematics_rhs,
    dynamics_rhs,
    pointing_error,
    reduced_error_rate,
    rotate_to_body,
)
from slewguard.controller import (
    ControllerConfig,
    TdState,
    benchmark_apf_law,
    benchmark_virtual_law,
    td_rhs,
    torque_law,
    virtual_law,
)
from slewguard.engine import (
    SimConfig,
    SimulationAbort,
    TrajectoryRecord,
    ValidationFailure,
    coupled_rhs,
    disturbance_torque,
    lyapunov_monitor,
    run_scenario,
    write_summary_json,
    write_trajectory_csv,
)
from slewguard.envelope import (
    EnvelopeConfig,
    EnvelopeState,
    SwitchConfig,
    effective_switches,
    sppf_rhs,
)
from slewguard.potential import ObstacleCone
from slewguard.scenario import Scenario, load_preset


def make_scenario(n_obstacles=1, **ctrl_over):
    """Hand-built scenario with a cone close to the slew path."""
    ctrl_kw = dict(k1=0.3, k_p=0.5, k_omega=10.0, g=1.0, big_f=0.25, k_a=2.5,
                   eta=2e-4, sigma=1e-6, td_r=20.0, td_a1=1.0, td_a2=2.0)
    ctrl_kw.update(ctrl_over)
    ctrl = ControllerConfig(**ctrl_kw)
    params = SpacecraftParams(inertia=np.diag([5.08, 5.14, 5.0]),
                              torque_limit=0.5, disturbance_bound=0.1)
    target = np.array([-0.866, 0.5, 0.0])
    target /= np.linalg.norm(target)
    axes = [np.array([0.5145, 0.8575, 0.0]),
            np.array([-0.099, 0.990, -0.099])]
    cones = []
    for axis in axes[:n_obstacles]:
        axis = axis / np.linalg.norm(axis)
        sep = math.acos(float(np.dot(axis, target)))
        k_r = ctrl.k_a * (1.0 - math.cos(sep - math.radians(27.0)))
        cones.append(ObstacleCone(axis_inertial=axis,
                                  theta_f=math.radians(20.0),
                                  theta_0=math.radians(36.0),
                                  theta_1=math.radians(27.0),
                                  k_r=k_r, r_slope=0.3))
    switch = SwitchConfig.from_principles(
        math.cos(math.radians(36.0)), math.cos(math.radians(27.0)),
        delta=0.005, m=5.0, n=2.0, p1=math.cos(math.radians(30.0)))
    return Scenario(
        name="engine-test",
        description="hand-built fixture",
        params=params,
        initial=BodyState(UnitQuaternion.identity(), np.zeros(3)),
        boresight_body=np.array([0.0, 0.0, 1.0]),
        target_inertial=target,
        obstacles=tuple(cones),
        envelope=EnvelopeConfig(rho_0=3.0, rho_inf=1e-3, k_rho=0.1),
        switch=switch,
        controller=ctrl,
        sim=SimConfig(),
        theta_df=math.radians(50.0),
    )


class TestDisturbance:
    def test_initial_value(self):
        d0 = disturbance_torque(0.0)
        np.testing.assert_allclose(d0, [-0.037, 0.048, 0.032], atol=1e-15)

    def test_bounded_by_declared_limit(self):
        worst = max(float(np.linalg.norm(disturbance_torque(t)))
                    for t in np.linspace(0.0, 4000.0, 40001))
        assert worst < 0.1
        assert worst > 0.05  # sanity: the signal is not trivially small

    def test_disabled_is_zero(self):
        np.testing.assert_array_equal(disturbance_torque(37.5, enabled=False),
                                      np.zeros(3))


def quat_taking(body_dir, inertial_dir):
    """Quaternion q with rotate_to_body(q, inertial_dir) == body_dir."""
    c = float(np.dot(body_dir, inertial_dir))
    axis = np.cross(body_dir, inertial_dir)
    n = float(np.linalg.norm(axis))
    if n < 1e-12:
        return UnitQuaternion.identity()
    return UnitQuaternion.from_axis_angle(axis / n, math.acos(c))


def reference_rhs(t, y, sc, sim):
    """Recompose the coupled derivative from the public module functions."""
    q = np.asarray(y[0:4], dtype=float)
    q = q / np.linalg.norm(q)
    quat = UnitQuaternion(*q)
    w = np.asarray(y[4:7], dtype=float)
    rho = float(y[7])
    td = TdState(np.asarray(y[8:11], dtype=float),
                 np.asarray(y[11:14], dtype=float))

    b = sc.boresight_body
    r_b = rotate_to_body(quat, sc.target_inertial)
    x_e = pointing_error(b, r_b)
    obstacles = []
    betas = []
    for cone in sc.obstacles:
        f_b = rotate_to_body(quat, cone.axis_inertial)
        beta = float(np.dot(b, f_b))
        obstacles.append((cone, f_b, beta))
        betas.append(beta)

    benchmark = sim.controller_mode == "benchmark_apf"
    if benchmark:
        v_cmd = benchmark_virtual_law(b, r_b, obstacles, sc.controller)
        u = benchmark_apf_law(w, w - td.x1, b, r_b, obstacles, td.x2,
                              sc.params, sc.controller)
        rho_dot = 0.0  # no funnel in the baseline
    else:
        s_eff, v_eff = effective_switches(sc.switch, betas)
        eps = x_e / rho
        v_cmd = virtual_law(b, r_b, obstacles, eps, rho, v_eff, sc.controller)
        u = torque_law(w, w - td.x1, eps, rho, b, r_b, obstacles, s_eff,
                       v_eff, td.x2, sc.params, sc.controller)
        e_dot = reduced_error_rate(b, r_b, w)
        rho_dot = sppf_rhs(EnvelopeState(rho, eps), sc.envelope, s_eff,
                           x_e, e_dot)

    d = disturbance_torque(t, sim.disturbance_enabled)
    w_dot = dynamics_rhs(BodyState(quat, w), u, d, sc.params)
    q_dot = attitude_kinematics_rhs(quat, w)
    d1, d2 = td_rhs(td, v_cmd, sc.controller)
    return np.concatenate([q_dot, w_dot, [rho_dot], d1, d2])


def sample_states(rng, sc, n):
    """Random coupled states with cone angles spread across every regime."""
    states = []
    gammas = [15.0, 25.0, 28.0, 31.0, 33.0, 35.0, 36.5, 40.0, 80.0]
    for i in range(n):
        gamma = math.radians(gammas[i % len(gammas)])
        f_body = np.array([math.sin(gamma), 0.0, math.cos(gamma)])
        quat = quat_taking(f_body, sc.obstacles[0].axis_inertial)
        spin = UnitQuaternion.from_axis_angle(rng.normal(size=3) * 0.0
                                              + np.array([0.0, 0.0, 1.0]),
                                              rng.uniform(-math.pi, math.pi))
        quat = quat.multiply(spin)
        y = np.zeros(14)
        y[0:4] = quat.as_array()
        y[4:7] = rng.normal(size=3) * 0.1
        y[7] = rng.uniform(0.3, 3.0)
        y[8:11] = rng.normal(size=3) * 0.05
        y[11:14] = rng.normal(size=3) * 0.2
        states.append(y)
    return states


class TestCoupledRhs:
    def test_matches_module_composition(self):
        sc = make_scenario(n_obstacles=2)
        sim = SimConfig()
        rng = np.random.default_rng(11)
        for y in sample_states(rng, sc, 27):
            t = rng.uniform(0.0, 100.0)
            got = coupled_rhs(t, y, sc, sim)
            want = reference_rhs(t, y, sc, sim)
            np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)

    def test_matches_composition_in_benchmark_mode(self):
        sc = make_scenario(n_obstacles=2)
        sim = SimConfig(controller_mode="benchmark_apf")
        rng = np.random.default_rng(12)
        for y in sample_states(rng, sc, 9):
            got = coupled_rhs(3.0, y, sc, sim)
            want = reference_rhs(3.0, y, sc, sim)
            np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)

    def test_disturbance_toggle(self):
        sc = make_scenario()
        y = np.zeros(14)
        y[3] = 1.0
        y[7] = 3.0
        on = coupled_rhs(5.0, y, sc, SimConfig(disturbance_enabled=True))
        off = coupled_rhs(5.0, y, sc, SimConfig(disturbance_enabled=False))
        d = disturbance_torque(5.0)
        np.testing.assert_allclose(
            on[4:7] - off[4:7], sc.params.inertia_inv @ d, atol=1e-15)

    def test_aborts_on_collapsed_funnel(self):
        sc = make_scenario()
        y = np.zeros(14)
        y[3] = 1.0
        with pytest.raises(SimulationAbort):
            coupled_rhs(0.0, y, sc)


class TestRunScenario:
    def test_tracking_converges(self):
        sc = load_preset("paper-single-1").with_sim(duration=40.0,
                                                    record_stride=10)
        res = run_scenario(sc)
        s = res.summary
        assert s["final_error_deg"] < 1.0
        assert s["initial_error_deg"] == pytest.approx(90.0, abs=0.01)
        assert s["constraint_satisfied"]
        assert s["max_quat_norm_error"] < 1e-12
        # obstacle stays far from the slew path in this preset
        assert s["min_clearance_deg"][0] > 80.0
        assert all(r.omega_s_eff == 0.0 for r in res.records)
        # funnel follows the mode-1 shrink law the whole way
        env = sc.envelope
        for rec in res.records:
            want = env.rho_inf + (env.rho_0 - env.rho_inf) * math.exp(
                -env.k_rho * rec.t)
            assert rec.rho == pytest.approx(want, abs=1e-6)

    def test_record_layout(self):
        sc = load_preset("paper-single-1").with_sim(duration=1.05,
                                                    record_stride=10)
        res = run_scenario(sc)
        ts = [r.t for r in res.records]
        assert ts[:3] == [0.0, pytest.approx(0.1), pytest.approx(0.2)]
        assert ts[-1] == pytest.approx(1.05)
        assert len(ts) == 12
        assert all(len(r.betas) == 1 for r in res.records)

    def test_bit_identical_repeats(self):
        sc = load_preset("paper-two-1").with_sim(duration=3.0)
        r1 = run_scenario(sc)
        r2 = run_scenario(sc)
        assert r1.records == r2.records
        s1, s2 = dict(r1.summary), dict(r2.summary)
        s1.pop("wall_clock_s")
        s2.pop("wall_clock_s")
        assert s1 == s2

    def test_euler_agrees_with_rk4_at_small_step(self):
        sc = make_scenario(n_obstacles=0)
        rk = run_scenario(sc.with_sim(duration=5.0), force=True)
        eu = run_scenario(sc.with_sim(duration=5.0, dt=0.001,
                                      integrator="euler"), force=True)
        assert rk.records[-1].x_e == pytest.approx(eu.records[-1].x_e,
                                                   abs=2e-3)

    def test_validation_failure_raises_unless_forced(self):
        sc = make_scenario(k1=0.05)  # violates gain ordering
        with pytest.raises(ValidationFailure):
            run_scenario(sc.with_sim(duration=1.0))
        res = run_scenario(sc.with_sim(duration=1.0), force=True)
        assert res.summary["validation_failures"]

    def test_abort_on_nonfinite_state(self):
        # overflow in the differentiator gain poisons a stage immediately
        sc = make_scenario(td_r=1e300)
        with pytest.raises(SimulationAbort) as err:
            run_scenario(sc.with_sim(duration=1.0), force=True)
        assert err.value.t <= 0.02

    def test_benchmark_mode_pins_switches(self):
        sc = load_preset("paper-single-1").with_sim(
            duration=2.0, controller_mode="benchmark_apf")
        res = run_scenario(sc)
        assert all(r.omega_s_eff == 1.0 and r.omega_v_eff == 1.0
                   for r in res.records)
        assert res.summary["controller_mode"] == "benchmark_apf"
        # the baseline has no funnel: the radius is a spectator, held fixed
        assert all(r.rho == sc.envelope.rho_0 for r in res.records)


def synthetic_records(values, omega_s=0.0):
    recs = []
    for k, v in enumerate(values):
        recs.append(TrajectoryRecord(
            t=float(k), x_e=0.5, pointing_angle_deg=60.0, betas=(0.1,),
            rho=1.0, eps=0.5, omega_s_eff=omega_s, omega_v_eff=0.0,
            omega=(0.0, 0.0, 0.0), torque=(0.0, 0.0, 0.0),
            v_q=float(v), v_omega=0.0, td_error=0.0, quat_norm_error=0.0))
    return recs


class TestLyapunovMonitor:
    def test_descending_energy_flags_nothing(self):
        recs = synthetic_records([5.0, 4.0, 3.0, 2.5, 2.4])
        diag = lyapunov_monitor(recs, skip_s=0.5)
        assert diag.fraction_positive == 0.0
        assert diag.n_considered == 3
        assert diag.max_rate == pytest.approx(-0.1)

    def test_positive_jump_is_counted(self):
        recs = synthetic_records([5.0, 4.0, 4.7, 3.0, 2.0])
        diag = lyapunov_monitor(recs, skip_s=0.5)
        assert diag.fraction_positive == pytest.approx(1.0 / 3.0)
        assert diag.max_rate == pytest.approx(0.7)

    def test_switching_windows_excluded(self):
        recs = synthetic_records([5.0, 4.0, 6.0, 3.0], omega_s=0.2)
        diag = lyapunov_monitor(recs, skip_s=0.5)
        assert diag.n_considered == 0

    def test_real_run_descends_outside_switching(self):
        sc = load_preset("paper-single-1").with_sim(duration=30.0,
                                                    record_stride=5)
        res = run_scenario(sc)
        diag = lyapunov_monitor(res.records)
        assert diag.n_considered > 100
        assert diag.fraction_positive < 0.2


class TestOutputs(object):
    def test_csv_round_trip(self, tmp_path):
        sc = load_preset("paper-two-1").with_sim(duration=0.5,
                                                 record_stride=10)
        res = run_scenario(sc)
        path = tmp_path / "traj.csv"
        write_trajectory_csv(res.records, path)
        data = np.genfromtxt(path, delimiter=",", names=True)
        assert data.dtype.names[:5] == ("t", "x_e", "pointing_angle_deg",
                                        "beta_1", "beta_2")
        for i, rec in enumerate(res.records):
            assert data["t"][i] == rec.t
            assert data["x_e"][i] == rec.x_e  # 17 digits round-trips exactly
            assert data["beta_2"][i] == rec.betas[1]
            assert data["torque_y"][i] == rec.torque[1]

    def test_summary_json(self, tmp_path):
        sc = load_preset("paper-single-1").with_sim(duration=0.5)
        res = run_scenario(sc)
        path = tmp_path / "summary.json"
        write_summary_json(res.summary, path)
        loaded = json.loads(path.read_text())
        assert loaded["scenario"] == "paper-single-1"
        assert loaded["dt"] == 0.01
        assert loaded["theta_f_deg"] == [pytest.approx(20.0)]
        assert "wall_clock_s" in loaded
