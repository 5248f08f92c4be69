"""Backstepping guidance and torque laws with avoidance blending.

The cascade has two loops.  The outer loop picks a commanded body rate
(virtual law) that either shrinks the funnel-normalized pointing error
(tracking branch) or descends the artificial potential (avoidance branch);
the blend weight ``omega_v`` comes from :mod:`slewguard.envelope`.  A
tracking differentiator smooths the commanded rate and provides its
derivative for the feedforward term.  The inner loop is a saturated torque
law over the rate error ``e2 = omega - v`` with gyroscopic cancellation and
a tanh disturbance compensator.

Obstacle arguments are sequences of ``(cone, axis_body, beta)`` triples:
the cone definition, its axis resolved in body axes, and the cosine between
the boresight and that axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .attitude import BodyState, SpacecraftParams, pointing_error, rotate_to_body
from .envelope import EnvelopeConfig, SwitchConfig
from .potential import ObstacleCone, bridge_grad, repulsion_grad_beta

__all__ = [
    "ControllerConfig",
    "TdState",
    "ValidationIssue",
    "ValidationReport",
    "min_sin_theta_d",
    "virtual_law",
    "td_rhs",
    "td_step",
    "torque_law",
    "benchmark_apf_law",
    "validate_config",
]

# Pointing errors beyond this are treated as the antipodal equilibrium and
# kicked with a fixed torque so the slew cannot stall exactly upside down.
ANTIPODAL_THRESHOLD = 2.0 - 1e-6
ANTIPODAL_NUDGE_FRACTION = 0.1


@dataclass(frozen=True)
class ControllerConfig:
    """Gains of the guidance cascade.

    k1       tracking-branch rate gain [1/s], must dominate the funnel
             shrink rate
    k_p      avoidance-branch potential descent rate [1/s]
    k_omega  rate-loop proportional gain [N m s/rad]
    g, big_f barrier weight and softness of the funnel term
    k_a      attractive potential gain
    eta      width of the tanh disturbance compensator [rad/s]
    sigma    regularization added to squared norms in the direction inverses
    td_r     tracking differentiator speed [1/s]
    td_a1    differentiator position-term coefficient
    td_a2    differentiator damping-term coefficient
    """

    k1: float
    k_p: float
    k_omega: float
    g: float
    big_f: float
    k_a: float
    eta: float
    sigma: float
    td_r: float
    td_a1: float = 1.0
    td_a2: float = 2.0

    def __post_init__(self):
        for name in ("k1", "k_p", "k_omega", "g", "big_f", "k_a", "eta",
                     "sigma", "td_r", "td_a1", "td_a2"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass
class TdState:
    """Tracking differentiator state: smoothed command and its rate."""

    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self):
        self.x1 = np.asarray(self.x1, dtype=float)
        self.x2 = np.asarray(self.x2, dtype=float)
        if self.x1.shape != (3,) or self.x2.shape != (3,):
            raise ValueError("TdState components must have shape (3,)")


def min_sin_theta_d(theta_df: float, p0: float, p1: float) -> float:
    """Smallest sine of the goal angle while the avoidance blend is active.

    While ``omega_v > 0`` the boresight sits within ``arccos(p0)`` of some
    cone axis, so with every axis at least ``theta_df`` from the goal the
    goal angle is confined to ``[theta_df - arccos(p0), pi - arccos(p1)]``.
    The sine is concave there, so the minimum is at an endpoint.  A lower
    bound that reaches zero or below means the geometry cannot keep the
    attraction direction well defined and 0.0 is returned.
    """
    if not (-1.0 <= p0 < p1 <= 1.0):
        raise ValueError("need -1 <= p0 < p1 <= 1")
    if theta_df <= 0.0 or theta_df >= math.pi:
        raise ValueError("theta_df must lie in (0, pi)")
    lo = theta_df - math.acos(p0)
    hi = math.pi - math.acos(p1)
    if lo > hi:
        raise ValueError("geometrically infeasible goal-angle bounds")
    if lo <= 0.0:
        return 0.0
    return min(math.sin(lo), math.sin(hi))


def _apf_vector(bx: float, by: float, bz: float,
                rx: float, ry: float, rz: float,
                obstacles: Sequence[tuple[ObstacleCone, np.ndarray, float]],
                k_a: float) -> tuple[float, float, float]:
    """Potential gradient direction P1 with U_dot = dot(P1, omega).

    P1 = k_a * (r_b x B_b) - sum_i dU_i/dbeta * (f_bi x B_b).
    """
    px = k_a * (ry * bz - rz * by)
    py = k_a * (rz * bx - rx * bz)
    pz = k_a * (rx * by - ry * bx)
    for cone, f_b, beta in obstacles:
        grad = repulsion_grad_beta(cone, beta)
        if grad == 0.0:
            continue
        fx, fy, fz = float(f_b[0]), float(f_b[1]), float(f_b[2])
        px -= grad * (fy * bz - fz * by)
        py -= grad * (fz * bx - fx * bz)
        pz -= grad * (fx * by - fy * bx)
    return px, py, pz


def virtual_law(boresight_body: np.ndarray, target_body: np.ndarray,
                obstacles: Sequence[tuple[ObstacleCone, np.ndarray, float]],
                eps: float, rho: float, omega_v_eff: float,
                cfg: ControllerConfig) -> np.ndarray:
    """Commanded body rate blending the tracking and avoidance branches.

    The tracking branch inverts the error-rate direction ``r_b x B_b`` to
    drive the funnel error down at rate ``k1``; the avoidance branch descends
    the total potential along ``-P1``.  Both inverses are regularized by
    ``sigma`` so the command stays finite through alignment singularities.
    """
    bx, by, bz = float(boresight_body[0]), float(boresight_body[1]), float(boresight_body[2])
    rx, ry, rz = float(target_body[0]), float(target_body[1]), float(target_body[2])
    tx = ry * bz - rz * by
    ty = rz * bx - rx * bz
    tz = rx * by - ry * bx
    track_scale = 0.0
    if omega_v_eff < 1.0:
        track_scale = (-cfg.k1 * rho * eps * (1.0 - omega_v_eff)
                       / (tx * tx + ty * ty + tz * tz + cfg.sigma))
    avoid_scale = 0.0
    px = py = pz = 0.0
    if omega_v_eff > 0.0:
        px, py, pz = _apf_vector(bx, by, bz, rx, ry, rz, obstacles, cfg.k_a)
        avoid_scale = (-cfg.k_p * omega_v_eff
                       / (px * px + py * py + pz * pz + cfg.sigma))
    return np.array([tx * track_scale + px * avoid_scale,
                     ty * track_scale + py * avoid_scale,
                     tz * track_scale + pz * avoid_scale])


def td_rhs(state: TdState, command: np.ndarray,
           cfg: ControllerConfig) -> tuple[np.ndarray, np.ndarray]:
    """Tracking differentiator dynamics, elementwise over the three axes.

    x1_dot = x2
    x2_dot = -r^2 a1 tanh(x1 - command) - r^2 a2 tanh(x2 / r)
    """
    r2 = cfg.td_r * cfg.td_r
    x1, x2 = state.x1, state.x2
    x2_dot = np.empty(3)
    for i in range(3):
        x2_dot[i] = (-r2 * cfg.td_a1 * math.tanh(float(x1[i]) - float(command[i]))
                     - r2 * cfg.td_a2 * math.tanh(float(x2[i]) / cfg.td_r))
    return x2.copy(), x2_dot


def td_step(state: TdState, command: np.ndarray, dt: float,
            cfg: ControllerConfig) -> TdState:
    """One RK4 step of the differentiator with the command held constant."""
    y1, y2 = state.x1, state.x2

    def f(a, b):
        return td_rhs(TdState(a, b), command, cfg)

    k1a, k1b = f(y1, y2)
    k2a, k2b = f(y1 + 0.5 * dt * k1a, y2 + 0.5 * dt * k1b)
    k3a, k3b = f(y1 + 0.5 * dt * k2a, y2 + 0.5 * dt * k2b)
    k4a, k4b = f(y1 + dt * k3a, y2 + dt * k3b)
    return TdState(y1 + (dt / 6.0) * (k1a + 2 * k2a + 2 * k3a + k4a),
                   y2 + (dt / 6.0) * (k1b + 2 * k2b + 2 * k3b + k4b))


def _clamp(v: float, limit: float) -> float:
    if v > limit:
        return limit
    if v < -limit:
        return -limit
    return v


def torque_law(omega: np.ndarray, e2: np.ndarray, eps: float, rho: float,
               boresight_body: np.ndarray, target_body: np.ndarray,
               obstacles: Sequence[tuple[ObstacleCone, np.ndarray, float]],
               omega_s_eff: float, omega_v_eff: float, sd_dot: np.ndarray,
               params: SpacecraftParams, cfg: ControllerConfig) -> np.ndarray:
    """Saturated control torque of the inner rate loop.

    Combines gyroscopic cancellation, proportional rate-error feedback, a
    tanh disturbance compensator sized by ``params.disturbance_bound``,
    differentiator feedforward, the funnel barrier reaction (faded out by
    ``omega_s``), and the potential descent direction (faded in by
    ``omega_v``).  Each component is clamped to the actuator limit.
    """
    bx, by, bz = float(boresight_body[0]), float(boresight_body[1]), float(boresight_body[2])
    rx, ry, rz = float(target_body[0]), float(target_body[1]), float(target_body[2])
    w = np.asarray(omega, dtype=float)
    jw = params.inertia @ w
    jsd = params.inertia @ np.asarray(sd_dot, dtype=float)
    d_m = params.disturbance_bound

    # barrier reaction along r_b x B_b, active only while tracking
    barrier = 0.0
    if omega_s_eff < 1.0:
        barrier = (cfg.g * math.tanh(eps / cfg.big_f) / rho) * (1.0 - omega_s_eff)
    tx = ry * bz - rz * by
    ty = rz * bx - rx * bz
    tz = rx * by - ry * bx

    px = py = pz = 0.0
    if omega_v_eff > 0.0:
        px, py, pz = _apf_vector(bx, by, bz, rx, ry, rz, obstacles, cfg.k_a)

    u = np.empty(3)
    gyro = (w[1] * jw[2] - w[2] * jw[1],
            w[2] * jw[0] - w[0] * jw[2],
            w[0] * jw[1] - w[1] * jw[0])
    tvec = (tx, ty, tz)
    pvec = (px, py, pz)
    for i in range(3):
        e2i = float(e2[i])
        u[i] = (gyro[i]
                - cfg.k_omega * e2i
                - d_m * math.tanh(e2i / cfg.eta)
                + float(jsd[i])
                - barrier * tvec[i]
                - omega_v_eff * pvec[i])

    x_e = 1.0 - (bx * rx + by * ry + bz * rz)
    if x_e > ANTIPODAL_THRESHOLD:
        # kick off the antipodal equilibrium along the axis most orthogonal
        # to the boresight, deterministically
        idx = int(np.argmin(np.abs([bx, by, bz])))
        u[idx] += ANTIPODAL_NUDGE_FRACTION * params.torque_limit

    for i in range(3):
        u[i] = _clamp(float(u[i]), params.torque_limit)
    return u


def benchmark_apf_law(omega: np.ndarray, e2: np.ndarray,
                      boresight_body: np.ndarray, target_body: np.ndarray,
                      obstacles: Sequence[tuple[ObstacleCone, np.ndarray, float]],
                      sd_dot: np.ndarray, params: SpacecraftParams,
                      cfg: ControllerConfig) -> np.ndarray:
    """Torque of the potential-field-only baseline.

    Identical backstepping structure with the funnel machinery disabled:
    the virtual command is the avoidance branch alone and the barrier
    reaction is absent, which is the switch configuration omega_s = 1,
    omega_v = 1 held for all time.
    """
    return torque_law(omega, e2, 0.0, 1.0, boresight_body, target_body,
                      obstacles, 1.0, 1.0, sd_dot, params, cfg)


def benchmark_virtual_law(boresight_body: np.ndarray, target_body: np.ndarray,
                          obstacles: Sequence[tuple[ObstacleCone, np.ndarray, float]],
                          cfg: ControllerConfig) -> np.ndarray:
    """Commanded rate of the baseline: the avoidance branch held on.

    The normalized descent command grows like ``k_p / |P1|`` as the field
    gradient vanishes near the goal, so the rate loop cannot track it there
    and the baseline hunts around the target instead of parking.  That lost
    accuracy is the behavior the baseline exists to demonstrate; the
    switched controller avoids it by fading this branch out away from the
    cones.
    """
    return virtual_law(boresight_body, target_body, obstacles,
                       0.0, 1.0, 1.0, cfg)


@dataclass(frozen=True)
class ValidationIssue:
    rule: str
    status: str  # "pass" | "warn" | "fail"
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...]

    @property
    def failures(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.status == "fail")

    @property
    def warnings(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.status == "warn")

    @property
    def ok(self) -> bool:
        return not self.failures

    def describe(self) -> str:
        return "\n".join(f"[{i.status}] {i.rule}: {i.detail}" for i in self.issues)


def validate_config(cfg: ControllerConfig, envelope: EnvelopeConfig,
                    switch: SwitchConfig,
                    obstacles: Sequence[ObstacleCone],
                    boresight_body: np.ndarray, target_inertial: np.ndarray,
                    initial: BodyState, theta_df: float) -> ValidationReport:
    """Check the parameter selection rules against a concrete scenario.

    Hard failures break convergence or safety arguments; warnings flag
    departures from the nominal design recipe that the simulation may still
    tolerate.  Every rule is reported so the result doubles as a record of
    the margins.
    """
    issues: list[ValidationIssue] = []

    def add(rule, ok, detail, warn_only=False):
        status = "pass" if ok else ("warn" if warn_only else "fail")
        issues.append(ValidationIssue(rule, status, detail))

    # funnel shrink must be slower than the tracking branch can contract
    add("gain-ordering", cfg.k1 > envelope.k_rho,
        f"k1={cfg.k1:g} vs k_rho={envelope.k_rho:g} (need k1 > k_rho)")

    # attraction must dominate the worst repulsion slope over the reachable
    # goal-angle range while avoidance is active
    try:
        ms = min_sin_theta_d(theta_df, switch.p0, switch.p1)
    except ValueError as exc:
        add("attraction-floor", False, str(exc))
        ms = None
    if ms is not None:
        r_max = max((c.r_slope for c in obstacles), default=0.0)
        if not obstacles:
            add("attraction-floor", True, "no obstacles, rule vacuous")
        elif ms <= 0.0:
            add("attraction-floor", False,
                f"goal-angle lower bound reaches zero (theta_df="
                f"{math.degrees(theta_df):.2f} deg inside the blend band)")
        else:
            need = r_max / ms
            add("attraction-floor", cfg.k_a >= need - 1e-12,
                f"k_a={cfg.k_a:g} vs r_slope_max/min_sin={need:.6g} "
                f"(min_sin={ms:.6g})")

    # funnel must start strictly above the initial error
    r_b0 = rotate_to_body(initial.attitude, target_inertial)
    x_e0 = pointing_error(boresight_body, r_b0)
    add("funnel-start", envelope.rho_0 > x_e0,
        f"rho_0={envelope.rho_0:g} vs x_e(0)={x_e0:.6g} (need strict >)")

    for i, cone in enumerate(obstacles):
        sep = math.acos(max(-1.0, min(1.0, float(
            np.dot(target_inertial, cone.axis_inertial)))))
        add(f"goal-separation[{i}]", sep >= theta_df - 1e-12,
            f"goal-to-axis angle {math.degrees(sep):.3f} deg vs declared "
            f"minimum {math.degrees(theta_df):.3f} deg")
        clear = math.acos(max(-1.0, min(1.0, switch.v0)))
        add(f"goal-clear-of-field[{i}]", sep > clear,
            f"goal-to-axis angle {math.degrees(sep):.3f} deg vs switching "
            f"onset {math.degrees(clear):.3f} deg (field must vanish at goal)")

        # nominal recipe: plateau height balances attraction at the buffer
        # edge of the goal-facing side
        x_edge = 1.0 - math.cos(sep - cone.theta_1)
        residual = cone.k_r - cfg.k_a * x_edge
        add(f"edge-equilibrium[{i}]",
            abs(residual) <= 1e-9 * max(1.0, cone.k_r),
            f"k_r={cone.k_r:.6g} vs k_a*x_E={cfg.k_a * x_edge:.6g} "
            f"(residual {residual:+.3g})", warn_only=True)

        # measured worst slope of the bridge vs the design slope
        grid = np.linspace(cone.shape.lo, cone.shape.hi, 20001)
        s_max = max(bridge_grad(cone.shape, float(b), cone.k_r) for b in grid)
        add(f"repulsion-slope[{i}]", s_max <= cone.r_slope * (1.0 + 1e-6),
            f"measured max dU/dbeta {s_max:.6g} vs design slope "
            f"{cone.r_slope:g}", warn_only=True)

    return ValidationReport(tuple(issues))
