"""Reduced-attitude kinematics and rigid-body dynamics primitives.

Conventions
-----------
* Quaternions are stored scalar-last, ``[x, y, z, w]``, with the Hamilton
  product.  The attitude quaternion ``q`` maps body-frame vectors to the
  inertial frame through the sandwich ``q [v, 0] q*``; an inertial vector is
  therefore resolved in body axes with the conjugate sandwich
  ``q* [v, 0] q``.  The identity quaternion ``[0, 0, 0, 1]`` means body and
  inertial axes coincide.
* ``omega`` is the body angular rate in body axes [rad/s].  With the
  convention above the kinematics read ``q_dot = 0.5 * q [omega, 0]`` and a
  fixed inertial direction ``r`` seen in body axes evolves as
  ``r_b_dot = -omega x r_b``.
* The scalar pointing error between a body-fixed boresight ``B_b`` and a
  body-resolved target direction ``r_b`` is ``x_e = 1 - dot(B_b, r_b)``,
  ranging from 0 (aligned) to 2 (anti-aligned).

All vectors are plain ``numpy`` arrays of shape (3,).  Nothing in this module
mutates its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "UnitQuaternion",
    "BodyState",
    "SpacecraftParams",
    "rotate_to_body",
    "pointing_error",
    "reduced_error_rate",
    "attitude_kinematics_rhs",
    "dynamics_rhs",
]

# Constructor rejects inputs farther than this from the unit sphere; smaller
# deviations are silently renormalized.
_QUAT_NORM_TOL = 1e-6
# Unit-vector precondition tolerance for direction arguments.
_UNIT_VEC_TOL = 1e-6


def _require_unit_vec(v: np.ndarray, name: str) -> None:
    n = math.sqrt(float(v[0]) ** 2 + float(v[1]) ** 2 + float(v[2]) ** 2)
    if abs(n - 1.0) > _UNIT_VEC_TOL:
        raise ValueError(f"{name} must be a unit vector, got norm {n:.9e}")


class UnitQuaternion:
    """Unit quaternion ``[x, y, z, w]`` (scalar last), Hamilton product.

    Construction renormalizes so the stored norm is 1 to machine precision;
    inputs farther than 1e-6 from unit norm are rejected as likely bugs
    rather than drift.
    """

    __slots__ = ("x", "y", "z", "w")

    def __init__(self, x: float, y: float, z: float, w: float):
        n = math.sqrt(x * x + y * y + z * z + w * w)
        if abs(n - 1.0) > _QUAT_NORM_TOL:
            raise ValueError(f"quaternion norm {n:.9e} is not within "
                             f"{_QUAT_NORM_TOL:g} of 1; normalize explicitly")
        self.x = x / n
        self.y = y / n
        self.z = z / n
        self.w = w / n

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(0.0, 0.0, 0.0, 1.0)

    @classmethod
    def normalized(cls, x: float, y: float, z: float, w: float) -> "UnitQuaternion":
        """Build from an arbitrary nonzero 4-vector, scaling onto the sphere."""
        n = math.sqrt(x * x + y * y + z * z + w * w)
        if n < 1e-12:
            raise ValueError("cannot normalize a near-zero quaternion")
        return cls(x / n, y / n, z / n, w / n)

    @classmethod
    def from_axis_angle(cls, axis: np.ndarray, angle: float) -> "UnitQuaternion":
        """Rotation of ``angle`` [rad] about ``axis`` (normalized here)."""
        ax, ay, az = float(axis[0]), float(axis[1]), float(axis[2])
        n = math.sqrt(ax * ax + ay * ay + az * az)
        if n < 1e-12:
            raise ValueError("rotation axis must be nonzero")
        s = math.sin(0.5 * angle) / n
        return cls(ax * s, ay * s, az * s, math.cos(0.5 * angle))

    @property
    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y
                         + self.z * self.z + self.w * self.w)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.w])

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(-self.x, -self.y, -self.z, self.w)

    def multiply(self, other: "UnitQuaternion") -> "UnitQuaternion":
        """Hamilton product ``self (x) other``."""
        x, y, z, w = _quat_mul(self.x, self.y, self.z, self.w,
                               other.x, other.y, other.z, other.w)
        return UnitQuaternion(x, y, z, w)

    def rotate(self, v: np.ndarray) -> np.ndarray:
        """Apply the sandwich ``q [v, 0] q*`` (body -> inertial here)."""
        return np.array(_sandwich(self.x, self.y, self.z, self.w,
                                  float(v[0]), float(v[1]), float(v[2])))

    def __repr__(self) -> str:  # pragma: no cover
        return (f"UnitQuaternion(x={self.x:.9g}, y={self.y:.9g}, "
                f"z={self.z:.9g}, w={self.w:.9g})")


def _quat_mul(ax: float, ay: float, az: float, aw: float,
              bx: float, by: float, bz: float, bw: float):
    """Hamilton product components of ``a (x) b``, scalar last."""
    return (
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    )


def _sandwich(qx: float, qy: float, qz: float, qw: float,
              vx: float, vy: float, vz: float):
    """Vector part of ``q [v, 0] q*`` via the two-cross expansion."""
    tx = 2.0 * (qy * vz - qz * vy)
    ty = 2.0 * (qz * vx - qx * vz)
    tz = 2.0 * (qx * vy - qy * vx)
    return (
        vx + qw * tx + qy * tz - qz * ty,
        vy + qw * ty + qz * tx - qx * tz,
        vz + qw * tz + qx * ty - qy * tx,
    )


def _to_body(qx: float, qy: float, qz: float, qw: float,
             vx: float, vy: float, vz: float):
    """Conjugate sandwich ``q* [v, 0] q``: inertial components to body."""
    return _sandwich(-qx, -qy, -qz, qw, vx, vy, vz)


@dataclass
class BodyState:
    """Instantaneous rigid-body state: attitude plus body rate [rad/s]."""

    attitude: UnitQuaternion
    omega: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        if self.omega.shape != (3,):
            raise ValueError("omega must have shape (3,)")


@dataclass(frozen=True)
class SpacecraftParams:
    """Plant constants: inertia [kg m^2], per-axis torque limit [N m],
    and the disturbance magnitude bound [N m] used by the compensator."""

    inertia: np.ndarray
    torque_limit: float
    disturbance_bound: float
    inertia_inv: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape != (3, 3):
            raise ValueError("inertia must have shape (3, 3)")
        if not np.allclose(inertia, inertia.T, rtol=0.0, atol=1e-12):
            raise ValueError("inertia must be symmetric")
        try:
            np.linalg.cholesky(inertia)
        except np.linalg.LinAlgError as exc:
            raise ValueError("inertia must be positive definite") from exc
        if self.torque_limit <= 0.0:
            raise ValueError("torque_limit must be positive")
        if self.disturbance_bound < 0.0:
            raise ValueError("disturbance_bound must be nonnegative")
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "inertia_inv", np.linalg.inv(inertia))


def rotate_to_body(q: UnitQuaternion, v_inertial: np.ndarray) -> np.ndarray:
    """Resolve an inertial-frame vector in body axes: ``q* [v, 0] q``."""
    return np.array(_to_body(q.x, q.y, q.z, q.w,
                             float(v_inertial[0]),
                             float(v_inertial[1]),
                             float(v_inertial[2])))


def pointing_error(boresight_body: np.ndarray, target_body: np.ndarray) -> float:
    """Scalar reduced-attitude error ``x_e = 1 - dot(B_b, r_b)`` in [0, 2].

    Both arguments must be unit vectors expressed in body axes.
    """
    _require_unit_vec(boresight_body, "boresight_body")
    _require_unit_vec(target_body, "target_body")
    return 1.0 - float(np.dot(boresight_body, target_body))


def reduced_error_rate(boresight_body: np.ndarray, target_body: np.ndarray,
                       omega: np.ndarray) -> float:
    """Time derivative of the pointing error, ``-B_b . (r_b x omega)``.

    Follows from ``r_b_dot = -omega x r_b`` for a body-fixed boresight and an
    inertially fixed target direction.
    """
    _require_unit_vec(boresight_body, "boresight_body")
    _require_unit_vec(target_body, "target_body")
    rx, ry, rz = float(target_body[0]), float(target_body[1]), float(target_body[2])
    wx, wy, wz = float(omega[0]), float(omega[1]), float(omega[2])
    cx = ry * wz - rz * wy
    cy = rz * wx - rx * wz
    cz = rx * wy - ry * wx
    return -(float(boresight_body[0]) * cx
             + float(boresight_body[1]) * cy
             + float(boresight_body[2]) * cz)


def attitude_kinematics_rhs(q: UnitQuaternion, omega: np.ndarray) -> np.ndarray:
    """Quaternion rate ``0.5 * q [omega, 0]`` as a raw 4-vector [x, y, z, w].

    The result is a tangent vector, not a unit quaternion; integrators must
    renormalize after stepping.
    """
    wx, wy, wz = float(omega[0]), float(omega[1]), float(omega[2])
    dx, dy, dz, dw = _quat_mul(q.x, q.y, q.z, q.w, wx, wy, wz, 0.0)
    return np.array([0.5 * dx, 0.5 * dy, 0.5 * dz, 0.5 * dw])


def dynamics_rhs(state: BodyState, torque: np.ndarray, disturbance: np.ndarray,
                 params: SpacecraftParams) -> np.ndarray:
    """Euler rigid-body rate dynamics ``J w_dot = -w x (J w) + u + d``."""
    w = state.omega
    jw = params.inertia @ w
    gyro = np.array([
        w[1] * jw[2] - w[2] * jw[1],
        w[2] * jw[0] - w[0] * jw[2],
        w[0] * jw[1] - w[1] * jw[0],
    ])
    return params.inertia_inv @ (-gyro + np.asarray(torque, dtype=float)
                                 + np.asarray(disturbance, dtype=float))
