"""Attractive/repulsive potential shaping over the pointing sphere.

The attractive well is linear in the pointing error.  Each forbidden cone
contributes a repulsive term that is zero while the boresight is far from the
cone, a plateau once it is close, and a smooth monotone bridge in between.
The bridge is a tanh of a rational argument that blows up at both knots, so
the piecewise function is continuous with flat tangencies at the ends:

    bridge(beta) = 0                                             beta <  lo
                 = scale/2 * (tanh(k*(beta-mid)/sqrt((beta-lo)*(hi-beta))) + 1)
                                                                 lo <= beta < hi
                 = scale                                         beta >= hi

``beta`` is the cosine of the angle between the boresight and the cone axis,
so larger beta means deeper into the cone.  The same bridge template, with
unit scale, is reused by the mode-switching logic in :mod:`slewguard.envelope`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "BridgeShape",
    "ObstacleCone",
    "bridge",
    "bridge_grad",
    "attraction",
    "repulsion",
    "repulsion_grad_beta",
    "total_potential",
]

# Within this distance of a knot the limit value is returned directly; the
# tanh argument is already saturated far beyond double precision there.
_KNOT_GUARD = 1e-12


@dataclass(frozen=True)
class BridgeShape:
    """Knots and steepness of one tanh bridge on the cosine axis.

    ``lo`` and ``hi`` are the outer and inner knots (cosines, lo < hi),
    ``mid`` the centering point, and ``steepness`` the coefficient k of the
    tanh argument.  Larger k makes the transition sharper around ``mid``.
    """

    lo: float
    hi: float
    mid: float
    steepness: float

    def __post_init__(self):
        if not (self.lo < self.mid < self.hi):
            raise ValueError("bridge knots must satisfy lo < mid < hi")
        if self.steepness <= 0.0:
            raise ValueError("bridge steepness must be positive")


def bridge(shape: BridgeShape, beta: float, scale: float = 1.0) -> float:
    """Evaluate the bridge at cosine ``beta``, ranging over [0, scale].

    Repulsion terms pass ``scale=k_r`` with steepness ``r*(hi-lo)/k_r``;
    the switching functions pass unit scale with steepness ``m*(hi-lo)``.
    """
    if beta < shape.lo + _KNOT_GUARD:
        return 0.0
    if beta > shape.hi - _KNOT_GUARD:
        return scale
    root = math.sqrt((beta - shape.lo) * (shape.hi - beta))
    arg = shape.steepness * (beta - shape.mid) / root
    return 0.5 * scale * (math.tanh(arg) + 1.0)


def bridge_grad(shape: BridgeShape, beta: float, scale: float = 1.0) -> float:
    """Analytic d(bridge)/d(beta); zero outside the open knot interval."""
    if beta < shape.lo + _KNOT_GUARD or beta > shape.hi - _KNOT_GUARD:
        return 0.0
    d = (beta - shape.lo) * (shape.hi - beta)
    root = math.sqrt(d)
    arg = shape.steepness * (beta - shape.mid) / root
    # d(arg)/d(beta) = k * (d - (beta-mid)*(lo+hi-2 beta)/2) / d^(3/2)
    darg = shape.steepness * (d - 0.5 * (beta - shape.mid)
                              * (shape.lo + shape.hi - 2.0 * beta)) / (d * root)
    # sech^2 via exp(-|arg|) to stay finite for saturated arguments
    e = math.exp(-abs(arg))
    sech = 2.0 * e / (1.0 + e * e)
    return 0.5 * scale * sech * sech * darg


@dataclass(frozen=True)
class ObstacleCone:
    """One forbidden cone: inertial axis plus angular layout and field gains.

    Angles in radians: ``theta_f`` is the hard forbidden half-angle,
    ``theta_1`` the inner buffer edge where the repulsion plateaus, and
    ``theta_0`` the outer onset, with theta_0 > theta_1 >= theta_f.  ``k_r``
    is the plateau height and ``r_slope`` the designed mid-bridge slope of
    the repulsion with respect to the cosine.
    """

    axis_inertial: np.ndarray
    theta_f: float
    theta_0: float
    theta_1: float
    k_r: float
    r_slope: float
    shape: BridgeShape = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        axis = np.asarray(self.axis_inertial, dtype=float)
        if axis.shape != (3,):
            raise ValueError("axis_inertial must have shape (3,)")
        n = float(np.linalg.norm(axis))
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"axis_inertial must be unit, got norm {n:.9e}")
        if not (self.theta_0 > self.theta_1 >= self.theta_f > 0.0):
            raise ValueError("cone angles must satisfy "
                             "theta_0 > theta_1 >= theta_f > 0")
        if self.theta_0 >= math.pi:
            raise ValueError("theta_0 must be below pi")
        if self.k_r <= 0.0 or self.r_slope <= 0.0:
            raise ValueError("k_r and r_slope must be positive")
        lo = math.cos(self.theta_0)
        hi = math.cos(self.theta_1)
        object.__setattr__(self, "axis_inertial", axis / n)
        object.__setattr__(self, "shape", BridgeShape(
            lo=lo, hi=hi, mid=0.5 * (lo + hi),
            steepness=self.r_slope * (hi - lo) / self.k_r))


def attraction(x_e: float, k_a: float) -> float:
    """Attractive potential ``k_a * x_e``, linear in the pointing error."""
    if k_a <= 0.0:
        raise ValueError("k_a must be positive")
    return k_a * x_e


def repulsion(cone: ObstacleCone, beta: float) -> float:
    """Repulsive potential of one cone at boresight-axis cosine ``beta``."""
    return bridge(cone.shape, beta, cone.k_r)


def repulsion_grad_beta(cone: ObstacleCone, beta: float) -> float:
    """Analytic d(repulsion)/d(beta); nonnegative, zero outside the bridge."""
    return bridge_grad(cone.shape, beta, cone.k_r)


def total_potential(x_e: float, k_a: float,
                    cone_betas: Sequence[tuple[ObstacleCone, float]]) -> float:
    """Attraction plus the sum of all cone repulsions."""
    total = attraction(x_e, k_a)
    for cone, beta in cone_betas:
        total += repulsion(cone, beta)
    return total
