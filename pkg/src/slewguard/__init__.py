"""Spacecraft attitude pointing control with keep-out cone avoidance.

The package couples a reduced-attitude rigid-body simulator with a switching
controller that blends a shrinking-funnel tracking law and an artificial
potential field, so a body-fixed boresight reaches an inertial target
direction without ever entering configured forbidden cones.
"""

__version__ = "0.1.0"

from .attitude import (
    BodyState,
    SpacecraftParams,
    UnitQuaternion,
    attitude_kinematics_rhs,
    dynamics_rhs,
    pointing_error,
    reduced_error_rate,
    rotate_to_body,
)
from .potential import (
    BridgeShape,
    ObstacleCone,
    attraction,
    bridge,
    bridge_grad,
    repulsion,
    repulsion_grad_beta,
    total_potential,
)
from .envelope import (
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
from .controller import (
    ControllerConfig,
    TdState,
    ValidationReport,
    benchmark_apf_law,
    min_sin_theta_d,
    td_rhs,
    td_step,
    torque_law,
    validate_config,
    virtual_law,
)
from .engine import (
    SimConfig,
    SimulationAbort,
    SimulationResult,
    TrajectoryRecord,
    coupled_rhs,
    disturbance_torque,
    lyapunov_monitor,
    run_scenario,
    write_summary_json,
    write_trajectory_csv,
)
from .scenario import (
    Scenario,
    ScenarioError,
    list_presets,
    load_preset,
    load_scenario,
)
