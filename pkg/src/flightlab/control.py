"""Both action interfaces over the simulator.

The thrust-vector route decodes (thrust fraction, desired roll, desired
pitch) and feeds an attitude PID plus mixer; the baseline route decodes
four normalized RPM offsets around hover directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    MotorCommand,
    QuadParams,
    QuadState,
    _PITCH_SIGNS,
    _ROLL_SIGNS,
    _YAW_SIGNS,
    euler_angles,
    wrap_angle,
)


@dataclass(frozen=True)
class ThrustVectorAction:
    """Raw agent output: (u_raw, roll_raw, pitch_raw), each in [-1, 1]."""

    u_raw: float
    roll_raw: float
    pitch_raw: float

    @classmethod
    def from_array(cls, a) -> "ThrustVectorAction":
        a = np.asarray(a, dtype=np.float64)
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class RpmAction:
    """Raw agent output: four normalized rotor offsets, each in [-1, 1]."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values.shape != (4,):
            raise ValueError("RpmAction needs exactly 4 components")

    @classmethod
    def from_array(cls, a) -> "RpmAction":
        return cls(np.asarray(a, dtype=np.float64))


ControlAction = ThrustVectorAction | RpmAction


@dataclass(frozen=True)
class AttitudeSetpoint:
    """Inner-loop reference: thrust fraction of maximum plus desired angles."""

    thrust_fraction: float   # in [0, 1] of 4*kf*rpm_max^2
    roll: float              # rad, |roll| <= 1
    pitch: float             # rad, |pitch| <= 1
    yaw: float               # rad, in (-pi, pi]; held, never commanded by the agent


@dataclass(frozen=True)
class PidGains:
    """Per-axis (roll, pitch, yaw) PID gains, torque per rad.

    The derivative term acts on measured body rates, not on error
    differences, so setpoint jumps at the agent rate cause no kick.
    """

    kp: tuple[float, float, float] = (6.0e-3, 6.0e-3, 2.0e-3)
    ki: tuple[float, float, float] = (1.0e-3, 1.0e-3, 0.0)
    kd: tuple[float, float, float] = (6.0e-4, 6.0e-4, 4.0e-4)
    integrator_clamp: tuple[float, float, float] = (0.5, 0.5, 0.5)  # rad s

    def __post_init__(self):
        if any(k <= 0 for k in self.kp):
            raise ValueError("kp must be positive on every axis")
        if any(k < 0 for k in self.ki) or any(k < 0 for k in self.kd):
            raise ValueError("ki and kd must be >= 0")
        if any(c <= 0 for c in self.integrator_clamp):
            raise ValueError("integrator clamp must be positive")


@dataclass
class PidState:
    """Integrators and previous angle errors, threaded by the caller."""

    integral: np.ndarray
    prev_error: np.ndarray

    @classmethod
    def zero(cls) -> "PidState":
        return cls(integral=np.zeros(3), prev_error=np.zeros(3))


def decode_thrust_vector_action(action: ThrustVectorAction, current_yaw: float) -> AttitudeSetpoint:
    """Map raw [-1, 1] outputs to an attitude setpoint.

    Thrust fraction is (u+1)/2 of maximum total thrust; roll/pitch raws
    are already radians bounded to [-1, 1]; yaw is held at the current
    heading.
    """
    u = min(max(float(action.u_raw), -1.0), 1.0)
    roll = min(max(float(action.roll_raw), -1.0), 1.0)
    pitch = min(max(float(action.pitch_raw), -1.0), 1.0)
    return AttitudeSetpoint(
        thrust_fraction=(u + 1.0) / 2.0,
        roll=roll,
        pitch=pitch,
        yaw=wrap_angle(float(current_yaw)),
    )


def decode_rpm_action(action: RpmAction, params: QuadParams, scale: float = 0.05) -> MotorCommand:
    """Map raw [-1, 1] outputs to rotor speeds in a band around hover.

    rpm_i = hover_rpm * (1 + scale * a_i), clamped to actuator limits.
    """
    a = np.clip(action.values, -1.0, 1.0)
    rpm = params.hover_rpm * (1.0 + scale * a)
    return MotorCommand(np.clip(rpm, params.rpm_min, params.rpm_max))


def allocate_rpm_squared(thrust: float, torques: np.ndarray, params: QuadParams) -> np.ndarray:
    """Exact inverse of rotor_forces: per-rotor rpm^2 before clamping.

    Solves the 4x4 allocation (thrust, tau_x, tau_y, tau_z) -> rpm^2 for
    the X geometry. Entries may be negative when the request is
    infeasible.
    """
    kf = params.thrust_coeff
    d = params.arm_length / math.sqrt(2.0)
    b_t = thrust / (4.0 * kf)
    b_x = torques[0] / (4.0 * kf * d)
    b_y = torques[1] / (4.0 * kf * d)
    b_z = torques[2] / (4.0 * params.torque_coeff)
    # rows of the forward map per motor: [1, rx, py, yz] with the sign tables
    return (
        b_t
        + _ROLL_SIGNS * b_x
        + _PITCH_SIGNS * b_y
        + _YAW_SIGNS * b_z
    )


def mix_to_rpms(thrust: float, torques: np.ndarray, params: QuadParams) -> tuple[MotorCommand, bool]:
    """Allocate (thrust, torques) to rotor speeds.

    Returns (command, saturated). When any rpm^2 falls outside the
    actuator envelope the output is clamped and saturated=True; the
    request is then not met exactly.
    """
    if thrust < 0:
        raise ValueError("thrust must be >= 0")
    rpm_sq = allocate_rpm_squared(thrust, np.asarray(torques, dtype=np.float64), params)
    lo, hi = params.rpm_min**2, params.rpm_max**2
    saturated = bool((rpm_sq < lo - 1e-12).any() or (rpm_sq > hi + 1e-12).any())
    rpm = np.sqrt(np.clip(rpm_sq, lo, hi))
    return MotorCommand(rpm), saturated


def attitude_pid_step(
    state: QuadState,
    setpoint: AttitudeSetpoint,
    gains: PidGains,
    pid_state: PidState,
    dt: float,
    params: QuadParams,
) -> tuple[MotorCommand, PidState]:
    """One PID evaluation: angle errors -> body torques -> rotor speeds.

    Yaw error is wrapped into (-pi, pi]. The derivative term is rate
    feedback (-kd * omega). Integrators are clamped per axis.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    roll, pitch, yaw = euler_angles(state)
    error = np.array(
        [
            setpoint.roll - roll,
            setpoint.pitch - pitch,
            wrap_angle(setpoint.yaw - yaw),
        ]
    )
    clamp = np.asarray(gains.integrator_clamp)
    integral = np.clip(pid_state.integral + error * dt, -clamp, clamp)

    torques = (
        np.asarray(gains.kp) * error
        + np.asarray(gains.ki) * integral
        - np.asarray(gains.kd) * state.angular_velocity
    )
    thrust = setpoint.thrust_fraction * params.max_total_thrust
    cmd, _ = mix_to_rpms(thrust, torques, params)
    return cmd, PidState(integral=integral, prev_error=error)
