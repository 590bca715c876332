"""Rigid-body quadrotor simulator in an X configuration.

World frame: x forward, y left, z up; gravity acts along -z.
Body frame coincides with the world frame at identity attitude.
Orientation is a unit quaternion (w, x, y, z) rotating body vectors
into the world frame.

Motor order is (front-right, back-left, front-left, back-right).
The FR/BL diagonal pair spins one way, FL/BR the other, so yaw
reaction torques are km*(-w1^2 - w2^2 + w3^2 + w4^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class NonFiniteState(Exception):
    """Integration produced a non-finite state component (blow-up)."""


@dataclass(frozen=True)
class QuadParams:
    """Physical vehicle parameters (Crazyflie-2 class by default)."""

    mass: float = 0.027                 # kg
    inertia: tuple[float, float, float] = (1.4e-5, 1.4e-5, 2.17e-5)  # kg m^2, diagonal
    arm_length: float = 0.0397          # m, hub to rotor
    thrust_coeff: float = 3.16e-10      # N / RPM^2
    torque_coeff: float = 7.94e-12      # N m / RPM^2
    rpm_min: float = 0.0
    rpm_max: float = 21_700.0
    gravity: float = 9.81               # m / s^2
    physics_dt: float = 0.005           # s
    motor_lag: float = 0.0              # s, first-order RPM time constant; 0 disables

    def __post_init__(self):
        if self.mass <= 0 or self.arm_length <= 0:
            raise ValueError("mass and arm_length must be positive")
        if any(i <= 0 for i in self.inertia):
            raise ValueError("inertia diagonal must be positive")
        if self.thrust_coeff <= 0 or self.torque_coeff <= 0:
            raise ValueError("thrust_coeff and torque_coeff must be positive")
        if self.rpm_min < 0 or self.rpm_min >= self.rpm_max:
            raise ValueError("need 0 <= rpm_min < rpm_max")
        if self.gravity <= 0 or self.physics_dt <= 0:
            raise ValueError("gravity and physics_dt must be positive")
        if self.motor_lag < 0:
            raise ValueError("motor_lag must be >= 0")

    @property
    def hover_rpm(self) -> float:
        """Rotor speed at which total thrust equals weight: sqrt(mg / 4kf)."""
        return math.sqrt(self.mass * self.gravity / (4.0 * self.thrust_coeff))

    @property
    def max_total_thrust(self) -> float:
        return 4.0 * self.thrust_coeff * self.rpm_max**2


@dataclass(frozen=True)
class QuadState:
    """Full rigid-body state: pose + twist."""

    position: np.ndarray          # (3,) m, world frame
    velocity: np.ndarray          # (3,) m/s, world frame
    orientation: np.ndarray       # (4,) unit quaternion (w, x, y, z), world <- body
    angular_velocity: np.ndarray  # (3,) rad/s, body frame

    @classmethod
    def at_rest(cls, position=(0.0, 0.0, 1.0)) -> "QuadState":
        """Level attitude, zero twist, at the given position."""
        return cls(
            position=np.asarray(position, dtype=np.float64).copy(),
            velocity=np.zeros(3),
            orientation=np.array([1.0, 0.0, 0.0, 0.0]),
            angular_velocity=np.zeros(3),
        )

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.position).all()
            and np.isfinite(self.velocity).all()
            and np.isfinite(self.orientation).all()
            and np.isfinite(self.angular_velocity).all()
        )


@dataclass(frozen=True)
class MotorCommand:
    """Four rotor speeds in RPM, ordered (front-right, back-left, front-left, back-right)."""

    rpm: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rpm", np.asarray(self.rpm, dtype=np.float64))
        if self.rpm.shape != (4,):
            raise ValueError("MotorCommand needs exactly 4 rpm values")

    def clamped(self, params: QuadParams) -> "MotorCommand":
        return MotorCommand(np.clip(self.rpm, params.rpm_min, params.rpm_max))


# ---------------------------------------------------------------------------
# quaternion helpers


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix (world <- body) of a unit quaternion."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_euler(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Quaternion for intrinsic Z-Y-X (yaw, pitch, roll) angles."""
    cr, sr = math.cos(roll / 2), math.sin(roll / 2)
    cp, sp = math.cos(pitch / 2), math.sin(pitch / 2)
    cy, sy = math.cos(yaw / 2), math.sin(yaw / 2)
    qz = np.array([cy, 0.0, 0.0, sy])
    qy = np.array([cp, 0.0, sp, 0.0])
    qx = np.array([cr, sr, 0.0, 0.0])
    return quat_multiply(quat_multiply(qz, qy), qx)


def wrap_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def euler_angles(state_or_quat) -> tuple[float, float, float]:
    """Intrinsic Z-Y-X (roll, pitch, yaw) angles of the attitude.

    roll, yaw in (-pi, pi]; pitch in [-pi/2, pi/2]. At gimbal lock
    (|pitch| = pi/2) roll is set to 0 and the remaining rotation is
    folded into yaw.
    """
    q = state_or_quat.orientation if isinstance(state_or_quat, QuadState) else state_or_quat
    r = quat_to_matrix(quat_normalize(np.asarray(q, dtype=np.float64)))
    sin_pitch = -r[2, 0]
    if abs(sin_pitch) >= 1.0 - 1e-12:
        # gimbal lock: only yaw -/+ roll is observable
        pitch = math.copysign(math.pi / 2.0, sin_pitch)
        roll = 0.0
        if sin_pitch > 0.0:
            yaw = -math.atan2(r[0, 1], r[0, 2])
        else:
            yaw = math.atan2(-r[0, 1], -r[0, 2])
    else:
        pitch = math.asin(sin_pitch)
        roll = math.atan2(r[2, 1], r[2, 2])
        yaw = math.atan2(r[1, 0], r[0, 0])
    return wrap_angle(roll), pitch, wrap_angle(yaw)


# ---------------------------------------------------------------------------
# forces and integration

# yaw reaction signs per motor: FR/BL diagonal spins opposite to FL/BR
_YAW_SIGNS = np.array([-1.0, -1.0, 1.0, 1.0])
# moment-arm signs for roll (about x, +y motors raise tau_x) and pitch (about y)
_ROLL_SIGNS = np.array([-1.0, 1.0, 1.0, -1.0])
_PITCH_SIGNS = np.array([-1.0, 1.0, -1.0, 1.0])


def rotor_forces(cmd: MotorCommand, params: QuadParams) -> tuple[float, np.ndarray]:
    """Total body-z thrust [N] and body torques [N m] for a motor command.

    Per-rotor thrust is kf * rpm^2; roll/pitch arms are arm_length/sqrt(2)
    (X configuration); yaw torque is the sum of signed reaction torques
    km * rpm^2.
    """
    rpm = np.clip(cmd.rpm, params.rpm_min, params.rpm_max)
    rpm_sq = rpm * rpm
    f = params.thrust_coeff * rpm_sq
    d = params.arm_length / math.sqrt(2.0)
    torques = np.array(
        [
            d * float(_ROLL_SIGNS @ f),
            d * float(_PITCH_SIGNS @ f),
            params.torque_coeff * float(_YAW_SIGNS @ rpm_sq),
        ]
    )
    return float(f.sum()), torques


def step_dynamics(state: QuadState, cmd: MotorCommand, params: QuadParams) -> QuadState:
    """Advance one physics_dt with Newton-Euler equations.

    Translation uses the trapezoidal update (exact under constant
    acceleration); rotation is semi-implicit Euler with the gyroscopic
    term omega x I omega, followed by quaternion renormalization.

    Raises NonFiniteState if the result blows up.
    """
    dt = params.physics_dt
    thrust, torques = rotor_forces(cmd, params)

    rot = quat_to_matrix(state.orientation)
    accel = rot[:, 2] * (thrust / params.mass)
    accel = accel - np.array([0.0, 0.0, params.gravity])

    velocity = state.velocity + accel * dt
    position = state.position + state.velocity * dt + 0.5 * accel * dt * dt

    inertia = np.asarray(params.inertia)
    omega = state.angular_velocity
    omega_dot = (torques - np.cross(omega, inertia * omega)) / inertia
    omega_new = omega + omega_dot * dt

    dq = 0.5 * quat_multiply(state.orientation, np.array([0.0, *omega_new]))
    orientation = quat_normalize(state.orientation + dq * dt)

    new = QuadState(position, velocity, orientation, omega_new)
    if not new.is_finite():
        raise NonFiniteState("dynamics produced a non-finite state")
    return new
