"""Episodic tracking/stabilization environment at 50 Hz.

Observations are the 12-vector (roll, pitch, yaw, vx, vy, vz, wx, wy,
wz, dx, dy, dz) with d = target - position. The dense reward is
1/(a*d) + a/sqrt(2*pi*sigma^2) * exp(-0.5*(d/sigma)^2) on the clamped
Euclidean position error d.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .control import (
    AttitudeSetpoint,
    ControlAction,
    PidGains,
    PidState,
    RpmAction,
    ThrustVectorAction,
    attitude_pid_step,
    decode_rpm_action,
    decode_thrust_vector_action,
)
from .dynamics import (
    MotorCommand,
    NonFiniteState,
    QuadParams,
    QuadState,
    euler_angles,
    step_dynamics,
)

OBSERVATION_DIM = 12
STABILIZE_TARGET = (0.0, 0.0, 1.0)


class EpisodeStatus(enum.Enum):
    RUNNING = "running"
    MAX_STEPS = "max_steps"
    CRASHED = "crashed"
    OUT_OF_BOUNDS = "out_of_bounds"
    NON_FINITE = "non_finite"

    @property
    def terminal(self) -> bool:
        return self is not EpisodeStatus.RUNNING

    @property
    def failure(self) -> bool:
        """Physical failure (true terminal for bootstrapping); timeouts are not."""
        return self in (EpisodeStatus.CRASHED, EpisodeStatus.OUT_OF_BOUNDS, EpisodeStatus.NON_FINITE)


class Task(enum.Enum):
    STABILIZE = "stabilize"       # fixed target (0, 0, 1), random start
    TRACK_RANDOM = "track_random"  # random target each episode, random start


class EpisodeFinished(Exception):
    """step() called after the episode reached a terminal status."""


@dataclass(frozen=True)
class RewardParams:
    a: float = 7.0
    sigma: float = 0.5
    distance_floor: float = 1e-3  # keeps the rational term bounded at the target

    def __post_init__(self):
        if self.a <= 0 or self.sigma <= 0 or self.distance_floor <= 0:
            raise ValueError("reward parameters must be positive")


@dataclass(frozen=True)
class EnvConfig:
    agent_frequency: float = 50.0   # Hz
    max_steps: int = 502
    bounds_min: tuple[float, float, float] = (-3.0, -3.0, 0.0)
    bounds_max: tuple[float, float, float] = (3.0, 3.0, 3.0)
    init_min: tuple[float, float, float] = (-1.5, -1.5, 0.5)
    init_max: tuple[float, float, float] = (1.5, 1.5, 1.5)
    target_min: tuple[float, float, float] = (-1.5, -1.5, 0.5)
    target_max: tuple[float, float, float] = (1.5, 1.5, 1.5)
    crash_altitude: float = 0.02    # m
    attitude_abort: float = 1.2     # rad, |roll| or |pitch| beyond this aborts
    crash_penalty: float = -50.0    # replaces the reward on a failure transition

    def __post_init__(self):
        if self.agent_frequency <= 0 or self.max_steps <= 0:
            raise ValueError("agent_frequency and max_steps must be positive")
        lo, hi = np.asarray(self.bounds_min), np.asarray(self.bounds_max)
        if not (lo < hi).all():
            raise ValueError("flight bounds must be a non-degenerate box")
        for name in ("init", "target"):
            rlo = np.asarray(getattr(self, f"{name}_min"))
            rhi = np.asarray(getattr(self, f"{name}_max"))
            if not ((rlo <= rhi).all() and (rlo >= lo).all() and (rhi <= hi).all()):
                raise ValueError(f"{name} range must lie inside the flight bounds")
        if self.attitude_abort <= 0:
            raise ValueError("attitude_abort must be positive")


def observe(state: QuadState, target: np.ndarray) -> np.ndarray:
    """Build the 12-element observation vector."""
    roll, pitch, yaw = euler_angles(state)
    delta = np.asarray(target, dtype=np.float64) - state.position
    out = np.empty(OBSERVATION_DIM)
    out[0:3] = (roll, pitch, yaw)
    out[3:6] = state.velocity
    out[6:9] = state.angular_velocity
    out[9:12] = delta
    return out


def reward(delta: np.ndarray, params: RewardParams) -> float:
    """Dense reward on the clamped Euclidean position error."""
    d = max(float(np.linalg.norm(np.asarray(delta, dtype=np.float64))), params.distance_floor)
    gauss = params.a / math.sqrt(2.0 * math.pi * params.sigma**2)
    return 1.0 / (params.a * d) + gauss * math.exp(-0.5 * (d / params.sigma) ** 2)


def terminal_status(state: QuadState, step: int, cfg: EnvConfig) -> EpisodeStatus:
    """Evaluate termination rules; precedence NonFinite > Crashed > OutOfBounds > MaxSteps."""
    if not state.is_finite():
        return EpisodeStatus.NON_FINITE
    roll, pitch, _ = euler_angles(state)
    if state.position[2] < cfg.crash_altitude or abs(roll) > cfg.attitude_abort or abs(pitch) > cfg.attitude_abort:
        return EpisodeStatus.CRASHED
    if (state.position < np.asarray(cfg.bounds_min)).any() or (state.position > np.asarray(cfg.bounds_max)).any():
        return EpisodeStatus.OUT_OF_BOUNDS
    if step >= cfg.max_steps:
        return EpisodeStatus.MAX_STEPS
    return EpisodeStatus.RUNNING


class QuadEnv:
    """One episodic environment instance. Single-threaded; seed via reset(rng)."""

    def __init__(
        self,
        quad: QuadParams = QuadParams(),
        cfg: EnvConfig = EnvConfig(),
        reward_params: RewardParams = RewardParams(),
        gains: PidGains = PidGains(),
        task: Task = Task.STABILIZE,
        rpm_action_scale: float = 0.05,
    ):
        n_sub = 1.0 / (cfg.agent_frequency * quad.physics_dt)
        if abs(n_sub - round(n_sub)) > 1e-9:
            raise ValueError("physics_dt must divide the agent period exactly")
        self.substeps = int(round(n_sub))
        self.quad = quad
        self.cfg = cfg
        self.reward_params = reward_params
        self.gains = gains
        self.task = task
        self.rpm_action_scale = rpm_action_scale

        self.state: QuadState | None = None
        self.target = np.zeros(3)
        self.step_count = 0
        self.status = EpisodeStatus.RUNNING
        self._pid = PidState.zero()
        self._motor_rpm: np.ndarray | None = None  # first-order motor filter state

    @property
    def agent_dt(self) -> float:
        return 1.0 / self.cfg.agent_frequency

    def reset(self, rng: np.random.Generator, initial_position=None, target=None) -> np.ndarray:
        """Start a new episode; returns the initial observation."""
        if initial_position is None:
            lo, hi = np.asarray(self.cfg.init_min), np.asarray(self.cfg.init_max)
            initial_position = rng.uniform(lo, hi)
        if target is None:
            if self.task is Task.STABILIZE:
                target = np.asarray(STABILIZE_TARGET)
            else:
                lo, hi = np.asarray(self.cfg.target_min), np.asarray(self.cfg.target_max)
                target = rng.uniform(lo, hi)
        self.state = QuadState.at_rest(initial_position)
        self.target = np.asarray(target, dtype=np.float64).copy()
        self.step_count = 0
        self.status = EpisodeStatus.RUNNING
        self._pid = PidState.zero()
        self._motor_rpm = None
        return observe(self.state, self.target)

    def set_target(self, target) -> None:
        """Move the reference point (used for path following)."""
        self.target = np.asarray(target, dtype=np.float64).copy()

    def _apply_motor_lag(self, cmd: MotorCommand) -> MotorCommand:
        if self.quad.motor_lag <= 0.0:
            return cmd
        if self._motor_rpm is None:
            self._motor_rpm = cmd.rpm.copy()
            return cmd
        alpha = self.quad.physics_dt / self.quad.motor_lag
        self._motor_rpm = self._motor_rpm + min(alpha, 1.0) * (cmd.rpm - self._motor_rpm)
        return MotorCommand(self._motor_rpm.copy())

    def step(self, action: ControlAction) -> tuple[np.ndarray, float, EpisodeStatus]:
        """Advance one agent period (substeps of physics, PID in the loop
        for thrust-vector actions). Returns (observation, reward, status)."""
        if self.status.terminal:
            raise EpisodeFinished(f"episode already ended with {self.status.value}")
        assert self.state is not None, "reset() must be called first"

        setpoint: AttitudeSetpoint | None = None
        fixed_cmd: MotorCommand | None = None
        if isinstance(action, ThrustVectorAction):
            _, _, yaw = euler_angles(self.state)
            setpoint = decode_thrust_vector_action(action, yaw)
        elif isinstance(action, RpmAction):
            fixed_cmd = decode_rpm_action(action, self.quad, self.rpm_action_scale)
        else:
            raise TypeError(f"unsupported action type {type(action)!r}")

        state = self.state
        try:
            for _ in range(self.substeps):
                if setpoint is not None:
                    cmd, self._pid = attitude_pid_step(
                        state, setpoint, self.gains, self._pid, self.quad.physics_dt, self.quad
                    )
                else:
                    cmd = fixed_cmd
                state = step_dynamics(state, self._apply_motor_lag(cmd), self.quad)
        except NonFiniteState:
            # keep the last finite state as s'; the episode is over either way
            self.step_count += 1
            self.status = EpisodeStatus.NON_FINITE
            return observe(state, self.target), self.cfg.crash_penalty, self.status

        self.state = state
        self.step_count += 1
        self.status = terminal_status(state, self.step_count, self.cfg)
        if self.status.failure:
            r = self.cfg.crash_penalty
        else:
            r = reward(self.target - state.position, self.reward_params)
        return observe(state, self.target), r, self.status
