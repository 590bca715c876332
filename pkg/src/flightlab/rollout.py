"""Deterministic rollouts of a trained agent: fixed-target evaluation
episodes and moving-reference path following."""

from __future__ import annotations

import math

import numpy as np

from .control import RpmAction, ThrustVectorAction
from .dynamics import euler_angles
from .env import EpisodeStatus, QuadEnv, observe
from .metrics import Mode, TrackingMetrics, TrajectoryLog, compute_metrics
from .paths import PathSpec, sample_path
from .sac import SacAgent


def _to_action(raw: np.ndarray, act_dim: int):
    if act_dim == 3:
        return ThrustVectorAction.from_array(raw)
    if act_dim == 4:
        return RpmAction.from_array(raw)
    raise ValueError(f"unsupported action dimension {act_dim}")


def run_episode(
    agent: SacAgent,
    env: QuadEnv,
    rng: np.random.Generator,
    initial_position=None,
    target=None,
) -> tuple[TrajectoryLog, float]:
    """One deterministic-policy episode; returns (log, total reward).

    The reference column holds the (fixed) target, so the log feeds
    step-response metrics directly.
    """
    obs = env.reset(rng, initial_position=initial_position, target=target)
    n_max = env.cfg.max_steps
    act_dim = agent.act_dim
    dt = env.agent_dt

    t = [0.0]
    ref = [env.target.copy()]
    pos = [env.state.position.copy()]
    euler = [np.asarray(euler_angles(env.state))]
    actions = []
    total = 0.0
    status = EpisodeStatus.RUNNING
    for k in range(n_max):
        raw = agent.deterministic_action(obs)
        actions.append(np.asarray(raw, dtype=np.float64))
        obs, r, status = env.step(_to_action(raw, act_dim))
        total += r
        t.append((k + 1) * dt)
        ref.append(env.target.copy())
        pos.append(env.state.position.copy())
        euler.append(np.asarray(euler_angles(env.state)))
        if status.terminal:
            break
    actions.append(np.full(act_dim, np.nan))  # no action taken from the last state

    log = TrajectoryLog(
        t=np.asarray(t),
        ref=np.asarray(ref),
        pos=np.asarray(pos),
        euler=np.asarray(euler),
        actions=np.asarray(actions),
        status=status,
        complete=not status.failure,
    )
    return log, total


def follow_path(agent: SacAgent, spec: PathSpec, env: QuadEnv) -> TrajectoryLog:
    """Drive the position-tracking policy along a moving reference.

    At every 50 Hz step the observation target is sample_path(spec, t);
    the quadrotor starts at rest on the path start point. On a failure
    the log is truncated at the failure step and flagged.
    """
    dt = env.agent_dt
    n_steps = int(round(spec.duration / dt))
    if abs(n_steps * dt - spec.duration) > 1e-9:
        raise ValueError("path duration must be a multiple of the agent period")
    if env.cfg.max_steps < n_steps:
        raise ValueError(
            f"env max_steps {env.cfg.max_steps} cannot cover {n_steps} path steps"
        )

    start = sample_path(spec, 0.0)
    env.reset(np.random.default_rng(0), initial_position=start, target=start)

    t = [0.0]
    ref = [start.copy()]
    pos = [env.state.position.copy()]
    euler = [np.asarray(euler_angles(env.state))]
    actions = []
    status = EpisodeStatus.RUNNING
    for k in range(n_steps):
        tk = k * dt
        point = sample_path(spec, min(tk, spec.duration))
        env.set_target(point)
        ref[-1] = point  # the observation the agent acts on references t_k
        obs = observe(env.state, env.target)
        raw = agent.deterministic_action(obs)
        actions.append(np.asarray(raw, dtype=np.float64))
        _, _, status = env.step(_to_action(raw, agent.act_dim))
        t.append((k + 1) * dt)
        ref.append(sample_path(spec, min((k + 1) * dt, spec.duration)))
        pos.append(env.state.position.copy())
        euler.append(np.asarray(euler_angles(env.state)))
        if status.failure:
            break
    actions.append(np.full(agent.act_dim, np.nan))

    finished = len(t) == n_steps + 1
    return TrajectoryLog(
        t=np.asarray(t),
        ref=np.asarray(ref),
        pos=np.asarray(pos),
        euler=np.asarray(euler),
        actions=np.asarray(actions),
        status=status if status.terminal else EpisodeStatus.MAX_STEPS,
        complete=finished and not status.failure,
    )


def _observe_current(env: QuadEnv) -> np.ndarray:
    from .env import observe

    return observe(env.state, env.target)


def evaluate(
    agent: SacAgent,
    env_factory,
    episodes: int,
    seed: int,
    initial_position=None,
    target=None,
) -> list[tuple[TrajectoryLog, TrackingMetrics, float]]:
    """Run deterministic eval episodes with per-episode reset draws.

    env_factory() builds a fresh environment; episode k resets with the
    generator seeded by (seed, k) so results do not depend on episode
    order.
    """
    results = []
    for k in range(episodes):
        env = env_factory()
        rng = np.random.default_rng([seed, k])
        log, total = run_episode(agent, env, rng, initial_position=initial_position, target=target)
        metrics = compute_metrics(log, Mode.STEP_RESPONSE)
        results.append((log, metrics, total))
    return results


def final_error(log: TrajectoryLog) -> float:
    """Distance between the last position and the last reference point."""
    return float(np.linalg.norm(log.ref[-1] - log.pos[-1]))
