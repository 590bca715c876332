"""Trajectory logs and tracking metrics (steady-state error, overshoot,
settling time, RMS path error)."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .env import EpisodeStatus


class Mode(enum.Enum):
    STEP_RESPONSE = "step_response"   # constant reference; overshoot defined
    PATH_TRACKING = "path_tracking"   # moving reference


class ModeMismatch(Exception):
    """StepResponse metrics requested on a moving reference."""


@dataclass
class TrajectoryLog:
    """Uniform 50 Hz time series of reference, pose and raw actions.

    `actions` has one fewer meaningful row than the states: the final
    sample is the state reached after the last action, padded with NaN.
    """

    t: np.ndarray         # (n,)
    ref: np.ndarray       # (n, 3)
    pos: np.ndarray       # (n, 3)
    euler: np.ndarray     # (n, 3)
    actions: np.ndarray   # (n, act_dim)
    status: EpisodeStatus = EpisodeStatus.MAX_STEPS
    complete: bool = True

    def __post_init__(self):
        n = len(self.t)
        for name in ("ref", "pos", "euler", "actions"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} length mismatch")
        dt = np.diff(self.t)
        if n > 1 and not np.allclose(dt, dt[0], rtol=0, atol=1e-9):
            raise ValueError("timestamps must be uniform")

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0


@dataclass
class TrackingMetrics:
    """Table-row summary of one trajectory."""

    steady_state_error: tuple[float, float, float]   # m, per axis
    overshoot: tuple[float, float, float] | None     # %, per axis; None off step mode
    settling_time: float | None                      # s; None if never settled
    rms_path_error: float                            # m, 3-D over the whole log
    truncated: bool = False                          # log ended in a failure


def compute_metrics(log: TrajectoryLog, mode: Mode, settling_band: float = 0.05) -> TrackingMetrics:
    """Metrics per the workbench conventions.

    steady-state error: mean |ref - pos| per axis over the final second;
    overshoot: peak signed excursion past the reference along the initial
    error direction, % of the initial error (0 if never crossed);
    settling time: earliest time after which the 3-D error stays inside
    the band; RMS: root-mean-square 3-D error over the whole log.
    """
    if len(log.t) == 0:
        raise ValueError("empty trajectory log")
    ref, pos, t = log.ref, log.pos, log.t
    err = ref - pos
    dist = np.linalg.norm(err, axis=1)

    if mode is Mode.STEP_RESPONSE and not np.allclose(ref, ref[0], rtol=0, atol=1e-12):
        raise ModeMismatch("step-response metrics need a constant reference")

    t_end = t[-1]
    window = t >= t_end - 1.0 - 1e-9
    sse = tuple(float(v) for v in np.abs(err[window]).mean(axis=0))

    overshoot = None
    if mode is Mode.STEP_RESPONSE:
        os = []
        for ax in range(3):
            e0 = err[0, ax]
            if e0 == 0.0:
                os.append(0.0)
                continue
            sign = math.copysign(1.0, e0)
            beyond = sign * (pos[:, ax] - ref[0, ax])  # >0 once past the reference
            os.append(float(max(beyond.max(), 0.0) / abs(e0) * 100.0))
        overshoot = tuple(os)

    violations = np.nonzero(dist > settling_band)[0]
    if len(violations) == 0:
        settling = float(t[0])
    elif violations[-1] == len(t) - 1:
        settling = None
    else:
        settling = float(t[violations[-1] + 1])

    rms = float(np.sqrt(np.mean(dist * dist)))
    return TrackingMetrics(
        steady_state_error=sse,
        overshoot=overshoot,
        settling_time=settling,
        rms_path_error=rms,
        truncated=not log.complete,
    )


# ---------------------------------------------------------------------------
# CSV io — full round-trip precision, schema in the header row

TRAJECTORY_COLUMNS = ["t", "rx", "ry", "rz", "x", "y", "z", "phi", "theta", "psi"]
METRIC_COLUMNS = [
    "episode", "sse_x", "sse_y", "sse_z",
    "overshoot_x", "overshoot_y", "overshoot_z",
    "settling_time", "rms_path_error", "truncated",
]


def _fmt(v: float) -> str:
    return repr(float(v))


def save_trajectory(log: TrajectoryLog, path) -> None:
    act_dim = log.actions.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write(f"# status={log.status.value} complete={str(log.complete).lower()}\n")
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS + [f"a{i}" for i in range(act_dim)])
        for i in range(len(log.t)):
            row = [_fmt(log.t[i])]
            row += [_fmt(v) for v in log.ref[i]]
            row += [_fmt(v) for v in log.pos[i]]
            row += [_fmt(v) for v in log.euler[i]]
            row += ["" if math.isnan(a) else _fmt(a) for a in log.actions[i]]
            writer.writerow(row)


def load_trajectory(path) -> TrajectoryLog:
    status = EpisodeStatus.MAX_STEPS
    complete = True
    rows = []
    header = None
    with open(path, newline="") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    if key == "status":
                        status = EpisodeStatus(val)
                    elif key == "complete":
                        complete = val == "true"
                continue
            cells = next(csv.reader([line]))
            if header is None:
                header = cells
                continue
            rows.append(cells)
    if header is None or header[: len(TRAJECTORY_COLUMNS)] != TRAJECTORY_COLUMNS:
        raise ValueError(f"{path}: unexpected trajectory schema {header}")
    act_dim = len(header) - len(TRAJECTORY_COLUMNS)
    n = len(rows)
    t = np.empty(n)
    ref = np.empty((n, 3))
    pos = np.empty((n, 3))
    euler = np.empty((n, 3))
    actions = np.full((n, act_dim), np.nan)
    for i, cells in enumerate(rows):
        vals = [float(c) if c != "" else math.nan for c in cells]
        t[i] = vals[0]
        ref[i] = vals[1:4]
        pos[i] = vals[4:7]
        euler[i] = vals[7:10]
        actions[i] = vals[10:]
    return TrajectoryLog(t, ref, pos, euler, actions, status=status, complete=complete)


def save_metrics_table(rows: list[tuple[str, TrackingMetrics]], path) -> None:
    """Per-episode metric rows plus an `aggregate` row of plain means."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)

        def emit(label, m: TrackingMetrics):
            row = [label] + [_fmt(v) for v in m.steady_state_error]
            row += [_fmt(v) for v in m.overshoot] if m.overshoot is not None else ["", "", ""]
            row += [_fmt(m.settling_time) if m.settling_time is not None else ""]
            row += [_fmt(m.rms_path_error), str(m.truncated).lower()]
            writer.writerow(row)

        for label, m in rows:
            emit(label, m)
        if len(rows) > 1:
            emit("aggregate", aggregate_metrics([m for _, m in rows]))


def aggregate_metrics(ms: list[TrackingMetrics]) -> TrackingMetrics:
    """Componentwise mean; settling time averages only settled episodes."""
    sse = tuple(float(np.mean([m.steady_state_error[i] for m in ms])) for i in range(3))
    if all(m.overshoot is not None for m in ms):
        ov = tuple(float(np.mean([m.overshoot[i] for m in ms])) for i in range(3))
    else:
        ov = None
    settled = [m.settling_time for m in ms if m.settling_time is not None]
    st = float(np.mean(settled)) if settled else None
    rms = float(np.mean([m.rms_path_error for m in ms]))
    return TrackingMetrics(sse, ov, st, rms, truncated=any(m.truncated for m in ms))
