"""Reference-path generation: helix, Gerono lemniscate, timed waypoints."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np


class OutOfDomain(Exception):
    """Sample time outside [0, duration]."""


@dataclass(frozen=True)
class HelixPath:
    """Rising circle. Starts exactly at `start`; the circle center sits at
    start - (radius, 0, 0); z climbs linearly by `height` over `duration`."""

    radius: float = 1.0
    height: float = 1.0
    turns: float = 1.0
    duration: float = 10.0
    start: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.radius <= 0 or self.duration <= 0 or self.turns <= 0:
            raise ValueError("radius, turns and duration must be positive")


@dataclass(frozen=True)
class LemniscatePath:
    """Gerono figure-eight at constant altitude:
    x = w sin(p), y = w sin(p) cos(p), one loop per duration."""

    half_width: float = 1.0
    height: float = 1.0
    duration: float = 10.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.half_width <= 0 or self.duration <= 0:
            raise ValueError("half_width and duration must be positive")


@dataclass(frozen=True)
class WaypointPath:
    """Timed 3-D points, linearly interpolated."""

    times: np.ndarray    # (n,) seconds, strictly increasing, starting at 0
    points: np.ndarray   # (n, 3) meters

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        p = np.asarray(self.points, dtype=np.float64)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", p)
        if t.ndim != 1 or len(t) < 2 or p.shape != (len(t), 3):
            raise ValueError("need n >= 2 times and matching (n, 3) points")
        if t[0] != 0.0 or (np.diff(t) <= 0).any():
            raise ValueError("times must start at 0 and increase strictly")

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @classmethod
    def from_csv(cls, path) -> "WaypointPath":
        """Parse a `t,x,y,z` file; raises ValueError naming the bad line."""
        times, points = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for lineno, row in enumerate(reader, start=1):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                if lineno == 1 and [c.strip().lower() for c in row] == ["t", "x", "y", "z"]:
                    continue
                if len(row) != 4:
                    raise ValueError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
                try:
                    vals = [float(c) for c in row]
                except ValueError as e:
                    raise ValueError(f"{path}:{lineno}: {e}") from None
                times.append(vals[0])
                points.append(vals[1:])
        if len(times) < 2:
            raise ValueError(f"{path}: need at least 2 waypoints")
        return cls(np.asarray(times), np.asarray(points))


PathSpec = HelixPath | LemniscatePath | WaypointPath


def sample_path(spec: PathSpec, t: float) -> np.ndarray:
    """Reference point at time t in [0, duration]."""
    if t < 0.0 or t > spec.duration:
        raise OutOfDomain(f"t={t} outside [0, {spec.duration}]")

    if isinstance(spec, HelixPath):
        omega = 2.0 * math.pi * spec.turns / spec.duration
        x0, y0, z0 = spec.start
        return np.array(
            [
                x0 + spec.radius * math.cos(omega * t) - spec.radius,
                y0 + spec.radius * math.sin(omega * t),
                z0 + spec.height * (t / spec.duration),
            ]
        )

    if isinstance(spec, LemniscatePath):
        # phase wraps modulo one period so t=duration lands exactly on t=0
        phase = 2.0 * math.pi * math.fmod(t / spec.duration, 1.0)
        s = math.sin(phase)
        cx, cy = spec.center
        return np.array(
            [cx + spec.half_width * s, cy + spec.half_width * s * math.cos(phase), spec.height]
        )

    if isinstance(spec, WaypointPath):
        i = int(np.searchsorted(spec.times, t, side="right"))
        if i >= len(spec.times):
            return spec.points[-1].copy()
        i = max(i, 1)
        t0, t1 = spec.times[i - 1], spec.times[i]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * spec.points[i - 1] + w * spec.points[i]

    raise TypeError(f"unknown path spec {type(spec)!r}")


def helix_preset() -> HelixPath:
    """The 1 m radius, 1 m height helical test path."""
    return HelixPath(radius=1.0, height=1.0, turns=1.0, duration=10.0, start=(0.0, 0.0, 1.0))


def infinity_preset() -> LemniscatePath:
    """The 1 m half-width infinity-symbol test path."""
    return LemniscatePath(half_width=1.0, height=1.0, duration=10.0, center=(0.0, 0.0))
