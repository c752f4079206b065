"""Headway, string-stability gain, jerk and deceleration events."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from trajpareto.ingest import AgentTrack, TrajectoryFrame

JERK_THRESHOLD = 2.5    # m/s^3, strict >
DECEL_THRESHOLD = 2.0   # m/s^2, strict >
DECEL_MIN_FRAMES = 3
A_MIN_GAIN = 0.1        # m/s^2, guard against the Eq-6 division singularity
MIN_SPEED = 0.1         # m/s


def compute_headway(
    ego: TrajectoryFrame,
    leader: TrajectoryFrame,
    min_speed: float = MIN_SPEED,
) -> tuple[float, Optional[float]]:
    """Distance headway to the validated leader, plus time headway when the
    ego is moving (>= min_speed), else None for the time component."""
    dist = math.hypot(leader.x - ego.x, leader.y - ego.y)
    speed = ego.speed
    return dist, (dist / speed if speed >= min_speed else None)


def longitudinal_accel(track: AgentTrack, min_speed: float = MIN_SPEED) -> np.ndarray:
    """Signed acceleration along the heading (hold-last below min_speed)."""
    heading, _ = track.headings(min_speed)
    return track.ax * np.cos(heading) + track.ay * np.sin(heading)


def interp_at(t: np.ndarray, values: np.ndarray, t_query: float) -> Optional[float]:
    """Linear interpolation inside the sampled range, None outside."""
    if t_query < t[0] - 1e-9 or t_query > t[-1] + 1e-9:
        return None
    v = float(np.interp(t_query, t, values))
    return v if math.isfinite(v) else None


def stability_gain(
    a_follower_delayed: Optional[float],
    a_ego: float,
    a_min: float = A_MIN_GAIN,
) -> Optional[float]:
    """G = a_F(t - tau) / a_i(t); None when |a_i| < a_min or the delayed
    follower sample is unavailable."""
    if a_follower_delayed is None or not math.isfinite(a_ego) or abs(a_ego) < a_min:
        return None
    return a_follower_delayed / a_ego


def jerk_magnitude(jx: np.ndarray, jy: np.ndarray) -> np.ndarray:
    return np.hypot(jx, jy)


def jerk_flags(jerk_mag, threshold: float = JERK_THRESHOLD) -> np.ndarray:
    """Boolean flag per timestep; strict > matches the 'exceeding' rule."""
    return np.asarray(jerk_mag, dtype=float) > threshold


def decel_magnitude(a_long: np.ndarray) -> np.ndarray:
    """Deceleration intensity per timestep, 0 while not decelerating."""
    return np.maximum(0.0, -np.asarray(a_long, dtype=float))


@dataclass
class DecelEvent:
    start: int   # index, inclusive
    end: int     # index, inclusive
    peak: float  # m/s^2


def detect_decel_events(
    a_long,
    threshold: float = DECEL_THRESHOLD,
    min_frames: int = DECEL_MIN_FRAMES,
) -> list[DecelEvent]:
    """Maximal runs of >= min_frames consecutive frames with deceleration
    strictly above threshold."""
    decel = decel_magnitude(a_long)
    above = decel > threshold
    events = []
    start = None
    for k, flag in enumerate(above):
        if flag and start is None:
            start = k
        elif not flag and start is not None:
            if k - start >= min_frames:
                events.append(DecelEvent(start, k - 1, float(decel[start:k].max())))
            start = None
    if start is not None and len(above) - start >= min_frames:
        events.append(DecelEvent(start, len(above) - 1, float(decel[start:].max())))
    return events
