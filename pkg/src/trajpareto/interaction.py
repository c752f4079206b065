"""Ego-relative detection zones and leader/follower identification.

Zones are config-driven wedges (angle interval + range) in the ego
heading frame; the defaults are plausible camera coverage and every
number is overridable. Leader/follower candidates must pass the
motion-validity checks (speed, proximity, realistic acceleration,
consistent relative motion) and, for followers, the affine spacing
band |d - (d0 + h*v)| <= eps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from trajpareto.errors import ConfigError
from trajpareto.ingest import AgentTrack, TrajectoryFrame

logger = logging.getLogger(__name__)

VEHICLE_TYPES = ("av", "car", "truck", "bus")


@dataclass
class ZoneSpec:
    """Angular wedge [min_angle, max_angle) degrees, closed at the lower
    edge, open at the upper, with wraparound across +/-180."""

    name: str
    min_angle: float
    max_angle: float
    max_range: float

    def contains(self, rho: float, s: float) -> bool:
        if s > self.max_range:
            return False
        span = (self.max_angle - self.min_angle) % 360.0
        return (rho - self.min_angle) % 360.0 < span


def default_zones() -> list[ZoneSpec]:
    return [
        ZoneSpec("forward", -30.0, 30.0, 80.0),
        ZoneSpec("forward_side_left", 30.0, 60.0, 60.0),
        ZoneSpec("forward_side_right", -60.0, -30.0, 60.0),
        ZoneSpec("side_left", 60.0, 120.0, 20.0),
        ZoneSpec("side_right", -120.0, -60.0, 20.0),
        ZoneSpec("rear", 120.0, -120.0, 40.0),
    ]


@dataclass
class ZoneConfig:
    zones: list = field(default_factory=default_zones)

    def __post_init__(self):
        names = [z.name for z in self.zones]
        if len(set(names)) != len(names):
            raise ConfigError("zone names must be unique")
        for required in ("forward", "rear"):
            if required not in names:
                raise ConfigError(f"zone config must include a '{required}' zone")
        for z in self.zones:
            if z.max_range <= 0:
                raise ConfigError(f"zone {z.name!r}: max_range must be > 0")
            if (z.max_angle - z.min_angle) % 360.0 == 0.0:
                raise ConfigError(f"zone {z.name!r}: empty or full-circle angle interval")


@dataclass
class AffineSpacingPolicy:
    """Follower coupling band around the target gap d0 + h*v."""

    d0: float = 4.0    # m, standstill distance
    h: float = 2.0     # s, desired headway
    eps: float = 5.0   # m, noise tolerance

    def __post_init__(self):
        if self.d0 < 0 or self.eps < 0 or self.h <= 0:
            raise ConfigError("affine spacing policy requires d0 >= 0, eps >= 0, h > 0")


@dataclass
class InteractionPair:
    """Ego-agent relation at one timestep, in the ego heading frame."""

    ego_id: str
    agent_id: str
    timestep: float
    s_ij: float          # m, Euclidean center distance
    rho_ij: float        # deg, bearing relative to ego heading, (-180, 180]
    rel_speed: float     # m/s, |v_ego - v_agent|
    zone: Optional[str] = None
    role: str = "none"   # leader | follower | neighbor | none
    heading_held: bool = False


@dataclass
class SearchConfig:
    """Motion-validity gates shared by leader and follower search."""

    max_distance: float = 120.0       # m, perceptual proximity
    min_speed: float = 0.1            # m/s, motion continuity
    max_accel: float = 5.0            # m/s^2, realistic accelerations
    consistency_window: float = 0.5   # s, gap-rate finite difference span
    consistency_deadband: float = 0.3 # m/s
    lane_width: float = 3.5           # m, lateral gate when lane ids absent
    lane_adjacency: dict = field(default_factory=dict)
    length_correction: bool = False   # bumper-to-bumper distances in Eq. 1 band


def wrap_angle_deg(angle: float) -> float:
    """Normalize to (-180, 180]."""
    a = (angle + 180.0) % 360.0 - 180.0
    return 180.0 if a == -180.0 else a


def compute_pair_geometry(
    ego: TrajectoryFrame,
    agent: TrajectoryFrame,
    ego_heading: Optional[float] = None,
) -> InteractionPair:
    """Distance, relative bearing and relative speed of agent w.r.t. ego.

    ``ego_heading`` (radians) overrides the velocity direction; the
    pipeline passes the hold-last heading when the ego is near standstill.
    """
    if abs(ego.timestep - agent.timestep) > 1e-6:
        raise ValueError("pair geometry requires frames at the same timestep")
    dx, dy = agent.x - ego.x, agent.y - ego.y
    s = math.hypot(dx, dy)
    held = False
    if ego_heading is None:
        if ego.speed < 0.1:
            held = True  # degenerate heading, caller supplied no fallback
        ego_heading = math.atan2(ego.vy, ego.vx)
    rho = wrap_angle_deg(math.degrees(math.atan2(dy, dx) - ego_heading))
    rel_speed = math.hypot(ego.vx - agent.vx, ego.vy - agent.vy)
    return InteractionPair(
        ego_id=ego.agent_id, agent_id=agent.agent_id, timestep=ego.timestep,
        s_ij=s, rho_ij=rho, rel_speed=rel_speed, heading_held=held,
    )


def assign_zone(pair: InteractionPair, zones: ZoneConfig) -> InteractionPair:
    """First zone (config order) whose wedge contains the pair, else none."""
    out = replace(pair)
    out.zone = None
    for z in zones.zones:
        if z.contains(pair.rho_ij, pair.s_ij):
            out.zone = z.name
            break
    return out


def affine_spacing_check(d_actual: float, v_i: float, policy: AffineSpacingPolicy) -> bool:
    """True iff |d_actual - (d0 + h*v_i)| <= eps."""
    return abs(d_actual - (policy.d0 + policy.h * v_i)) <= policy.eps


def lateral_offset(pair: InteractionPair) -> float:
    """Signed lateral offset of the agent in the ego frame (left positive)."""
    return pair.s_ij * math.sin(math.radians(pair.rho_ij))


def time_index(track: AgentTrack, t: float, tol: float = 1e-6) -> Optional[int]:
    """Index of time t in a track, or None when the sample is absent."""
    idx = int(np.searchsorted(track.t, t - tol))
    if idx < len(track) and abs(track.t[idx] - t) <= tol:
        return idx
    return None


def _lane_compatible(ego: AgentTrack, k: int, cand: AgentTrack, j: int,
                     pair: InteractionPair, search: SearchConfig) -> bool:
    ego_lane = ego.lane_id[k] if ego.lane_id else None
    cand_lane = cand.lane_id[j] if cand.lane_id else None
    if ego_lane is not None and cand_lane is not None:
        if ego_lane == cand_lane:
            return True
        adjacent = search.lane_adjacency.get(ego_lane, ())
        return cand_lane in adjacent
    return abs(lateral_offset(pair)) < 0.5 * search.lane_width


def _gap_at(ego: AgentTrack, cand: AgentTrack, t: float) -> Optional[float]:
    ke, kc = time_index(ego, t), time_index(cand, t)
    if ke is None or kc is None:
        return None
    return math.hypot(ego.x[ke] - cand.x[kc], ego.y[ke] - cand.y[kc])


def _consistent_motion(ego: AgentTrack, k: int, cand: AgentTrack, j: int,
                       leader_minus_follower: float, search: SearchConfig) -> bool:
    """Gap-rate sign must agree with the leader-minus-follower speed sign.

    A trailing window is preferred, a forward window is the fallback at
    track starts; with no usable window the check passes (nothing to
    falsify). Both quantities get the configured deadband.
    """
    t = ego.t[k]
    w = search.consistency_window
    gap_now = _gap_at(ego, cand, t)
    gap_past = _gap_at(ego, cand, t - w)
    if gap_now is not None and gap_past is not None:
        rate = (gap_now - gap_past) / w
    else:
        gap_fut = _gap_at(ego, cand, t + w)
        if gap_now is None or gap_fut is None:
            return True
        rate = (gap_fut - gap_now) / w
    band = search.consistency_deadband
    if abs(rate) < band or abs(leader_minus_follower) < band:
        return True
    return (rate > 0) == (leader_minus_follower > 0)


def _effective_gap(pair: InteractionPair, ego: AgentTrack, cand: AgentTrack,
                   search: SearchConfig) -> float:
    if not search.length_correction:
        return pair.s_ij
    half = 0.5 * ((ego.length or 0.0) + (cand.length or 0.0))
    return max(0.0, pair.s_ij - half)


FAILURE_KEYS = ("absent", "zone", "lane", "speed", "distance", "accel",
                "consistency", "spacing_band")


def _select_candidate(
    ego: AgentTrack, k: int,
    candidates: list[AgentTrack],
    zones: ZoneConfig,
    search: SearchConfig,
    want_zone: str,
    ego_heading: Optional[float],
    policy: Optional[AffineSpacingPolicy],
) -> tuple[Optional[str], dict]:
    counts = {key: 0 for key in FAILURE_KEYS}
    ego_frame = ego.frame(k)
    passing = []
    for cand in candidates:
        if cand.agent_id == ego.agent_id or cand.agent_type not in VEHICLE_TYPES:
            continue
        j = time_index(cand, ego.t[k])
        if j is None:
            counts["absent"] += 1
            continue
        pair = compute_pair_geometry(ego_frame, cand.frame(j), ego_heading)
        pair = assign_zone(pair, zones)
        if pair.zone != want_zone:
            counts["zone"] += 1
            continue
        if not _lane_compatible(ego, k, cand, j, pair, search):
            counts["lane"] += 1
            continue
        cand_speed = math.hypot(cand.vx[j], cand.vy[j])
        if not cand_speed > search.min_speed:
            counts["speed"] += 1
            continue
        if not pair.s_ij < search.max_distance:
            counts["distance"] += 1
            continue
        cand_accel = math.hypot(cand.ax[j], cand.ay[j]) if cand.ax is not None else float("nan")
        if math.isfinite(cand_accel) and not cand_accel < search.max_accel:
            counts["accel"] += 1
            continue
        ego_speed = math.hypot(ego.vx[k], ego.vy[k])
        if want_zone == "forward":
            lmf = cand_speed - ego_speed    # candidate is the leader
        else:
            lmf = ego_speed - cand_speed    # ego leads, candidate follows
        if not _consistent_motion(ego, k, cand, j, lmf, search):
            counts["consistency"] += 1
            continue
        if policy is not None:
            gap = _effective_gap(pair, ego, cand, search)
            if not affine_spacing_check(gap, ego_speed, policy):
                counts["spacing_band"] += 1
                continue
        passing.append((pair.s_ij, cand.agent_id))
    if not passing:
        return None, counts
    passing.sort()  # nearest first, lexicographic agent_id tie-break
    return passing[0][1], counts


def find_leader(
    ego: AgentTrack, k: int,
    candidates: list[AgentTrack],
    zones: ZoneConfig,
    search: Optional[SearchConfig] = None,
    ego_heading: Optional[float] = None,
) -> tuple[Optional[str], dict]:
    """Nearest validated leader in the forward zone at timestep index k.

    Returns (agent_id or None, per-check failure counts).
    """
    search = search or SearchConfig()
    return _select_candidate(ego, k, candidates, zones, search, "forward",
                             ego_heading, policy=None)


def find_follower(
    ego: AgentTrack, k: int,
    candidates: list[AgentTrack],
    zones: ZoneConfig,
    policy: Optional[AffineSpacingPolicy] = None,
    search: Optional[SearchConfig] = None,
    ego_heading: Optional[float] = None,
) -> tuple[Optional[str], dict]:
    """Nearest rear-zone agent inside the affine spacing band that also
    passes the motion-validity checks."""
    search = search or SearchConfig()
    policy = policy or AffineSpacingPolicy()
    return _select_candidate(ego, k, candidates, zones, search, "rear",
                             ego_heading, policy=policy)
