"""Trajectory table loading, coordinate transform, smoothing, kinematics.

Input is a delimited text table with a header row, one row per
(agent, timestep). A column-mapping schema connects arbitrary source
headers to the canonical fields. Output of the stage is the canonical
frames table with fixed column order:

    agent_id, t, x, y, vx, vy, ax, ay, jx, jy, lane_id, type, length, width

All downstream metrics are derived from the filtered x-y components;
source-supplied kinematics are kept only when the config explicitly says
to trust them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd

from trajpareto.errors import ConfigError, GridError, SchemaError

logger = logging.getLogger(__name__)

DT_DEFAULT = 0.1  # s, uniform sampling grid

AGENT_TYPES = ("av", "car", "truck", "bus", "pedestrian", "cyclist", "scooter", "other")

CANONICAL_COLUMNS = [
    "agent_id", "t", "x", "y", "vx", "vy", "ax", "ay", "jx", "jy",
    "lane_id", "type", "length", "width",
]

MANDATORY_FIELDS = ("agent_id", "time", "x", "y")
OPTIONAL_FIELDS = ("lane_id", "agent_type", "length", "width", "vx", "vy", "ax", "ay")


@dataclass
class FrameTransform:
    """Affine pixel -> meter map with the origin at the lower-left corner."""

    scale_x: float = 1.0
    scale_y: float = 1.0
    origin_x: float = 0.0
    origin_y: float = 0.0

    def __post_init__(self):
        if self.scale_x <= 0 or self.scale_y <= 0:
            raise ConfigError("frame transform scales must be positive")

    def inverse(self) -> "FrameTransform":
        return FrameTransform(
            scale_x=1.0 / self.scale_x,
            scale_y=1.0 / self.scale_y,
            origin_x=-self.origin_x * self.scale_x,
            origin_y=-self.origin_y * self.scale_y,
        )


@dataclass
class SmoothingConfig:
    """Truncated Gaussian kernel; radius defaults to ceil(3*sigma/dt) samples."""

    sigma: float = 0.3          # seconds
    kernel_radius: Optional[int] = None

    def validate(self, dt: float) -> None:
        if self.sigma <= 0:
            raise ConfigError("smoothing sigma must be > 0")
        if self.kernel_radius is not None and self.kernel_radius < self.min_radius(dt):
            raise ConfigError(
                f"kernel_radius {self.kernel_radius} below minimum "
                f"{self.min_radius(dt)} for sigma={self.sigma}, dt={dt}"
            )

    def min_radius(self, dt: float) -> int:
        return int(math.ceil(3.0 * self.sigma / dt))

    def radius(self, dt: float) -> int:
        return self.kernel_radius if self.kernel_radius is not None else self.min_radius(dt)


@dataclass
class TrajectoryFrame:
    """One agent's state at one timestep."""

    agent_id: str
    timestep: float
    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0
    ax: float = 0.0
    ay: float = 0.0
    jx: float = 0.0
    jy: float = 0.0
    lane_id: Optional[str] = None
    agent_type: str = "other"
    length: Optional[float] = None
    width: Optional[float] = None

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    @property
    def accel_mag(self) -> float:
        return math.hypot(self.ax, self.ay)


@dataclass
class AgentTrack:
    """Per-agent column store over the common time grid.

    Arrays are aligned; ``t`` is strictly increasing with spacing dt
    (holes from dropped bad rows are allowed and handled by the
    time-aware derivative and smoothing code).
    """

    agent_id: str
    agent_type: str
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray = None
    vy: np.ndarray = None
    ax: np.ndarray = None
    ay: np.ndarray = None
    jx: np.ndarray = None
    jy: np.ndarray = None
    lane_id: list = field(default_factory=list)
    length: Optional[float] = None
    width: Optional[float] = None
    flags: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    def speed(self) -> np.ndarray:
        return np.hypot(self.vx, self.vy)

    def frame(self, k: int) -> TrajectoryFrame:
        def _get(arr, default=0.0):
            return float(arr[k]) if arr is not None else default
        return TrajectoryFrame(
            agent_id=self.agent_id,
            timestep=float(self.t[k]),
            x=float(self.x[k]),
            y=float(self.y[k]),
            vx=_get(self.vx), vy=_get(self.vy),
            ax=_get(self.ax), ay=_get(self.ay),
            jx=_get(self.jx), jy=_get(self.jy),
            lane_id=self.lane_id[k] if self.lane_id else None,
            agent_type=self.agent_type,
            length=self.length,
            width=self.width,
        )

    def headings(self, min_speed: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
        """Velocity direction per timestep, holding the last heading below
        ``min_speed``. Returns (heading_rad, held_flag)."""
        spd = self.speed()
        raw = np.arctan2(self.vy, self.vx)
        heading = raw.copy()
        held = np.zeros(len(self), dtype=bool)
        last = None
        for k in range(len(self)):
            if spd[k] >= min_speed:
                last = raw[k]
            elif last is not None:
                heading[k] = last
                held[k] = True
            else:
                held[k] = True  # no valid heading seen yet; keep raw atan2
        # fill a leading standstill stretch with the first valid heading
        first_valid = np.argmax(spd >= min_speed) if np.any(spd >= min_speed) else None
        if first_valid is not None and first_valid > 0:
            heading[:first_valid] = raw[first_valid]
        return heading, held


def pixel_to_meter(x, y, transform: FrameTransform):
    """Apply the affine pixel->meter map elementwise."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (x - transform.origin_x) * transform.scale_x, (y - transform.origin_y) * transform.scale_y


def gaussian_smooth(series, cfg: SmoothingConfig, dt: float = DT_DEFAULT, t=None) -> np.ndarray:
    """Smooth a 1-D series with a normalized truncated Gaussian kernel.

    Boundary samples are handled by renormalizing the kernel over the
    in-range samples, so no data is fabricated at trajectory ends and a
    constant series is reproduced exactly. When ``t`` is given and the
    grid has holes, weights are computed from time offsets instead of
    sample offsets.
    """
    cfg.validate(dt)
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("series must be a non-empty 1-D sequence")
    radius = cfg.radius(dt)

    uniform = True
    if t is not None:
        t = np.asarray(t, dtype=float)
        uniform = bool(np.all(np.abs(np.diff(t) - dt) <= 1e-9)) if t.size > 1 else True

    if uniform:
        offsets = np.arange(-radius, radius + 1) * dt
        w = np.exp(-0.5 * (offsets / cfg.sigma) ** 2)
        num = np.convolve(x, w, mode="same")
        den = np.convolve(np.ones_like(x), w, mode="same")
        return num / den

    # hole-aware path: per-sample window in time units
    out = np.empty_like(x)
    half = radius * dt + 1e-9
    for k in range(x.size):
        sel = np.abs(t - t[k]) <= half
        w = np.exp(-0.5 * ((t[sel] - t[k]) / cfg.sigma) ** 2)
        out[k] = np.dot(w, x[sel]) / np.sum(w)
    return out


def load_trajectories(path, schema: dict, dt: float = DT_DEFAULT) -> tuple[list[AgentTrack], int]:
    """Load a delimited trajectory table into per-agent tracks.

    ``schema`` maps canonical field names (agent_id, time, x, y, and the
    optional fields) to source column headers. Rows with a non-finite
    position are dropped and counted. Each agent's timestamps must lie on
    the uniform dt grid; otherwise a GridError names the agent.

    Returns (tracks sorted by agent_id, dropped_row_count).
    """
    df = pd.read_csv(path)
    colmap = {}
    for fieldname in MANDATORY_FIELDS:
        col = schema.get(fieldname)
        if col is None or col not in df.columns:
            raise SchemaError(f"mandatory column for '{fieldname}' not found (mapped to {col!r})")
        colmap[fieldname] = col
    for fieldname in OPTIONAL_FIELDS:
        col = schema.get(fieldname)
        if col is not None and col in df.columns:
            colmap[fieldname] = col

    # grid check runs on the raw table so holes from dropped rows are
    # distinguishable from genuinely off-grid timestamps
    tol = 1e-6
    for agent_id, grp in df.groupby(colmap["agent_id"], sort=True):
        tvals = np.sort(grp[colmap["time"]].to_numpy(dtype=float))
        if tvals.size > 1:
            diffs = np.diff(tvals)
            if np.any(np.abs(diffs - dt) > tol):
                raise GridError(
                    f"agent {agent_id!r}: non-uniform time grid "
                    f"(expected constant spacing {dt}, got spacings "
                    f"{np.unique(np.round(diffs, 6)).tolist()[:5]})"
                )

    finite = np.isfinite(df[colmap["x"]].to_numpy(dtype=float)) & np.isfinite(
        df[colmap["y"]].to_numpy(dtype=float)
    )
    dropped = int((~finite).sum())
    if dropped:
        logger.warning("dropped %d rows with non-finite positions", dropped)
        df = df.loc[finite]

    tracks = []
    for agent_id, grp in df.groupby(colmap["agent_id"], sort=True):
        grp = grp.sort_values(colmap["time"])
        n = len(grp)
        agent_type = "other"
        if "agent_type" in colmap:
            raw_type = str(grp[colmap["agent_type"]].iloc[0]).strip().lower()
            agent_type = raw_type if raw_type in AGENT_TYPES else "other"
        lane = [None] * n
        if "lane_id" in colmap:
            lane = [None if pd.isna(v) else str(v) for v in grp[colmap["lane_id"]]]

        def _scalar(fieldname):
            if fieldname not in colmap:
                return None
            v = grp[colmap[fieldname]].iloc[0]
            return None if pd.isna(v) else float(v)

        def _series(fieldname):
            if fieldname not in colmap:
                return None
            return grp[colmap[fieldname]].to_numpy(dtype=float)

        length, width = _scalar("length"), _scalar("width")
        if (length is not None and length < 0) or (width is not None and width < 0):
            raise SchemaError(f"agent {agent_id!r}: negative length/width")

        tracks.append(AgentTrack(
            agent_id=str(agent_id),
            agent_type=agent_type,
            t=grp[colmap["time"]].to_numpy(dtype=float),
            x=grp[colmap["x"]].to_numpy(dtype=float),
            y=grp[colmap["y"]].to_numpy(dtype=float),
            vx=_series("vx"), vy=_series("vy"),
            ax=_series("ax"), ay=_series("ay"),
            lane_id=lane,
            length=length, width=width,
        ))
    return tracks, dropped


def derive_kinematics(
    track: AgentTrack,
    smoothing: Optional[SmoothingConfig] = None,
    dt: float = DT_DEFAULT,
    smooth_target: str = "positions",
    use_source_kinematics: bool = False,
) -> AgentTrack:
    """Fill vx/vy, ax/ay and jerk components for one track.

    Positions are smoothed first (when configured), then differenced:
    central differences for velocity and acceleration (one-sided at the
    ends, exact through quadratics in the interior), adjacent forward
    differences for jerk so an acceleration step of h over one dt reads
    as jerk h/dt at the step sample.

    Series too short for a derivative are flagged invalid rather than
    raising: accel needs >= 3 frames, jerk >= 4.
    """
    if smooth_target not in ("positions", "speeds", "both"):
        raise ConfigError(f"unknown smooth_target: {smooth_target!r}")
    n = len(track)
    out = replace(track)
    x, y, t = track.x.astype(float), track.y.astype(float), track.t.astype(float)

    if smoothing is not None and smooth_target in ("positions", "both") and n > 1:
        x = gaussian_smooth(x, smoothing, dt, t=t)
        y = gaussian_smooth(y, smoothing, dt, t=t)
    out.x, out.y = x, y

    if use_source_kinematics and track.vx is not None and track.vy is not None:
        vx, vy = track.vx.astype(float), track.vy.astype(float)
    elif n >= 2:
        vx, vy = np.gradient(x, t), np.gradient(y, t)
    else:
        vx, vy = np.zeros(n), np.zeros(n)

    if smoothing is not None and smooth_target in ("speeds", "both") and n > 1:
        vx = gaussian_smooth(vx, smoothing, dt, t=t)
        vy = gaussian_smooth(vy, smoothing, dt, t=t)

    if use_source_kinematics and track.ax is not None and track.ay is not None:
        ax, ay = track.ax.astype(float), track.ay.astype(float)
    elif n >= 3:
        ax, ay = np.gradient(vx, t), np.gradient(vy, t)
    else:
        ax, ay = np.full(n, np.nan), np.full(n, np.nan)

    jx, jy = np.full(n, np.nan), np.full(n, np.nan)
    if n >= 4 and np.all(np.isfinite(ax)):
        dtv = np.diff(t)
        jx[:-1], jy[:-1] = np.diff(ax) / dtv, np.diff(ay) / dtv
        jx[-1], jy[-1] = jx[-2], jy[-2]

    out.vx, out.vy, out.ax, out.ay, out.jx, out.jy = vx, vy, ax, ay, jx, jy
    out.flags = dict(track.flags)
    out.flags.update({
        "velocity_valid": n >= 2,
        "accel_valid": n >= 3,
        "jerk_valid": n >= 4,
    })
    if n < 4:
        logger.info("agent %s: series too short for full kinematics (n=%d)", track.agent_id, n)
    return out


def apply_transform(track: AgentTrack, transform: FrameTransform) -> AgentTrack:
    out = replace(track)
    out.x, out.y = pixel_to_meter(track.x, track.y, transform)
    return out


def tracks_to_table(tracks: list[AgentTrack]) -> pd.DataFrame:
    """Canonical frames table with the fixed column order."""
    rows = []
    for tr in sorted(tracks, key=lambda s: s.agent_id):
        n = len(tr)
        rows.append(pd.DataFrame({
            "agent_id": tr.agent_id,
            "t": tr.t,
            "x": tr.x, "y": tr.y,
            "vx": tr.vx if tr.vx is not None else np.zeros(n),
            "vy": tr.vy if tr.vy is not None else np.zeros(n),
            "ax": tr.ax if tr.ax is not None else np.full(n, np.nan),
            "ay": tr.ay if tr.ay is not None else np.full(n, np.nan),
            "jx": tr.jx if tr.jx is not None else np.full(n, np.nan),
            "jy": tr.jy if tr.jy is not None else np.full(n, np.nan),
            "lane_id": [v if v is not None else "" for v in (tr.lane_id or [None] * n)],
            "type": tr.agent_type,
            "length": tr.length if tr.length is not None else np.nan,
            "width": tr.width if tr.width is not None else np.nan,
        }))
    if not rows:
        return pd.DataFrame(columns=CANONICAL_COLUMNS)
    return pd.concat(rows, ignore_index=True)[CANONICAL_COLUMNS]


def table_to_tracks(df: pd.DataFrame) -> list[AgentTrack]:
    """Rebuild per-agent tracks from a canonical frames table."""
    tracks = []
    for agent_id, grp in df.groupby("agent_id", sort=True):
        grp = grp.sort_values("t")
        lane = [None if (isinstance(v, float) and math.isnan(v)) or v == "" else str(v)
                for v in grp["lane_id"]]
        length = grp["length"].iloc[0]
        width = grp["width"].iloc[0]
        tracks.append(AgentTrack(
            agent_id=str(agent_id),
            agent_type=str(grp["type"].iloc[0]),
            t=grp["t"].to_numpy(dtype=float),
            x=grp["x"].to_numpy(dtype=float),
            y=grp["y"].to_numpy(dtype=float),
            vx=grp["vx"].to_numpy(dtype=float), vy=grp["vy"].to_numpy(dtype=float),
            ax=grp["ax"].to_numpy(dtype=float), ay=grp["ay"].to_numpy(dtype=float),
            jx=grp["jx"].to_numpy(dtype=float), jy=grp["jy"].to_numpy(dtype=float),
            lane_id=lane,
            length=None if pd.isna(length) else float(length),
            width=None if pd.isna(width) else float(width),
            flags={"velocity_valid": len(grp) >= 2,
                   "accel_valid": len(grp) >= 3,
                   "jerk_valid": len(grp) >= 4},
        ))
    return tracks
