"""Bundled synthetic dataset: two-lane car following plus a turning
scenario, written in pixel coordinates with a matching run config.

The scene is built in meters with simple longitudinal controllers
(followers react to delayed ego states, so reaction delays and string
stability gains are real), then converted to pixels through the inverse
of the configured frame transform and perturbed with seeded
sub-pixel measurement noise. Everything is deterministic given the
seed, which is what the end-to-end digest checks rely on.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pandas as pd

import trajpareto.config as cfgmod

PX_PER_M = 20.0          # transform: 0.05 m/px
NOISE_PX = 0.4           # measurement noise, ~2 cm


def _integrate(a: np.ndarray, v0: float, x0: float, dt: float):
    v = v0 + np.concatenate([[0.0], np.cumsum(a[:-1]) * dt])
    x = x0 + np.concatenate([[0.0], np.cumsum(v[:-1]) * dt])
    return v, x


def _follow(lead_v, lead_x, v0, x0, dt, delay_steps=0, kp=0.25, kv=0.6,
            d0=4.0, h=2.0, a_bounds=(-4.0, 2.5)):
    """Linear car-following controller with a reaction delay: the
    acceleration at t responds to the gap and speeds measured at
    t - delay (both vehicles' states from the same instant)."""
    n = len(lead_v)
    v = np.empty(n); x = np.empty(n); a = np.zeros(n)
    v[0], x[0] = v0, x0
    for k in range(n - 1):
        kd = max(0, k - delay_steps)
        gap = lead_x[kd] - x[kd]
        acc = kp * (gap - (d0 + h * v[kd])) + kv * (lead_v[kd] - v[kd])
        a[k] = float(np.clip(acc, *a_bounds))
        v[k + 1] = max(0.0, v[k] + a[k] * dt)
        x[k + 1] = x[k] + v[k] * dt
    a[-1] = a[-2]
    return v, x, a


def _straight_rows(agent_id, atype, t, x, y, lane, length, width):
    return pd.DataFrame({
        "id": agent_id, "t": t, "x": x, "y": y,
        "type": atype, "lane": lane, "length": length, "width": width,
    })


def _lead_accel(t: np.ndarray) -> np.ndarray:
    """Gentle sinusoidal drive with one firm braking episode at t=60 s."""
    a = 2.5 * (2 * math.pi / 30.0) * np.cos(2 * math.pi * t / 30.0)
    a = np.where((t >= 60.0) & (t < 61.5), -3.0, a)
    a = np.where((t >= 61.5) & (t < 65.0), 1.3, a)
    return a


def _turning_track(t: np.ndarray, dt: float):
    """Cruise, brake to the corner, quarter-turn left, accelerate away."""
    n = len(t)
    x = np.empty(n); y = np.empty(n)
    heading = 0.0
    v = 9.0
    px, py = 0.0, 0.0
    radius = 10.0
    for k in range(n):
        x[k], y[k] = px, py
        if t[k] < 8.0:
            a, omega = 0.0, 0.0
        elif t[k] < 10.0:
            a, omega = -2.5, 0.0
        elif heading < math.pi / 2:
            a, omega = 0.0, v / radius
        elif v < 10.0:
            a, omega = 1.5, 0.0
        else:
            a, omega = 0.0, 0.0
        heading = min(heading + omega * dt, math.pi / 2)
        v = max(0.0, v + a * dt)
        px += v * math.cos(heading) * dt
        py += v * math.sin(heading) * dt
    return x, y


def generate_scene(seed: int = 0, duration: float = 150.0, dt: float = 0.1,
                   turn_duration: float = 40.0) -> pd.DataFrame:
    """Meter-space trajectory table for the bundled scenario.

    Scene A (car following on two lanes) spans the full duration; scene B
    (the turning AV and its neighbors) is observed for ``turn_duration``
    seconds before those agents leave the covered area.
    """
    t = np.round(np.arange(0.0, duration + dt / 2, dt), 6)
    n = len(t)
    nb = min(n, int(round(turn_duration / dt)) + 1)
    tb = t[:nb]

    frames = []

    # --- scene A: two lanes heading +x -------------------------------
    a_lead = _lead_accel(t)
    v_lead, x_lead = _integrate(a_lead, v0=13.0, x0=0.0, dt=dt)
    frames.append(_straight_rows("car_a", "car", t, x_lead, np.zeros(n), "L1", 4.5, 1.8))

    v_av, x_av, a_av = _follow(v_lead, x_lead, v0=13.0, x0=-30.0, dt=dt)
    frames.append(_straight_rows("av_1", "av", t, x_av, np.zeros(n), "L1", 4.8, 1.9))

    v_b, x_b, _ = _follow(v_av, x_av, v0=13.0, x0=-60.0, dt=dt,
                          delay_steps=6, kp=0.22, kv=0.55)
    frames.append(_straight_rows("car_b", "car", t, x_b, np.zeros(n), "L1", 4.3, 1.8))

    a_c = 1.2 * (2 * math.pi / 40.0) * np.cos(2 * math.pi * t / 40.0 + 1.0)
    v_c, x_c = _integrate(a_c, v0=16.0, x0=-75.0, dt=dt)
    frames.append(_straight_rows("car_c", "car", t, x_c, np.full(n, 3.5), "L2", 4.6, 1.8))

    v_d, x_d = _integrate(np.zeros(n), v0=11.0, x0=25.0, dt=dt)
    frames.append(_straight_rows("truck_d", "truck", t, x_d, np.full(n, 3.5), "L2", 12.0, 2.5))

    v_e, x_e = _integrate(np.zeros(n), v0=5.5, x0=-18.0, dt=dt)
    frames.append(_straight_rows("cyclist_e", "cyclist", t, x_e, np.full(n, 6.5), "SH", 1.8, 0.6))

    # --- scene B: turning AV, offset 500 m north ---------------------
    x2, y2 = _turning_track(tb, dt)
    frames.append(_straight_rows("av_2", "av", tb, x2, y2 + 500.0, "M1", 4.8, 1.9))

    # follower that stays on the straight after the AV turns
    v_h = np.empty(nb); x_h = np.empty(nb)
    v_h[0], x_h[0] = 9.0, -28.0
    av2_v = np.gradient(x2, dt)
    for k in range(nb - 1):
        kd = max(0, k - 5)
        if y2[kd] < 0.5:  # leader still on the straight
            gap = x2[kd] - x_h[kd]
            acc = float(np.clip(0.25 * (gap - (4.0 + 2.0 * v_h[kd]))
                                + 0.6 * (av2_v[kd] - v_h[kd]), -4.0, 2.5))
        else:
            acc = 0.0
        v_h[k + 1] = max(0.0, v_h[k] + acc * dt)
        x_h[k + 1] = x_h[k] + v_h[k] * dt
    frames.append(_straight_rows("car_h", "car", tb, x_h, np.full(nb, 500.0), "M1", 4.4, 1.8))

    v_f, x_f = _integrate(np.zeros(nb), v0=10.0, x0=200.0, dt=dt)
    frames.append(_straight_rows("car_f", "car", tb, 200.0 - (x_f - 200.0),
                                 np.full(nb, 503.5), "M2", 4.5, 1.8))

    ped_y = 490.0 + 1.3 * tb
    frames.append(_straight_rows("ped_g", "pedestrian", tb, np.full(nb, 95.0),
                                 ped_y, "", 0.5, 0.5))

    return pd.concat(frames, ignore_index=True)


def write_synth_dataset(out_dir, seed: int = 0, duration: float = 150.0,
                        dt: float = 0.1) -> tuple[Path, Path]:
    """Write trajectories.csv (pixels) + config.yaml; returns their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scene = generate_scene(seed=seed, duration=duration, dt=dt)

    rng = np.random.default_rng(seed)
    px = scene["x"].to_numpy() * PX_PER_M + rng.normal(0.0, NOISE_PX, len(scene))
    py = scene["y"].to_numpy() * PX_PER_M + rng.normal(0.0, NOISE_PX, len(scene))
    table = scene.copy()
    table["x"] = np.round(px, 2)
    table["y"] = np.round(py, 2)

    csv_path = out_dir / "trajectories.csv"
    table.to_csv(csv_path, index=False, float_format="%.6g")

    cfg = cfgmod.RunConfig(
        seed=seed,
        out_dir="out",
        dataset_label="synth",
        dt=dt,
        input=cfgmod.InputConfig(path="trajectories.csv"),
        transform=cfgmod.FrameTransform(scale_x=1.0 / PX_PER_M, scale_y=1.0 / PX_PER_M),
        base_dir=str(out_dir),
    )
    cfg.search.lane_adjacency = {
        "L1": {"L2"}, "L2": {"L1", "SH"}, "SH": {"L2"},
        "M1": {"M2"}, "M2": {"M1"},
    }
    cfg.metrics.mlp_epochs = 300
    cfg_path = out_dir / "config.yaml"
    cfgmod.save_config(cfg, cfg_path)
    return csv_path, cfg_path
