"""Per-ego, per-timestep assembly of the five behavioral metrics.

For every ego (AV) timestep: detected agents get a risk score via the
spacing model (max retained as m_max, GPD tail probability above the
threshold), a validated leader gives headway, a validated follower
gives the reaction delay and string-stability gain, and the ego's own
kinematics give jerk magnitude and deceleration events. Rows merge on
(ego_id, t) with per-metric validity flags.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from trajpareto.errors import FitError
from trajpareto.ingest import AgentTrack
from trajpareto.interaction import (
    AffineSpacingPolicy, SearchConfig, ZoneConfig,
    assign_zone, compute_pair_geometry, find_follower, find_leader, time_index,
)
from trajpareto.metrics import motion
from trajpareto.metrics.delay import (
    XCORR_WINDOW, DelayModel, apply_refinement, estimate_delay_xcorr, refine_delay,
)
from trajpareto.metrics.spacing import (
    InteractionFeatures, SpacingModel, feature_matrix, fit_spacing_model,
    risk_from_survival,
)
from trajpareto.metrics.tail import TailModel, fit_gpd_tail, tail_exceedance_prob

logger = logging.getLogger(__name__)

METRIC_COLUMNS = [
    "ego_id", "t", "m_max", "tail_prob", "headway_dist", "headway_time",
    "gain", "tau", "jerk_mag", "jerk_flag", "decel_event_id", "decel_mag",
    "valid_risk", "valid_headway", "valid_gain", "valid_jerk", "valid_decel",
    "group",
]

PAIR_COLUMNS = ["ego_id", "agent_id", "t", "s", "rho", "rel_speed", "zone", "role"]


@dataclass
class MetricsConfig:
    ego_types: tuple = ("av",)
    zones: ZoneConfig = field(default_factory=ZoneConfig)
    policy: AffineSpacingPolicy = field(default_factory=AffineSpacingPolicy)
    search: SearchConfig = field(default_factory=SearchConfig)
    dt: float = 0.1
    regressor: str = "mlp"
    mlp_epochs: int = 500
    seed: int = 0
    min_spacing_pairs: int = 500
    gpd_percentile: float = 97.0
    min_exceedances: int = 50
    min_delay_records: int = 200
    a_min: float = motion.A_MIN_GAIN
    jerk_threshold: float = motion.JERK_THRESHOLD
    decel_threshold: float = motion.DECEL_THRESHOLD
    dataset_label: str = "default"


@dataclass
class MetricsResult:
    table: pd.DataFrame
    pairs: pd.DataFrame
    spacing_model: Optional[SpacingModel]
    tail_model: Optional[TailModel]
    delay_model: Optional[DelayModel]
    diagnostics: dict


def _lane_context(ego: AgentTrack, k: int, cand: AgentTrack, j: int,
                  heading_ego: float, heading_cand: float,
                  search: SearchConfig) -> str:
    diff = abs((math.degrees(heading_cand - heading_ego) + 180.0) % 360.0 - 180.0)
    if diff > 45.0:
        return "crossing"
    ego_lane = ego.lane_id[k] if ego.lane_id else None
    cand_lane = cand.lane_id[j] if cand.lane_id else None
    if ego_lane is not None and cand_lane is not None:
        if ego_lane == cand_lane:
            return "same"
        if cand_lane in search.lane_adjacency.get(ego_lane, ()):
            return "adjacent"
        return "other"
    return "same"


def _delay_window(ego_t: np.ndarray, ego_sig: np.ndarray, k: int,
                  cand: AgentTrack, cand_sig: np.ndarray,
                  dt: float, window: float = XCORR_WINDOW):
    """Aligned trailing acceleration windows, or None when the grid has
    holes or either track does not cover the span."""
    w = int(round(window / dt))
    if k + 1 < w:
        return None
    te = ego_t[k - w + 1: k + 1]
    if abs((te[-1] - te[0]) - (w - 1) * dt) > 1e-6:
        return None
    j = time_index(cand, ego_t[k])
    if j is None or j + 1 < w:
        return None
    tc = cand.t[j - w + 1: j + 1]
    if abs((tc[-1] - tc[0]) - (w - 1) * dt) > 1e-6:
        return None
    return ego_sig[k - w + 1: k + 1], cand_sig[j - w + 1: j + 1]


def _ego_rows(ego: AgentTrack, tracks: list[AgentTrack], cfg: MetricsConfig,
              a_long: dict, headings: dict):
    """First pass over one ego: interaction pairs, leader/follower picks,
    raw delays, kinematic metrics. Risk scores need the fitted spacing
    model and are filled in a second pass."""
    others = [tr for tr in tracks if tr.agent_id != ego.agent_id]
    heading_ego, _ = headings[ego.agent_id]
    rows = []
    pair_rows = []
    training = []
    fail_totals = {}
    for k in range(len(ego)):
        t = float(ego.t[k])
        ego_frame = ego.frame(k)
        ego_speed = math.hypot(ego.vx[k], ego.vy[k])

        detected = []
        for cand in others:
            j = time_index(cand, t)
            if j is None:
                continue
            pair = compute_pair_geometry(ego_frame, cand.frame(j), heading_ego[k])
            pair = assign_zone(pair, cfg.zones)
            if pair.zone is None:
                continue
            ctx = _lane_context(ego, k, cand, j, heading_ego[k],
                                headings[cand.agent_id][0][j], cfg.search)
            feats = InteractionFeatures(
                s_ij=pair.s_ij, rho_ij=pair.rho_ij, rel_speed=pair.rel_speed,
                ego_speed=ego_speed, agent_type=cand.agent_type,
                lane_context=ctx, dataset_context=cfg.dataset_label,
            )
            detected.append((pair, feats))
            if pair.s_ij > 0:
                training.append((feats, pair.s_ij))

        leader_id, fails = find_leader(ego, k, others, cfg.zones, cfg.search,
                                       ego_heading=heading_ego[k])
        for key, cnt in fails.items():
            fail_totals[f"leader_{key}"] = fail_totals.get(f"leader_{key}", 0) + cnt
        follower_id, fails = find_follower(ego, k, others, cfg.zones, cfg.policy,
                                           cfg.search, ego_heading=heading_ego[k])
        for key, cnt in fails.items():
            fail_totals[f"follower_{key}"] = fail_totals.get(f"follower_{key}", 0) + cnt

        headway_dist = headway_time = None
        if leader_id is not None:
            lead = next(tr for tr in others if tr.agent_id == leader_id)
            jl = time_index(lead, t)
            headway_dist, headway_time = motion.compute_headway(ego_frame, lead.frame(jl))

        tau_raw = None
        follower_record = None
        if follower_id is not None:
            foll = next(tr for tr in others if tr.agent_id == follower_id)
            jf = time_index(foll, t)
            windows = _delay_window(ego.t, a_long[ego.agent_id], k,
                                    foll, a_long[foll.agent_id], cfg.dt)
            if windows is not None:
                tau_raw = estimate_delay_xcorr(windows[0], windows[1], dt=cfg.dt)
            gap = math.hypot(ego.x[k] - foll.x[jf], ego.y[k] - foll.y[jf])
            follower_record = {
                "v_l": ego_speed,
                "v_f": math.hypot(foll.vx[jf], foll.vy[jf]),
                "d": gap,
                "a_l": a_long[ego.agent_id][k],
                "lane": (ego.lane_id[k] or "") if ego.lane_id else "",
                "type_f": foll.agent_type,
                "tau_raw": np.nan if tau_raw is None else tau_raw,
            }

        for pair, _ in detected:
            role = "neighbor"
            if pair.agent_id == leader_id and pair.zone == "forward":
                role = "leader"
            elif pair.agent_id == follower_id and pair.zone == "rear":
                role = "follower"
            pair_rows.append((ego.agent_id, pair.agent_id, t, pair.s_ij,
                              pair.rho_ij, pair.rel_speed, pair.zone, role))

        rows.append({
            "t": t, "k": k,
            "detected": detected,
            "leader_id": leader_id,
            "follower_id": follower_id,
            "headway_dist": headway_dist,
            "headway_time": headway_time,
            "follower_record": follower_record,
        })
    return rows, pair_rows, training, fail_totals


def compute_metrics(tracks: list[AgentTrack], cfg: MetricsConfig,
                    workers: int = 1) -> MetricsResult:
    """Run the full metric derivation over all ego tracks.

    Per-ego scans are independent; ``workers`` > 1 fans them out over a
    process pool. Results merge in sorted ego order either way, so the
    output is identical for any worker count.
    """
    egos = sorted((tr for tr in tracks if tr.agent_type in cfg.ego_types),
                  key=lambda tr: tr.agent_id)
    if not egos:
        raise FitError("no ego agents of types %r in the input" % (cfg.ego_types,))

    headings = {tr.agent_id: tr.headings() for tr in tracks}
    a_long = {tr.agent_id: motion.longitudinal_accel(tr) for tr in tracks}

    if workers > 1 and len(egos) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            scans = list(pool.map(
                _ego_rows, egos,
                [tracks] * len(egos), [cfg] * len(egos),
                [a_long] * len(egos), [headings] * len(egos),
            ))
    else:
        scans = [_ego_rows(ego, tracks, cfg, a_long, headings) for ego in egos]

    per_ego = {}
    pair_rows_all = []
    training = []
    diagnostics = {"leader_follower_failures": {}, "dropped_rows": 0}
    for ego, (rows, pair_rows, train, fails) in zip(egos, scans):
        per_ego[ego.agent_id] = rows
        pair_rows_all.extend(pair_rows)
        training.extend(train)
        for key, cnt in fails.items():
            bucket = diagnostics["leader_follower_failures"]
            bucket[key] = bucket.get(key, 0) + cnt

    spacing_model = None
    try:
        spacing_model = fit_spacing_model(
            training, kind=cfg.regressor, seed=cfg.seed,
            epochs=cfg.mlp_epochs, min_pairs=cfg.min_spacing_pairs,
        )
    except FitError as exc:
        logger.warning("spacing model unavailable: %s", exc)
    diagnostics["spacing_pairs"] = len(training)
    diagnostics["spacing_mae"] = spacing_model.mae if spacing_model else None

    # risk pass: survival of every detected pair, max per timestep
    for ego in egos:
        for row in per_ego[ego.agent_id]:
            m_max = None
            clamped = False
            if spacing_model is not None and row["detected"]:
                feats = feature_matrix([f for _, f in row["detected"]])
                svals = np.array([p.s_ij for p, _ in row["detected"]])
                ok = svals > 0
                if np.any(ok):
                    probs = spacing_model.survival(svals[ok], feats[ok])
                    scores = [risk_from_survival(p) for p in probs]
                    clamped = bool(np.any((probs <= 1e-12) | (probs >= 1 - 1e-12)))
                    m_max = float(np.max(scores))
            row["m_max"] = m_max
            row["risk_clamped"] = clamped

    m_values = [row["m_max"]
                for ego in egos for row in per_ego[ego.agent_id]
                if row["m_max"] is not None]
    tail_model = None
    if m_values:
        tail_model = fit_gpd_tail(m_values, percentile=cfg.gpd_percentile,
                                  min_exceedances=cfg.min_exceedances)

    # delay refinement over all follower records
    record_index = []
    record_rows = []
    for ego in egos:
        for row in per_ego[ego.agent_id]:
            if row["follower_record"] is not None:
                record_index.append((ego.agent_id, row["k"]))
                record_rows.append(row["follower_record"])
    delay_model = None
    tau_final = {}
    if record_rows:
        records = pd.DataFrame(record_rows)
        delay_model = refine_delay(records, min_records=cfg.min_delay_records)
        taus, replaced = apply_refinement(records, delay_model)
        diagnostics["tau_replaced"] = int(replaced.sum())
        for (ego_id, k), tau in zip(record_index, taus):
            tau_final[(ego_id, k)] = float(tau) if np.isfinite(tau) else None

    out_rows = []
    tracks_by_id = {tr.agent_id: tr for tr in tracks}
    for ego in egos:
        al = a_long[ego.agent_id]
        jerk = motion.jerk_magnitude(ego.jx, ego.jy)
        jflags = motion.jerk_flags(jerk, cfg.jerk_threshold)
        decel = motion.decel_magnitude(al)
        events = motion.detect_decel_events(al, cfg.decel_threshold)
        event_id = np.zeros(len(ego), dtype=int)
        for idx, ev in enumerate(events, start=1):
            event_id[ev.start: ev.end + 1] = idx
        jerk_ok = bool(ego.flags.get("jerk_valid", len(ego) >= 4))
        accel_ok = bool(ego.flags.get("accel_valid", len(ego) >= 3))

        for row in per_ego[ego.agent_id]:
            k = row["k"]
            tau = tau_final.get((ego.agent_id, k))
            gain = None
            if row["follower_id"] is not None and tau is not None:
                foll = tracks_by_id[row["follower_id"]]
                delayed = motion.interp_at(foll.t, a_long[foll.agent_id],
                                           float(ego.t[k]) - tau)
                gain = motion.stability_gain(delayed, float(al[k]), cfg.a_min)
            m_max = row["m_max"]
            tail_prob = None
            if m_max is not None and tail_model is not None and m_max > tail_model.u:
                tail_prob = tail_exceedance_prob(m_max, tail_model)
            out_rows.append({
                "ego_id": ego.agent_id,
                "t": row["t"],
                "m_max": np.nan if m_max is None else m_max,
                "tail_prob": np.nan if tail_prob is None else tail_prob,
                "headway_dist": np.nan if row["headway_dist"] is None else row["headway_dist"],
                "headway_time": np.nan if row["headway_time"] is None else row["headway_time"],
                "gain": np.nan if gain is None else gain,
                "tau": np.nan if tau is None else tau,
                "jerk_mag": float(jerk[k]) if jerk_ok and np.isfinite(jerk[k]) else np.nan,
                "jerk_flag": bool(jflags[k]) if jerk_ok and np.isfinite(jerk[k]) else False,
                "decel_event_id": int(event_id[k]),
                "decel_mag": float(decel[k]) if accel_ok and np.isfinite(decel[k]) else np.nan,
                "valid_risk": m_max is not None,
                "valid_headway": row["headway_dist"] is not None,
                "valid_gain": gain is not None,
                "valid_jerk": jerk_ok and bool(np.isfinite(jerk[k])),
                "valid_decel": accel_ok and bool(np.isfinite(decel[k])),
                "group": cfg.dataset_label,
            })

    table = pd.DataFrame(out_rows, columns=METRIC_COLUMNS)
    table = table.sort_values(["ego_id", "t"], kind="mergesort").reset_index(drop=True)
    pairs = pd.DataFrame(pair_rows_all, columns=PAIR_COLUMNS)
    pairs = pairs.sort_values(["ego_id", "t", "agent_id"], kind="mergesort").reset_index(drop=True)
    diagnostics["n_rows"] = len(table)
    diagnostics["n_pairs"] = len(pairs)
    return MetricsResult(table=table, pairs=pairs, spacing_model=spacing_model,
                         tail_model=tail_model, delay_model=delay_model,
                         diagnostics=diagnostics)
