"""Composite objective construction: normalization, (S, E, I) scores,
and KNN imputation of gaps.

Each metric is min-max normalized within its dataset group and inverted
(1 - m) because lower raw values are better for all five defaults. The
composites are unweighted means:

    S = mean(inverted risk)
    E = mean(inverted headway, inverted gain)
    I = mean(inverted jerk, inverted decel)

An objective with any missing constituent stays missing and is filled
by distance-weighted KNN over the complete vectors of the same group.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from trajpareto.errors import FitError

logger = logging.getLogger(__name__)

OBJECTIVE_COLUMNS = ["ego_id", "t", "S", "E", "I",
                     "imputed_S", "imputed_E", "imputed_I", "group"]

# metric column -> (objective, invert). All five are lower-is-better.
DEFAULT_CONSTITUENTS = {
    "m_max": ("S", True),
    "headway_dist": ("E", True),
    "gain": ("E", True),
    "jerk_mag": ("I", True),
    "decel_mag": ("I", True),
}


@dataclass
class NormalizationContext:
    """Per-group, per-metric (min, max) plus inversion flags."""

    bounds: dict = field(default_factory=dict)       # (group, metric) -> (min, max)
    invert: dict = field(default_factory=dict)       # metric -> bool
    degenerate: list = field(default_factory=list)   # (group, metric) with max == min

    def to_dict(self) -> dict:
        return {
            "bounds": {f"{g}|{m}": [lo, hi] for (g, m), (lo, hi) in sorted(self.bounds.items())},
            "invert": dict(sorted(self.invert.items())),
            "degenerate": [f"{g}|{m}" for g, m in self.degenerate],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationContext":
        ctx = cls()
        for key, (lo, hi) in d["bounds"].items():
            g, m = key.split("|", 1)
            ctx.bounds[(g, m)] = (float(lo), float(hi))
        ctx.invert = {k: bool(v) for k, v in d["invert"].items()}
        ctx.degenerate = [tuple(k.split("|", 1)) for k in d["degenerate"]]
        return ctx


def build_context(table: pd.DataFrame, metrics=None, group_col: str = "group") -> NormalizationContext:
    """Min/max per metric within each group, over finite values only."""
    metrics = metrics or list(DEFAULT_CONSTITUENTS)
    ctx = NormalizationContext(invert={m: DEFAULT_CONSTITUENTS.get(m, (None, True))[1]
                                       for m in metrics})
    for group, grp in table.groupby(group_col, sort=True):
        for m in metrics:
            vals = grp[m].to_numpy(dtype=float)
            vals = vals[np.isfinite(vals)]
            if vals.size == 0:
                continue
            lo, hi = float(vals.min()), float(vals.max())
            ctx.bounds[(str(group), m)] = (lo, hi)
            if hi <= lo:
                ctx.degenerate.append((str(group), m))
                logger.warning("degenerate normalization for %s in group %s "
                               "(min == max == %g); mapping to 0.5", m, group, lo)
    return ctx


def minmax_normalize(values, group: str, metric: str, ctx: NormalizationContext) -> np.ndarray:
    """Affine map to [0, 1] within the group context, inverted when the
    metric is lower-is-better. Degenerate (max == min) maps to 0.5."""
    vals = np.asarray(values, dtype=float)
    key = (group, metric)
    if key not in ctx.bounds:
        return np.full_like(vals, np.nan)
    lo, hi = ctx.bounds[key]
    if hi <= lo:
        out = np.where(np.isfinite(vals), 0.5, np.nan)
    else:
        out = (vals - lo) / (hi - lo)
    if ctx.invert.get(metric, False):
        out = 1.0 - out
    return out


def percentile_filter(table: pd.DataFrame, metrics=None, lower: float = 0.1,
                      upper: float = 99.9, group_col: str = "group") -> tuple[pd.DataFrame, int]:
    """Drop rows whose present metrics fall outside the per-group
    percentile band. Missing values never cause a drop."""
    metrics = metrics or list(DEFAULT_CONSTITUENTS)
    keep = pd.Series(True, index=table.index)
    for _, grp in table.groupby(group_col, sort=True):
        idx = grp.index.to_numpy()
        for m in metrics:
            vals = grp[m].to_numpy(dtype=float)
            finite = np.isfinite(vals)
            if finite.sum() < 10:
                continue
            lo, hi = np.percentile(vals[finite], [lower, upper])
            bad = finite & ((vals < lo) | (vals > hi))
            keep.loc[idx[bad]] = False
    dropped = int((~keep).sum())
    if dropped:
        logger.info("percentile filter dropped %d of %d rows", dropped, len(table))
    return table.loc[keep.to_numpy()].reset_index(drop=True), dropped


def composite_scores(metrics_table: pd.DataFrame, ctx: NormalizationContext,
                     group_col: str = "group") -> pd.DataFrame:
    """Objective vectors per row; objectives with a missing constituent
    are left missing for imputation."""
    parts = {}
    groups = metrics_table[group_col].astype(str).to_numpy()
    for metric, (objective, _) in DEFAULT_CONSTITUENTS.items():
        norm = np.full(len(metrics_table), np.nan)
        for group in np.unique(groups):
            sel = groups == group
            norm[sel] = minmax_normalize(
                metrics_table.loc[sel, metric].to_numpy(dtype=float),
                group, metric, ctx)
        parts.setdefault(objective, []).append(norm)

    out = pd.DataFrame({
        "ego_id": metrics_table["ego_id"].to_numpy(),
        "t": metrics_table["t"].to_numpy(dtype=float),
        "group": groups,
    })
    for objective in ("S", "E", "I"):
        stack = np.vstack(parts[objective])
        # already-inverted constituents; mean only when all are present
        complete = np.all(np.isfinite(stack), axis=0)
        vals = np.full(len(metrics_table), np.nan)
        vals[complete] = stack[:, complete].mean(axis=0)
        out[objective] = vals
        out[f"imputed_{objective}"] = ~complete
    return out[OBJECTIVE_COLUMNS]


def knn_impute(vectors: pd.DataFrame, k: int = 5, group_col: str = "group") -> pd.DataFrame:
    """Fill missing objectives by inverse-distance-weighted KNN within the
    group, measured in the space of the query's available objectives.

    A zero-distance neighbor's value is copied (mean over exact ties).
    Groups with fewer complete vectors than k shrink k with a warning;
    zero complete vectors is a hard error.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    out = vectors.copy()
    obj_cols = ["S", "E", "I"]
    for group, grp in vectors.groupby(group_col, sort=True):
        X = grp[obj_cols].to_numpy(dtype=float)
        complete = np.all(np.isfinite(X), axis=1)
        holes = ~complete
        if not np.any(holes):
            continue
        if not np.any(complete):
            raise FitError(f"group {group!r}: no complete objective vectors to impute from")
        k_eff = min(k, int(complete.sum()))
        if k_eff < k:
            logger.warning("group %s: only %d complete vectors, k reduced from %d",
                           group, k_eff, k)
        donors = X[complete]
        donor_rows = grp.index.to_numpy()[complete]
        for local_idx in np.flatnonzero(holes):
            row = X[local_idx]
            have = np.isfinite(row)
            if np.any(have):
                d = np.sqrt(np.sum((donors[:, have] - row[have]) ** 2, axis=1))
            else:
                d = np.zeros(len(donors))
            order = np.lexsort((donor_rows, d))[:k_eff]
            dsel, vsel = d[order], donors[order]
            for dim in np.flatnonzero(~have):
                zero = dsel <= 0
                if np.any(zero):
                    value = float(vsel[zero, dim].mean())
                else:
                    w = 1.0 / dsel
                    value = float(np.sum(w * vsel[:, dim]) / np.sum(w))
                out.iat[out.index.get_loc(grp.index[local_idx]), out.columns.get_loc(obj_cols[dim])] = value
    return out
