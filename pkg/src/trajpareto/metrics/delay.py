"""Follower reaction delay: cross-correlation estimate plus a
context-sensitive additive refinement.

The raw delay is the nonnegative lag (capped at 3 s) maximizing the
per-lag Pearson correlation between follower and leader acceleration
histories inside a 5 s window. The refinement fits an additive model

    tau ~ s(v_l) + s(v_f) + s(d) + s(a_l) + f(lane) + f(type_f)

with penalized cubic B-spline smooths (second-difference penalty,
shared smoothing parameter by GCV) and categorical offsets; its
predictions replace raw estimates that are missing or more than 3 MAD
away from the model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.interpolate import BSpline

logger = logging.getLogger(__name__)

TAU_MAX = 3.0          # s, clamp for predicted and searched delays
XCORR_WINDOW = 5.0     # s
VARIANCE_TOL = 1e-10

CONTINUOUS_TERMS = ("v_l", "v_f", "d", "a_l")
CATEGORICAL_TERMS = ("lane", "type_f")


def estimate_delay_xcorr(
    a_leader,
    a_follower,
    dt: float = 0.1,
    max_lag: float = TAU_MAX,
    min_overlap: int = 10,
) -> float | None:
    """Delay of the follower signal behind the leader signal.

    Scans integer lags in [0, max_lag/dt], correlating leader[:n-lag]
    against follower[lag:]; ties resolve to the smallest lag. Returns
    None when either series has near-zero variance.
    """
    x = np.asarray(a_leader, dtype=float)
    y = np.asarray(a_follower, dtype=float)
    n = min(len(x), len(y))
    x, y = x[:n], y[:n]
    if n < min_overlap:
        return None
    if float(np.std(x)) < VARIANCE_TOL or float(np.std(y)) < VARIANCE_TOL:
        return None

    best_lag, best_r = None, -np.inf
    for lag in range(0, min(int(round(max_lag / dt)), n - min_overlap) + 1):
        xs = x[: n - lag] if lag else x
        ys = y[lag:]
        sx, sy = float(np.std(xs)), float(np.std(ys))
        if sx < VARIANCE_TOL or sy < VARIANCE_TOL:
            continue
        r = float(np.mean((xs - xs.mean()) * (ys - ys.mean())) / (sx * sy))
        if r > best_r + 1e-12:
            best_r, best_lag = r, lag
    if best_lag is None:
        return None
    return best_lag * dt


def _bspline_basis(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    xc = np.clip(x, knots[3], knots[-4])
    return BSpline.design_matrix(xc, knots, 3).toarray()


def _make_knots(values: np.ndarray, n_bases: int = 10) -> np.ndarray:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi - lo < 1e-9:
        hi = lo + 1.0
    interior = np.linspace(lo, hi, n_bases - 2)[1:-1]
    return np.r_[[lo] * 4, interior, [hi] * 4]


def _second_diff_penalty(n_bases: int) -> np.ndarray:
    D = np.diff(np.eye(n_bases), n=2, axis=0)
    return D.T @ D


@dataclass
class DelayModel:
    """Additive delay model: spline smooths + categorical offsets."""

    knots: dict = field(default_factory=dict)          # term -> knot vector
    basis_means: dict = field(default_factory=dict)    # term -> column means
    cat_levels: dict = field(default_factory=dict)     # term -> level order
    coef: np.ndarray = None
    lam: float = float("nan")
    pseudo_r2: float = float("nan")

    def _design(self, df: pd.DataFrame) -> np.ndarray:
        cols = [np.ones((len(df), 1))]
        for term in CONTINUOUS_TERMS:
            B = _bspline_basis(df[term].to_numpy(dtype=float), self.knots[term])
            cols.append(B - self.basis_means[term])
        for term in CATEGORICAL_TERMS:
            levels = self.cat_levels[term]
            vals = df[term].astype(str).to_numpy()
            onehot = np.zeros((len(df), max(len(levels) - 1, 0)))
            for i, lev in enumerate(levels[1:]):
                onehot[:, i] = vals == lev
            cols.append(onehot)
        return np.hstack(cols)

    def predict(self, df: pd.DataFrame) -> np.ndarray:
        """Predicted delays, clamped to [0, TAU_MAX] s."""
        tau = self._design(df) @ self.coef
        return np.clip(tau, 0.0, TAU_MAX)


def refine_delay(
    records: pd.DataFrame,
    min_records: int = 200,
    n_bases: int = 10,
    lam_grid=None,
) -> DelayModel | None:
    """Fit the additive refinement on raw delay records.

    ``records`` needs columns v_l, v_f, d, a_l, lane, type_f, tau_raw.
    Rows with missing tau_raw are ignored for fitting. Returns None
    (refinement skipped, raw delays used) when fewer than
    ``min_records`` usable rows exist.
    """
    usable = records.dropna(subset=["tau_raw"])
    if len(usable) < min_records:
        logger.warning("delay refinement skipped: %d usable records (need >= %d)",
                       len(usable), min_records)
        return None

    y = usable["tau_raw"].to_numpy(dtype=float)
    model = DelayModel()
    penalty_blocks = [np.zeros((1, 1))]
    for term in CONTINUOUS_TERMS:
        vals = usable[term].to_numpy(dtype=float)
        knots = _make_knots(vals, n_bases)
        B = _bspline_basis(vals, knots)
        model.knots[term] = knots
        model.basis_means[term] = B.mean(axis=0)
        penalty_blocks.append(_second_diff_penalty(B.shape[1]))
    for term in CATEGORICAL_TERMS:
        levels = sorted(usable[term].astype(str).unique().tolist())
        model.cat_levels[term] = levels
        penalty_blocks.append(np.zeros((max(len(levels) - 1, 0),) * 2))

    X = model._design(usable)
    P = np.zeros((X.shape[1], X.shape[1]))
    at = 0
    for blk in penalty_blocks:
        k = blk.shape[0]
        P[at:at + k, at:at + k] = blk
        at += k

    XtX = X.T @ X
    Xty = X.T @ y
    n = len(y)
    ridge = 1e-10 * np.eye(X.shape[1])

    if lam_grid is None:
        lam_grid = np.logspace(-4, 6, 21)
    best = None
    for lam in lam_grid:
        A = XtX + lam * P + ridge
        coef = np.linalg.solve(A, Xty)
        fitted = X @ coef
        rss = float(np.sum((y - fitted) ** 2))
        edf = float(np.trace(np.linalg.solve(A, XtX)))
        denom = max(n - edf, 1e-6)
        gcv = n * rss / denom**2
        if best is None or gcv < best[0]:
            best = (gcv, lam, coef, rss)
    _, model.lam, model.coef, rss = best
    tss = float(np.sum((y - y.mean()) ** 2))
    model.pseudo_r2 = 1.0 - rss / tss if tss > 0 else 1.0
    logger.info("delay refinement: lambda=%.3g pseudo-R2=%.3f on %d records",
                model.lam, model.pseudo_r2, len(usable))
    return model


def apply_refinement(
    records: pd.DataFrame,
    model: DelayModel | None,
    mad_factor: float = 3.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Final delays: raw where trustworthy, model prediction where the raw
    value is missing or an outlier (> mad_factor * MAD from the model).

    Returns (tau_final, replaced_mask). With no model, raw values pass
    through unchanged.
    """
    tau_raw = records["tau_raw"].to_numpy(dtype=float)
    if model is None:
        return tau_raw.copy(), np.zeros(len(tau_raw), dtype=bool)
    pred = model.predict(records)
    resid = tau_raw - pred
    finite = np.isfinite(resid)
    replaced = ~finite
    if np.any(finite):
        centered = np.abs(resid[finite] - np.median(resid[finite]))
        mad = float(np.median(centered))
        if mad > 0:
            outlier = np.zeros_like(replaced)
            outlier[finite] = np.abs(resid[finite]) > mad_factor * mad
            replaced |= outlier
    tau = np.where(replaced, pred, tau_raw)
    return np.clip(tau, 0.0, TAU_MAX), replaced
