"""Context-conditioned spacing model and the surrogate risk score.

Conditional spacing is lognormal: ln s | X ~ Normal(mu(X), sigma(X)^2).
Two regressor families estimate (mu, sigma):

* "mlp"    - small feedforward network (2 hidden layers, width 32,
             softplus sigma head) trained full-batch with Adam on the
             lognormal negative log-likelihood; seeded, deterministic.
* "linear" - closed-form least squares on ln s with a global residual
             sigma; deterministic baseline for tests.

Both get a heteroskedasticity correction: sigma is rescaled per
quantile bin of predicted mu using held-out standardized residuals.

The risk score of an observed spacing s* is

    M = log10( ln 0.5 / ln P(S > s* | X) )

so M = 0 when s* sits at the conditional median and M > 0 flags
elevated risk.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtr

from trajpareto.errors import FitError

logger = logging.getLogger(__name__)

LANE_CONTEXTS = ("same", "adjacent", "crossing", "other")
FEATURE_AGENT_TYPES = ("av", "car", "truck", "bus", "pedestrian", "cyclist", "scooter", "other")

P_FLOOR = 1e-12
SIGMA_FLOOR = 1e-3


@dataclass
class InteractionFeatures:
    """One ego-agent interaction's context (s_ij is the evaluation target,
    not a regressor input)."""

    s_ij: float
    rho_ij: float
    rel_speed: float
    ego_speed: float
    agent_type: str = "car"
    lane_context: str = "same"
    dataset_context: str = "default"


def feature_matrix(features: list[InteractionFeatures]) -> np.ndarray:
    """Numeric design rows: kinematics, bearing encoding, one-hot context."""
    n = len(features)
    d = 4 + len(FEATURE_AGENT_TYPES) + len(LANE_CONTEXTS)
    out = np.zeros((n, d))
    for i, f in enumerate(features):
        rho = math.radians(f.rho_ij)
        out[i, 0] = f.ego_speed
        out[i, 1] = f.rel_speed
        out[i, 2] = math.sin(rho)
        out[i, 3] = math.cos(rho)
        try:
            out[i, 4 + FEATURE_AGENT_TYPES.index(f.agent_type)] = 1.0
        except ValueError:
            out[i, 4 + FEATURE_AGENT_TYPES.index("other")] = 1.0
        try:
            out[i, 4 + len(FEATURE_AGENT_TYPES) + LANE_CONTEXTS.index(f.lane_context)] = 1.0
        except ValueError:
            out[i, 4 + len(FEATURE_AGENT_TYPES) + LANE_CONTEXTS.index("other")] = 1.0
    return out


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class SpacingModel:
    """Fitted conditional lognormal spacing model."""

    kind: str
    norm_mean: np.ndarray
    norm_std: np.ndarray
    params: dict
    sigma_bin_edges: np.ndarray = field(default_factory=lambda: np.array([]))
    sigma_bin_scale: np.ndarray = field(default_factory=lambda: np.array([]))
    mae: float = float("nan")
    n_train: int = 0

    def _standardize(self, F: np.ndarray) -> np.ndarray:
        return (F - self.norm_mean) / self.norm_std

    def _raw_mu_sigma(self, F: np.ndarray):
        Z = self._standardize(F)
        if self.kind == "linear":
            mu = Z @ self.params["w"] + self.params["b"]
            sigma = np.full_like(mu, self.params["sigma0"])
        elif self.kind == "mlp":
            p = self.params
            h1 = np.tanh(Z @ p["W1"] + p["b1"])
            h2 = np.tanh(h1 @ p["W2"] + p["b2"])
            mu = h2 @ p["w_mu"] + p["b_mu"]
            sigma = _softplus(h2 @ p["w_sig"] + p["b_sig"]) + SIGMA_FLOOR
        else:
            raise ValueError(f"unknown regressor kind: {self.kind!r}")
        return mu, sigma

    def mu_sigma(self, F: np.ndarray):
        """Predicted (mu, sigma) with the heteroskedastic bin correction."""
        mu, sigma = self._raw_mu_sigma(np.atleast_2d(F))
        if self.sigma_bin_edges.size:
            idx = np.clip(
                np.searchsorted(self.sigma_bin_edges, mu, side="right") - 1,
                0, len(self.sigma_bin_scale) - 1,
            )
            sigma = sigma * self.sigma_bin_scale[idx]
        return mu, np.maximum(sigma, SIGMA_FLOOR)

    def survival(self, s_star, F: np.ndarray) -> np.ndarray:
        """P(S > s* | X) under the fitted lognormal."""
        mu, sigma = self.mu_sigma(F)
        z = (np.log(np.asarray(s_star, dtype=float)) - mu) / sigma
        return ndtr(-z)


def _nll_grads_mlp(p, Z, y):
    """Forward + backward pass for the lognormal NLL; returns (loss, grads)."""
    n = len(y)
    a1 = Z @ p["W1"] + p["b1"]
    h1 = np.tanh(a1)
    a2 = h1 @ p["W2"] + p["b2"]
    h2 = np.tanh(a2)
    mu = h2 @ p["w_mu"] + p["b_mu"]
    z_sig = h2 @ p["w_sig"] + p["b_sig"]
    sigma = _softplus(z_sig) + SIGMA_FLOOR

    r = y - mu
    loss = float(np.mean(np.log(sigma) + 0.5 * r**2 / sigma**2))

    dmu = (-r / sigma**2) / n
    dsigma = (1.0 / sigma - r**2 / sigma**3) / n
    dz_sig = dsigma * _sigmoid(z_sig)

    dh2 = np.outer(dmu, p["w_mu"]) + np.outer(dz_sig, p["w_sig"])
    da2 = dh2 * (1.0 - h2**2)
    dh1 = da2 @ p["W2"].T
    da1 = dh1 * (1.0 - h1**2)

    grads = {
        "w_mu": h2.T @ dmu, "b_mu": float(np.sum(dmu)),
        "w_sig": h2.T @ dz_sig, "b_sig": float(np.sum(dz_sig)),
        "W2": h1.T @ da2, "b2": da2.sum(axis=0),
        "W1": Z.T @ da1, "b1": da1.sum(axis=0),
    }
    return loss, grads


def _fit_mlp(Z, y, seed, width=32, epochs=500, lr=1e-2):
    rng = np.random.default_rng(seed)
    d = Z.shape[1]
    p = {
        "W1": rng.normal(0, 1.0 / math.sqrt(d), (d, width)),
        "b1": np.zeros(width),
        "W2": rng.normal(0, 1.0 / math.sqrt(width), (width, width)),
        "b2": np.zeros(width),
        "w_mu": rng.normal(0, 1.0 / math.sqrt(width), width),
        "b_mu": float(np.mean(y)),
        "w_sig": rng.normal(0, 1.0 / math.sqrt(width), width),
        "b_sig": float(np.log(np.expm1(max(np.std(y), 1e-2)))),
    }
    m = {k: np.zeros_like(v) if isinstance(v, np.ndarray) else 0.0 for k, v in p.items()}
    v = {k: np.zeros_like(val) if isinstance(val, np.ndarray) else 0.0 for k, val in p.items()}
    b1, b2, eps = 0.9, 0.999, 1e-8
    for step in range(1, epochs + 1):
        _, g = _nll_grads_mlp(p, Z, y)
        for k in p:
            m[k] = b1 * m[k] + (1 - b1) * g[k]
            v[k] = b2 * v[k] + (1 - b2) * g[k] ** 2
            mhat = m[k] / (1 - b1**step)
            vhat = v[k] / (1 - b2**step)
            p[k] = p[k] - lr * mhat / (np.sqrt(vhat) + eps)
    return p


def fit_spacing_model(
    pairs: list[tuple[InteractionFeatures, float]],
    kind: str = "mlp",
    seed: int = 0,
    holdout_fraction: float = 0.2,
    n_sigma_bins: int = 8,
    epochs: int = 500,
    lr: float = 1e-2,
    min_pairs: int = 500,
) -> SpacingModel:
    """Fit the conditional lognormal spacing model.

    Requires >= ``min_pairs`` training pairs with positive spacing; raises
    FitError on degenerate data (all spacings equal). MAE is reported on a
    held-out 20% split using the conditional median exp(mu) as point
    prediction.
    """
    if len(pairs) < min_pairs:
        raise FitError(f"spacing model needs >= {min_pairs} pairs, got {len(pairs)}")
    spacings = np.array([s for _, s in pairs], dtype=float)
    if np.any(~np.isfinite(spacings)) or np.any(spacings <= 0):
        raise FitError("spacings must be finite and > 0")
    y = np.log(spacings)
    if float(np.std(y)) < 1e-12:
        raise FitError("degenerate spacing data: all spacings equal")

    F = feature_matrix([f for f, _ in pairs])
    norm_mean = F.mean(axis=0)
    norm_std = F.std(axis=0)
    norm_std[norm_std < 1e-9] = 1.0
    Z = (F - norm_mean) / norm_std

    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(y))
    n_holdout = max(1, int(round(holdout_fraction * len(y))))
    hold, train = perm[:n_holdout], perm[n_holdout:]

    if kind == "linear":
        A = np.column_stack([Z[train], np.ones(len(train))])
        coef, *_ = np.linalg.lstsq(A, y[train], rcond=None)
        w, b = coef[:-1], float(coef[-1])
        resid = y[train] - (Z[train] @ w + b)
        sigma0 = max(float(np.std(resid)), SIGMA_FLOOR)
        params = {"w": w, "b": b, "sigma0": sigma0}
    elif kind == "mlp":
        params = _fit_mlp(Z[train], y[train], seed=seed, epochs=epochs, lr=lr)
    else:
        raise FitError(f"unknown regressor kind: {kind!r}")

    model = SpacingModel(kind=kind, norm_mean=norm_mean, norm_std=norm_std,
                         params=params, n_train=len(train))

    # heteroskedastic correction: rescale sigma per mu-quantile bin using
    # held-out standardized residuals
    mu_h, sig_h = model._raw_mu_sigma(F[hold])
    z_resid = (y[hold] - mu_h) / sig_h
    if n_sigma_bins > 0 and len(hold) >= 4 * n_sigma_bins:
        qs = np.linspace(0, 100, n_sigma_bins + 1)
        edges = np.percentile(mu_h, qs)[:-1]
        idx = np.clip(np.searchsorted(edges, mu_h, side="right") - 1, 0, n_sigma_bins - 1)
        scale = np.ones(n_sigma_bins)
        for b_i in range(n_sigma_bins):
            sel = idx == b_i
            if np.sum(sel) >= 5:
                scale[b_i] = np.clip(float(np.std(z_resid[sel])), 0.25, 4.0)
        model.sigma_bin_edges = edges
        model.sigma_bin_scale = scale

    mu_h, _ = model.mu_sigma(F[hold])
    model.mae = float(np.mean(np.abs(spacings[hold] - np.exp(mu_h))))
    logger.info("spacing model (%s): n_train=%d held-out MAE=%.3f m",
                kind, model.n_train, model.mae)
    return model


def risk_from_survival(p: float) -> float:
    """M = log10(ln 0.5 / ln P); P is clamped away from {0, 1}."""
    p = min(max(float(p), P_FLOOR), 1.0 - P_FLOOR)
    return math.log10(math.log(0.5) / math.log(p))


def risk_score(s_star: float, X: InteractionFeatures, model: SpacingModel) -> tuple[float, bool]:
    """Risk score of observed spacing s* in context X.

    Returns (M, clamped) where ``clamped`` flags survival probabilities
    that were numerically 0 or 1 before clamping.
    """
    if s_star <= 0:
        raise ValueError("s_star must be > 0")
    p = float(model.survival(s_star, feature_matrix([X]))[0])
    clamped = p <= P_FLOOR or p >= 1.0 - P_FLOOR
    return risk_from_survival(p), clamped
