"""Peaks-over-threshold tail of the risk score.

Exceedances of M above a high empirical percentile u follow a
generalized Pareto distribution with shape xi and scale beta; the
probability that a score already above the threshold is exceeded again
is

    P(M' > M) = (1 + xi (M - u) / beta)^(-1/xi)

with the exponential limit exp(-(M - u)/beta) at xi = 0. Parameters
come from maximum likelihood with method-of-moments initialization and
the shape constrained to [-0.5, 1].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from trajpareto.errors import DomainError, FitError

logger = logging.getLogger(__name__)

XI_ZERO_TOL = 1e-9
XI_BOUNDS = (-0.5, 1.0)


@dataclass
class TailModel:
    u: float
    xi: float
    beta: float
    n_exceedances: int
    percentile: float = 97.0


def _gpd_nll(theta: np.ndarray, exc: np.ndarray) -> float:
    xi, log_beta = theta
    beta = np.exp(log_beta)
    n = len(exc)
    if abs(xi) < XI_ZERO_TOL:
        return n * log_beta + float(np.sum(exc)) / beta
    z = 1.0 + xi * exc / beta
    if np.min(z) <= 0:
        return 1e12
    return n * log_beta + (1.0 + 1.0 / xi) * float(np.sum(np.log(z)))


def fit_gpd_tail(
    m_values,
    percentile: float = 97.0,
    min_exceedances: int = 50,
) -> TailModel | None:
    """Fit the GPD tail above the empirical ``percentile`` of m_values.

    Returns None (tail disabled, downstream tail probabilities absent)
    when fewer than ``min_exceedances`` samples exceed the threshold.
    """
    m = np.asarray(m_values, dtype=float)
    m = m[np.isfinite(m)]
    if m.size == 0:
        raise FitError("no finite risk scores to fit a tail on")
    u = float(np.percentile(m, percentile))
    exc = m[m > u] - u
    if len(exc) < min_exceedances:
        logger.warning(
            "tail disabled: %d exceedances above u=%.4f (need >= %d)",
            len(exc), u, min_exceedances,
        )
        return None

    mean, var = float(np.mean(exc)), float(np.var(exc))
    if var <= 0:
        raise FitError("degenerate exceedances: zero variance")
    xi_mom = np.clip(0.5 * (1.0 - mean**2 / var), XI_BOUNDS[0] + 0.05, XI_BOUNDS[1] - 0.05)
    beta_mom = max(mean * (1.0 - xi_mom), 1e-8)

    starts = [
        (float(xi_mom), float(np.log(beta_mom))),
        (0.1, float(np.log(mean))),
        (-0.1, float(np.log(mean))),
    ]
    best = None
    for start in starts:
        res = minimize(
            _gpd_nll, np.array(start), args=(exc,), method="L-BFGS-B",
            bounds=[XI_BOUNDS, (np.log(1e-8), np.log(1e8))],
        )
        if best is None or res.fun < best.fun:
            best = res
    xi, beta = float(best.x[0]), float(np.exp(best.x[1]))
    logger.info("GPD tail: u=%.4f xi=%.4f beta=%.4f n_exc=%d", u, xi, beta, len(exc))
    return TailModel(u=u, xi=xi, beta=beta, n_exceedances=len(exc), percentile=percentile)


def tail_exceedance_prob(m: float, tail: TailModel) -> float:
    """P(M' > M) for a score at or above the threshold; 1 exactly at M = u."""
    if m < tail.u:
        raise DomainError(f"tail probability undefined below threshold ({m} < {tail.u})")
    e = m - tail.u
    if abs(tail.xi) < XI_ZERO_TOL:
        p = np.exp(-e / tail.beta)
    else:
        base = 1.0 + tail.xi * e / tail.beta
        p = base ** (-1.0 / tail.xi) if base > 0 else 0.0
    return float(np.clip(p, 0.0, 1.0))
