"""Gaussian process regression surface over the Pareto set.

One objective is regressed on the other two with an anisotropic RBF
kernel plus a noise term,

    k(x, x') = sf^2 exp(-1/2 sum_d (x_d - x'_d)^2 / l_d^2) + sn^2 [x = x']

Hyperparameters maximize the log marginal likelihood over a
deterministic coarse-to-fine grid: the signal variance is profiled in
closed form, length scales and the noise-to-signal ratio are scanned on
log grids and refined once around the coarse optimum. Predictions are
evaluated on a regular lattice over [0, 1]^2 together with overshoot
diagnostics (lattice cells whose prediction exceeds the feasible bound
of 1; raw values are reported, never clipped here).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from trajpareto.errors import FitError

logger = logging.getLogger(__name__)

AXES = ("S", "E", "I")
JITTER = 1e-10
MIN_PARETO_POINTS = 5


@dataclass
class KernelSearchConfig:
    length_scale_lo: float = 0.05
    length_scale_hi: float = 5.0
    n_length: int = 8
    noise_ratio_lo: float = 1e-6
    noise_ratio_hi: float = 1.0
    n_noise: int = 7
    refine_factor: float = 2.0
    n_refine: int = 5


@dataclass
class FrontierModel:
    dependent_axis: str
    input_axes: tuple
    train_inputs: np.ndarray      # (m, 2)
    train_targets: np.ndarray     # (m,)
    length_scales: np.ndarray     # (2,)
    signal_var: float
    noise_var: float
    y_mean: float
    lattice_size: int = 50
    grid_axes: tuple = ()         # (axis0 values, axis1 values)
    grid_pred: np.ndarray = None  # (lattice, lattice)
    grid_std: np.ndarray = None
    overshoot: dict = field(default_factory=dict)
    log_marginal_likelihood: float = float("nan")
    _chol: tuple = None
    _alpha: np.ndarray = None

    def kernel(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        d2 = np.zeros((len(A), len(B)))
        for d in range(A.shape[1]):
            d2 += ((A[:, d, None] - B[None, :, d]) / self.length_scales[d]) ** 2
        return self.signal_var * np.exp(-0.5 * d2)

    def predict(self, Xq: np.ndarray, with_std: bool = False):
        """Posterior mean (and latent std) at query inputs."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        ks = self.kernel(Xq, self.train_inputs)
        mean = self.y_mean + ks @ self._alpha
        if not with_std:
            return mean
        sol = cho_solve(self._chol, ks.T)
        var = np.maximum(self.signal_var - np.sum(ks * sol.T, axis=1), 0.0)
        return mean, np.sqrt(var)


def _lml_score(d2_unit, y, lengths, ratio, n):
    """Profiled log-marginal score (up to constants); larger is better.

    Returns (score, signal_var) with signal variance at its closed-form
    optimum sf^2 = y' Q^-1 y / n for Q = K_unit + ratio * I.
    """
    Q = np.exp(-0.5 * (d2_unit / lengths**2).sum(axis=2))
    Q[np.diag_indices(n)] += ratio + JITTER
    try:
        c, low = cho_factor(Q, lower=True)
    except np.linalg.LinAlgError:
        return -np.inf, 1.0
    sol = cho_solve((c, low), y)
    q = float(y @ sol)
    sf2 = max(q / n, 1e-12)
    logdet = 2.0 * float(np.sum(np.log(np.diag(c))))
    score = -n * np.log(sf2) - logdet - q / sf2
    return 0.5 * score, sf2


def fit_frontier(
    points: np.ndarray,
    dependent_axis: str = "I",
    lattice_size: int = 50,
    search: KernelSearchConfig | None = None,
) -> FrontierModel:
    """Fit the GPR frontier surface to Pareto-optimal (S, E, I) points.

    Refuses to fit with fewer than 5 points or with degenerate spread on
    an input axis (the Pareto set itself is still usable upstream).
    """
    search = search or KernelSearchConfig()
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 3:
        raise ValueError("frontier points must be (n, 3) in (S, E, I) order")
    if len(pts) < MIN_PARETO_POINTS:
        raise FitError(f"frontier fit refused: {len(pts)} Pareto points "
                       f"(need >= {MIN_PARETO_POINTS})")
    if dependent_axis not in AXES:
        raise ValueError(f"dependent_axis must be one of {AXES}")
    dep = AXES.index(dependent_axis)
    input_axes = tuple(a for a in AXES if a != dependent_axis)
    in_idx = [AXES.index(a) for a in input_axes]
    X = pts[:, in_idx]
    y = pts[:, dep]
    for d in range(2):
        if float(np.ptp(X[:, d])) < 1e-9:
            raise FitError(f"input axis {input_axes[d]} has no spread; "
                           "cannot fit a surface")

    n = len(y)
    y_mean = float(np.mean(y))
    yc = y - y_mean
    d2_unit = (X[:, None, :] - X[None, :, :]) ** 2  # (n, n, 2)

    lengths_grid = np.geomspace(search.length_scale_lo, search.length_scale_hi, search.n_length)
    ratio_grid = np.geomspace(search.noise_ratio_lo, search.noise_ratio_hi, search.n_noise)

    def scan(l1_grid, l2_grid, r_grid, best=None):
        for l1 in l1_grid:
            for l2 in l2_grid:
                lengths = np.array([l1, l2])
                for r in r_grid:
                    score, sf2 = _lml_score(d2_unit, yc, lengths, r, n)
                    if best is None or score > best[0]:
                        best = (score, lengths, float(r), sf2)
        return best

    best = scan(lengths_grid, lengths_grid, ratio_grid)
    f, n_ref = search.refine_factor, search.n_refine
    l1c, l2c = best[1]
    best = scan(
        np.geomspace(l1c / f, l1c * f, n_ref),
        np.geomspace(l2c / f, l2c * f, n_ref),
        np.geomspace(max(best[2] / f, 1e-9), best[2] * f, n_ref),
        best,
    )
    score, lengths, ratio, sf2 = best
    noise_var = sf2 * ratio

    model = FrontierModel(
        dependent_axis=dependent_axis,
        input_axes=input_axes,
        train_inputs=X,
        train_targets=y,
        length_scales=lengths,
        signal_var=sf2,
        noise_var=noise_var,
        y_mean=y_mean,
        lattice_size=lattice_size,
        log_marginal_likelihood=score,
    )
    K = model.kernel(X, X)
    K[np.diag_indices(n)] += noise_var + JITTER * sf2
    model._chol = cho_factor(K, lower=True)
    model._alpha = cho_solve(model._chol, yc)

    ax = np.linspace(0.0, 1.0, lattice_size)
    g0, g1 = np.meshgrid(ax, ax, indexing="ij")
    Xq = np.column_stack([g0.ravel(), g1.ravel()])
    pred, std = model.predict(Xq, with_std=True)
    model.grid_axes = (ax, ax)
    model.grid_pred = pred.reshape(lattice_size, lattice_size)
    model.grid_std = std.reshape(lattice_size, lattice_size)

    over = model.grid_pred[model.grid_pred > 1.0] - 1.0
    model.overshoot = {
        "max": float(over.max()) if over.size else 0.0,
        "mean": float(over.mean()) if over.size else 0.0,
        "fraction": float(over.size) / model.grid_pred.size,
        "lattice_size": lattice_size,
    }
    logger.info(
        "frontier fit: axis=%s lengths=(%.3g, %.3g) sf2=%.3g sn2=%.3g "
        "overshoot max=%.4g frac=%.2f%%",
        dependent_axis, lengths[0], lengths[1], sf2, noise_var,
        model.overshoot["max"], 100 * model.overshoot["fraction"],
    )
    return model


def surface_points(model: FrontierModel) -> np.ndarray:
    """Lattice surface as (lattice^2, 3) rows in (S, E, I) order."""
    ax0, ax1 = model.grid_axes
    g0, g1 = np.meshgrid(ax0, ax1, indexing="ij")
    cols = {
        model.input_axes[0]: g0.ravel(),
        model.input_axes[1]: g1.ravel(),
        model.dependent_axis: model.grid_pred.ravel(),
    }
    return np.column_stack([cols[a] for a in AXES])
