"""Pareto dominance and the non-dominated set.

Dominance maximizes all objectives: a dominates b when a >= b in every
component and a != b. Equal points never dominate each other, so all
duplicates of a non-dominated point are retained. The scan itself is
the simple O(n^2) loop with early termination, dispatched to the
compiled kernel when available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from trajpareto._kernels import pareto_mask


def dominates(a, b) -> bool:
    """True iff a is at least as good in all objectives and strictly
    better in at least one."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return bool(np.all(a >= b) and np.any(a > b))


@dataclass
class ParetoResult:
    mask: np.ndarray            # bool per row, True = non-dominated
    indices: np.ndarray         # sorted row indices of the Pareto set
    fraction: float
    mean_pareto: np.ndarray     # per-objective means over the Pareto set
    mean_dominated: np.ndarray  # per-objective means over the rest (NaN if empty)

    @property
    def count(self) -> int:
        return int(self.mask.sum())


def pareto_set(points, backend: str | None = None) -> ParetoResult:
    """Exact non-dominated subset of an (n, d) objective array."""
    pts = np.ascontiguousarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError("pareto_set needs a non-empty (n, d) array")
    mask = pareto_mask(pts, force=backend)
    indices = np.flatnonzero(mask)
    dominated = pts[~mask]
    mean_dom = dominated.mean(axis=0) if len(dominated) else np.full(pts.shape[1], np.nan)
    return ParetoResult(
        mask=mask,
        indices=indices,
        fraction=float(mask.sum()) / pts.shape[0],
        mean_pareto=pts[mask].mean(axis=0),
        mean_dominated=mean_dom,
    )
