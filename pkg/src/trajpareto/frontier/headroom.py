"""Headroom: nonnegative per-objective gap to the fitted frontier.

Each observation is projected to its nearest surface point (Euclidean
distance in (S, E, I) over the prediction lattice; optionally the raw
Pareto points instead), and headroom along objective k is
max(0, frontier_k - x_k). Medians aggregate over all observations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from trajpareto.frontier.gpr import AXES, FrontierModel, surface_points


@dataclass
class HeadroomReport:
    per_point: np.ndarray   # (n, 3) headroom triples in (S, E, I) order
    medians: dict           # axis -> median headroom
    reference: str          # "surface" | "set"


def headroom(x, reference_points: np.ndarray) -> np.ndarray:
    """Headroom triple of one observation against reference (m, 3) points."""
    x = np.asarray(x, dtype=float)
    d2 = np.sum((reference_points - x) ** 2, axis=1)
    nearest = reference_points[int(np.argmin(d2))]
    return np.maximum(0.0, nearest - x)


def headroom_report(
    vectors: np.ndarray,
    model: FrontierModel | None = None,
    pareto_points: np.ndarray | None = None,
    reference: str = "surface",
) -> HeadroomReport:
    """Headroom for every (S, E, I) row against the chosen reference."""
    if reference == "surface":
        if model is None:
            raise ValueError("surface headroom needs a fitted frontier model")
        ref = surface_points(model)
    elif reference == "set":
        if pareto_points is None:
            raise ValueError("set headroom needs the Pareto points")
        ref = np.atleast_2d(np.asarray(pareto_points, dtype=float))
    else:
        raise ValueError(f"unknown headroom reference: {reference!r}")

    rows = np.atleast_2d(np.asarray(vectors, dtype=float))
    per_point = np.vstack([headroom(row, ref) for row in rows])
    medians = {axis: float(np.median(per_point[:, i])) for i, axis in enumerate(AXES)}
    return HeadroomReport(per_point=per_point, medians=medians, reference=reference)
