"""Kernel selection: compiled Cython scan when available, numpy otherwise.

Set the environment variable ``TRAJPARETO_NO_EXT=1`` before import to force
the pure-Python path (used by the benchmark and the equivalence tests).
"""

import os

import numpy as np

from trajpareto._kernels.pareto_py import pareto_mask_py

if os.environ.get("TRAJPARETO_NO_EXT"):
    _pareto_mask_cy = None
else:
    try:
        from trajpareto._kernels._pareto_cy import pareto_mask_cy as _pareto_mask_cy
    except ImportError:
        _pareto_mask_cy = None

HAVE_COMPILED = _pareto_mask_cy is not None
BACKEND = "compiled" if HAVE_COMPILED else "python"


def pareto_mask(points: np.ndarray, force: str | None = None) -> np.ndarray:
    """Boolean mask of non-dominated rows of ``points`` (objectives maximized).

    ``force`` overrides the import-time selection: "compiled" or "python".
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array of shape (n, d)")
    backend = force or BACKEND
    if backend == "compiled":
        if _pareto_mask_cy is None:
            raise RuntimeError("compiled kernel requested but not available")
        return _pareto_mask_cy(pts).astype(bool)
    if backend == "python":
        return pareto_mask_py(pts).astype(bool)
    raise ValueError(f"unknown kernel backend: {backend!r}")
