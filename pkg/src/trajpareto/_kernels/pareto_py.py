"""Pure-numpy non-dominated scan, the fallback for the compiled kernel.

Blocked vectorization keeps peak memory at block_size * n booleans while
staying far faster than a Python double loop.
"""

import numpy as np


def pareto_mask_py(pts: np.ndarray, block_size: int = 256) -> np.ndarray:
    """Mask of non-dominated rows (objectives maximized).

    Dominance: another row >= in every column and > in at least one.
    Duplicate rows never dominate each other, so all copies of a
    non-dominated point are kept.
    """
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    n = pts.shape[0]
    mask = np.ones(n, dtype=np.uint8)
    for start in range(0, n, block_size):
        stop = min(start + block_size, n)
        block = pts[start:stop]                       # (b, d)
        ge = (pts[None, :, :] >= block[:, None, :]).all(axis=2)   # (b, n)
        gt = (pts[None, :, :] > block[:, None, :]).any(axis=2)    # (b, n)
        dominated = (ge & gt).any(axis=1)
        mask[start:stop] = ~dominated
    return mask
