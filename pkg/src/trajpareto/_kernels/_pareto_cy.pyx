# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled non-dominated scan.

Row-major C-contiguous input of shape (n, d), objectives maximized.
A row is kept when no other row is >= in every column and > in at
least one. The double loop terminates early as soon as a dominator
is found, which is what makes the scan cheap on real data where most
rows are dominated quickly.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def pareto_mask_cy(double[:, ::1] pts):
    """Return a uint8 mask: 1 where the row is non-dominated."""
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t d = pts.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] mask = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] mv = mask
    cdef Py_ssize_t i, j, k
    cdef bint ge, gt

    with nogil:
        for i in range(n):
            for j in range(n):
                if j == i:
                    continue
                ge = True
                gt = False
                for k in range(d):
                    if pts[j, k] < pts[i, k]:
                        ge = False
                        break
                    if pts[j, k] > pts[i, k]:
                        gt = True
                if ge and gt:
                    mv[i] = 0
                    break
    return mask
