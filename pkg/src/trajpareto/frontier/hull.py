"""3D convex hull by incremental insertion, for the piecewise frontier
comparison.

Triangular facets only; the upper envelope is the subset of facets
whose outward normal has a positive component along the dependent
objective axis. Coplanar or collinear inputs yield a degenerate-hull
flag instead of facets.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

AXES = ("S", "E", "I")


@dataclass
class HullResult:
    facets: np.ndarray                     # (f, 3) vertex indices
    degenerate: bool
    upper_facets: np.ndarray = field(default_factory=lambda: np.empty((0, 3), dtype=int))
    normals: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))

    @property
    def vertex_indices(self) -> np.ndarray:
        if self.facets.size == 0:
            return np.empty(0, dtype=int)
        return np.unique(self.facets)


def _face_normal(pts, face):
    a, b, c = pts[face[0]], pts[face[1]], pts[face[2]]
    return np.cross(b - a, c - a)


def _initial_tetrahedron(pts: np.ndarray, eps: float):
    n = len(pts)
    order = np.lexsort(pts.T[::-1])
    i0 = int(order[0])
    d = np.linalg.norm(pts - pts[i0], axis=1)
    i1 = int(np.argmax(d))
    if d[i1] <= eps:
        return None
    area = np.linalg.norm(np.cross(pts - pts[i0], pts[i1] - pts[i0]), axis=1)
    i2 = int(np.argmax(area))
    if area[i2] <= eps * d[i1]:
        return None
    normal = np.cross(pts[i1] - pts[i0], pts[i2] - pts[i0])
    vol = np.abs((pts - pts[i0]) @ normal)
    i3 = int(np.argmax(vol))
    if vol[i3] <= eps * np.linalg.norm(normal):
        return None
    return i0, i1, i2, i3


def convex_hull_frontier(points: np.ndarray, dependent_axis: str = "I",
                         eps_rel: float = 1e-9) -> HullResult:
    """Incremental-insertion hull of (n, 3) points with the upper-envelope
    facet subset along ``dependent_axis``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 3:
        raise ValueError("hull points must be (n, 3)")
    scale = float(np.max(np.ptp(pts, axis=0))) if len(pts) else 0.0
    eps = eps_rel * max(scale, 1.0)

    seed = _initial_tetrahedron(pts, eps) if len(pts) >= 4 else None
    if seed is None:
        return HullResult(facets=np.empty((0, 3), dtype=int), degenerate=True)

    i0, i1, i2, i3 = seed
    interior = pts[[i0, i1, i2, i3]].mean(axis=0)

    def orient(face):
        normal = _face_normal(pts, face)
        if normal @ (interior - pts[face[0]]) > 0:
            return (face[0], face[2], face[1])
        return face

    faces = {orient(f) for f in
             [(i0, i1, i2), (i0, i1, i3), (i0, i2, i3), (i1, i2, i3)]}

    remaining = [i for i in range(len(pts)) if i not in {i0, i1, i2, i3}]
    for p in remaining:
        visible = []
        for face in faces:
            normal = _face_normal(pts, face)
            nn = np.linalg.norm(normal)
            if nn <= 0:
                continue
            if normal @ (pts[p] - pts[face[0]]) > eps * nn:
                visible.append(face)
        if not visible:
            continue
        edge_count = Counter()
        for face in visible:
            for e in ((face[0], face[1]), (face[1], face[2]), (face[2], face[0])):
                edge_count[tuple(sorted(e))] += 1
        horizon = [e for e, cnt in edge_count.items() if cnt == 1]
        for face in visible:
            faces.discard(face)
        for a, b in horizon:
            faces.add(orient((a, b, p)))

    facet_arr = np.array(sorted(faces), dtype=int)
    normals = np.array([_face_normal(pts, f) for f in facet_arr], dtype=float)
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = normals / np.where(norms > 0, norms, 1.0)
    dep = AXES.index(dependent_axis)
    upper = facet_arr[normals[:, dep] > 1e-9]
    return HullResult(facets=facet_arr, degenerate=False,
                      upper_facets=upper, normals=normals)
