"""Brute-force ray casting against triangle sets."""
from __future__ import annotations

import numpy as np

from . import _kernels
from .camera import Camera
from .mesh import TriMesh


def occluded_by(cam: Camera, points: np.ndarray, mesh: TriMesh, tol: float = 1e-6) -> np.ndarray:
    """True where the segment from the camera center to a point hits ``mesh`` first.

    A hit counts only if it is closer to the camera than the point by more than
    ``tol`` scene units along the ray.
    """
    points = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    if mesh.is_empty():
        return np.zeros(len(points), dtype=bool)
    origin = np.broadcast_to(cam.center, points.shape).copy()
    s = _kernels.first_hit(origin, points, np.ascontiguousarray(mesh.triangles()), 1e-12)
    length = np.linalg.norm(points - origin, axis=1)
    return s * length < length - tol


def depth_along_rays(cam: Camera, pixels: np.ndarray, mesh: TriMesh) -> np.ndarray:
    """Camera-space depth of the first surface hit through each pixel position (inf = miss)."""
    pixels = np.atleast_2d(pixels).astype(np.float64)
    d = np.stack([(pixels[:, 0] - cam.cx) / cam.fx, (pixels[:, 1] - cam.cy) / cam.fy,
                  np.ones(len(pixels))], axis=1)
    # a target at camera depth 1 along each ray makes s the depth itself
    targets = (d - cam.translation) @ cam.rotation
    origin = np.broadcast_to(cam.center, targets.shape).copy()
    if mesh.is_empty():
        return np.full(len(pixels), np.inf)
    return _kernels.first_hit(origin, np.ascontiguousarray(targets),
                              np.ascontiguousarray(mesh.triangles()), 1e-12)
