"""Silhouette-driven vertex updates of an explicit mesh against per-frame masks."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..geometry.camera import project_unchecked
from ..geometry.images import ScalarImage
from ..geometry.mesh import TriMesh
from ..visibility import rasterize_depth, zbuffer_test


def mask_sdf(mask: ScalarImage) -> np.ndarray:
    """Signed pixel distance to the mask boundary, negative inside.

    The boundary is taken halfway between pixel centers, so a pixel next to
    the boundary sits at +-0.5.
    """
    m = np.asarray(mask.data) > 0.5
    if not m.any():
        raise ValueError("empty mask")
    out = ndimage.distance_transform_edt(~m) - 0.5  # outside: distance to nearest inside pixel
    inside = ndimage.distance_transform_edt(m) - 0.5
    out[m] = -inside[m]
    return out


def bilinear(img: np.ndarray, pix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear lookup at continuous pixel coordinates (centers at integers); also an in-image flag."""
    h, w = img.shape
    x, y = pix[:, 0], pix[:, 1]
    ok = np.isfinite(x) & np.isfinite(y) & (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    x = np.clip(np.nan_to_num(x), 0, w - 1)
    y = np.clip(np.nan_to_num(y), 0, h - 1)
    x0 = np.minimum(np.floor(x).astype(np.int64), w - 2)
    y0 = np.minimum(np.floor(y).astype(np.int64), h - 2)
    tx, ty = x - x0, y - y0
    v = ((1 - tx) * (1 - ty) * img[y0, x0] + tx * (1 - ty) * img[y0, x0 + 1]
         + (1 - tx) * ty * img[y0 + 1, x0] + tx * ty * img[y0 + 1, x0 + 1])
    return v, ok


def contour_vertices(mesh: TriMesh, view_vertices: np.ndarray, eye: np.ndarray) -> np.ndarray:
    """Vertices with both front- and back-facing incident faces from ``eye``."""
    tri = view_vertices[mesh.faces]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    front = np.einsum("fd,fd->f", n, tri.mean(axis=1) - eye) < 0
    nv = mesh.n_vertices
    f_front = np.bincount(mesh.faces[front].reshape(-1), minlength=nv)
    f_back = np.bincount(mesh.faces[~front].reshape(-1), minlength=nv)
    return (f_front > 0) & (f_back > 0)


def silhouette_iou(mesh: TriMesh, observations, field) -> float:
    """Mean IoU between rasterized warped-mesh coverage and the observed masks."""
    ious = []
    for obs in observations:
        buf = rasterize_depth(mesh.with_vertices(field.warp(mesh.vertices, obs.frame)), obs.camera)
        a = np.isfinite(buf.depth)
        b = np.asarray(obs.mask.data) > 0.5
        union = np.logical_or(a, b).sum()
        ious.append(np.logical_and(a, b).sum() / union if union else 1.0)
    return float(np.mean(ious))


def mask_update_mesh(mesh: TriMesh, observations, field, alpha: float, iters: int = 1,
                     sdf2d: dict | None = None, body=None, bias: float = 0.0,
                     dead_zone: float = 1.0, interior_margin: float = 3.0,
                     max_move: float | None = None) -> TriMesh:
    """Move silhouette vertices along canonical normals toward the observed mask boundaries.

    In each frame only vertices that lie on the rendered contour of the warped
    mesh, pass the depth test against the mesh itself and (with ``body``)
    against the posed body contribute. A contributing vertex with signed mask
    distance ``r`` pixels at its projection adds ``r * depth / fx`` scene
    units; residuals inside ``dead_zone`` pixels count as zero, and vertices
    deeper than ``interior_margin`` pixels inside the mask are left alone for
    that frame. Each vertex moves by ``-alpha`` times the mean over its
    contributing frames, clipped to ``max_move`` scene units per iteration
    when given.
    """
    if not observations:
        raise ValueError("no observations")
    v = mesh.vertices.copy()
    if alpha == 0 or iters <= 0:
        return mesh.with_vertices(v)
    sdf2d = {} if sdf2d is None else sdf2d
    for _ in range(iters):
        cur = mesh.with_vertices(v)
        normals = cur.vertex_normals()
        num = np.zeros(len(v))
        cnt = np.zeros(len(v))
        for obs in observations:
            cam = obs.camera
            if obs.frame not in sdf2d:
                sdf2d[obs.frame] = mask_sdf(obs.mask)
            y = field.warp(v, obs.frame)
            pix, z, ok = project_unchecked(cam, y)
            sel = ok & contour_vertices(cur, y, cam.center)
            if not sel.any():
                continue
            sel &= zbuffer_test(y, rasterize_depth(cur.with_vertices(y), cam), cam, bias)
            if body is not None and not body.mesh.is_empty():
                sel &= zbuffer_test(y, rasterize_depth(body.posed(field.poses[obs.frame]), cam), cam, bias)
            r, inside_img = bilinear(sdf2d[obs.frame], pix)
            sel &= inside_img & (r >= -interior_margin)
            r = np.sign(r) * np.maximum(np.abs(r) - dead_zone, 0.0)
            num[sel] += r[sel] * z[sel] / cam.fx
            cnt[sel] += 1
        moved = cnt > 0
        d = alpha * num[moved] / cnt[moved]
        if max_move is not None:
            d = np.clip(d, -max_move, max_move)
        v[moved] -= d[:, None] * normals[moved]
    return mesh.with_vertices(v)
