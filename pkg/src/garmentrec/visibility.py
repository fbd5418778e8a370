"""Z-buffer rasterization and surface-aware curve visibility."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .geometry import _kernels
from .geometry.camera import MIN_DEPTH, Camera, project_unchecked
from .geometry.images import ScalarImage, save_depth_pgm
from .geometry.mesh import TriMesh

MODES = ("normal_only", "surface_only", "body_only", "surface_aware")


@dataclass
class DepthBuffer:
    image: ScalarImage
    bias: float = 0.0

    @property
    def depth(self) -> np.ndarray:
        return self.image.data

    def dump_pgm(self, path: str | Path) -> float:
        return save_depth_pgm(self.image, path)


@dataclass
class BodyCorrespondence:
    vertex: np.ndarray  # nearest body vertex per curve point

    @classmethod
    def nearest(cls, curve_points: np.ndarray, body_mesh: TriMesh) -> "BodyCorrespondence":
        _, idx = cKDTree(body_mesh.vertices).query(np.atleast_2d(curve_points))
        return cls(np.asarray(idx, dtype=np.int64))


@dataclass
class VisibilityMask:
    visible: np.ndarray
    mode: str

    def __post_init__(self):
        self.visible = np.asarray(self.visible, dtype=bool)
        if self.mode not in MODES:
            raise ValueError(f"unknown visibility mode {self.mode!r}")

    def __len__(self) -> int:
        return len(self.visible)


def rasterize_depth(mesh: TriMesh, cam: Camera, bias: float = 0.0) -> DepthBuffer:
    """Per-pixel minimum camera-space depth; uncovered pixels hold +inf.

    Pixel (i, j) is sampled at its center, the continuous coordinate (i, j).
    Triangles with a vertex at or behind the camera plane are skipped.
    """
    buf = np.full((cam.height, cam.width), np.inf)
    if not mesh.is_empty():
        pix, z, ok = project_unchecked(cam, mesh.vertices)
        keep = np.all(ok[mesh.faces], axis=1)
        f = mesh.faces[keep]
        if len(f):
            _kernels.rasterize(np.ascontiguousarray(pix[f]), np.ascontiguousarray(z[f]),
                               cam.width, cam.height, buf)
    return DepthBuffer(ScalarImage(cam.width, cam.height, buf), bias)


def pixel_index(cam: Camera, pix: np.ndarray):
    ij = np.floor(pix + 0.5).astype(np.int64)
    inside = ((ij[:, 0] >= 0) & (ij[:, 0] < cam.width) & (ij[:, 1] >= 0) & (ij[:, 1] < cam.height))
    return ij, inside


def zbuffer_test(points: np.ndarray, buf: DepthBuffer, cam: Camera,
                 bias: float | None = None) -> np.ndarray:
    """Visible iff depth <= buffered depth at the point's pixel + bias; off-image is invisible."""
    eps = buf.bias if bias is None else bias
    points = np.atleast_2d(points)
    pix, z, ok = project_unchecked(cam, points)
    pix = np.nan_to_num(pix, nan=-1e9)
    ij, inside = pixel_index(cam, pix)
    vis = np.zeros(len(points), dtype=bool)
    sel = inside & ok
    d = buf.depth[ij[sel, 1], ij[sel, 0]]
    vis[sel] = z[sel] <= d + eps
    return vis


def normal_visibility(points_view: np.ndarray, center_view: np.ndarray, cam: Camera) -> np.ndarray:
    """Naive test: visible iff the radial direction faces the camera."""
    view = points_view - cam.center
    radial = points_view - center_view
    cos = np.einsum("nd,nd->n", view, radial)
    return cos < 0


def surface_aware_visibility(curve_points: np.ndarray, curve_center: np.ndarray,
                             garment: TriMesh | None, body, corr: BodyCorrespondence | None,
                             field, frame: int, cam: Camera, mode: str = "surface_aware",
                             bias: float = 0.0, garment_buffer: DepthBuffer | None = None,
                             body_buffer: DepthBuffer | None = None,
                             posed_body: TriMesh | None = None) -> VisibilityMask:
    """Visibility of canonical curve points in ``frame``.

    ``garment`` is the canonical extracted surface (warped here with ``field``)
    and ``body`` a :class:`SkinnedBody` posed with the frame's pose. Precomputed
    buffers may be passed to avoid re-rasterizing per curve.
    """
    if mode not in MODES:
        raise ValueError(f"unknown visibility mode {mode!r}")
    pts_view = field.warp(curve_points, frame)
    n = len(pts_view)
    if mode == "normal_only":
        center_view = field.warp(np.atleast_2d(curve_center), frame)[0]
        return VisibilityMask(normal_visibility(pts_view, center_view, cam), mode)
    vis = np.ones(n, dtype=bool)
    if mode in ("surface_only", "surface_aware"):
        if garment_buffer is None:
            if garment is None or garment.is_empty():
                raise ValueError("surface modes need a non-empty garment mesh")
            garment_buffer = rasterize_depth(garment.with_vertices(field.warp(garment.vertices, frame)),
                                             cam, bias)
        vis &= zbuffer_test(pts_view, garment_buffer, cam, bias)
    if mode in ("body_only", "surface_aware"):
        if body is None or body.mesh.is_empty():
            return VisibilityMask(vis, mode)
        if posed_body is None:
            posed_body = body.posed(field.poses[frame])
        if body_buffer is None:
            body_buffer = rasterize_depth(posed_body, cam, bias)
        if corr is None:
            raise ValueError("body modes need a body correspondence")
        vis &= zbuffer_test(posed_body.vertices[corr.vertex], body_buffer, cam, bias)
    return VisibilityMask(vis, mode)


def save_visibility(masks: dict[tuple[int, str], VisibilityMask], path: str | Path) -> None:
    out = {f"{frame}:{name}": {"frame": frame, "curve": name, "mode": m.mode,
                              "visible": m.visible.tolist()}
           for (frame, name), m in sorted(masks.items())}
    Path(path).write_text(json.dumps(out))


def load_visibility(path: str | Path) -> dict[tuple[int, str], VisibilityMask]:
    d = json.loads(Path(path).read_text())
    return {(v["frame"], v["curve"]): VisibilityMask(np.asarray(v["visible"], bool), v["mode"])
            for v in d.values()}


__all__ = ["DepthBuffer", "BodyCorrespondence", "VisibilityMask", "rasterize_depth", "zbuffer_test",
           "surface_aware_visibility", "normal_visibility", "save_visibility", "load_visibility",
           "MIN_DEPTH", "MODES"]
