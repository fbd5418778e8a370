"""Explicit curve losses with analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry.camera import Camera, project_unchecked, projection_jacobian
from ..geometry.distance import chamfer_with_grad
from ..geometry.grid import OutOfDomainError, SdfGrid, trilinear_stencil
from .state import CurveDeformState, CurveLossWeights


class NoVisiblePointsError(ValueError):
    pass


@dataclass
class ProjectionTerm:
    """One frame's supervision for one curve: frozen visibility and target 2D points."""

    frame: int
    camera: Camera
    visible: np.ndarray
    target: np.ndarray  # (M, 2) pixels


def _project_points_grad(points: np.ndarray, cam: Camera, field, frame: int, target: np.ndarray,
                         lattice: bool = False):
    """Chamfer of projected warped points vs target and its gradient w.r.t. the canonical points."""
    y, jac, j_lbs = field.warp_with_jacobian(points, frame)
    pix, _, ok = project_unchecked(cam, y)
    if not ok.any():
        raise NoVisiblePointsError("no visible points")
    val, g_pix = chamfer_with_grad(pix[ok], target)
    g_world = np.zeros_like(y)
    g_world[ok] = np.einsum("nij,ni->nj", projection_jacobian(cam, y[ok]), g_pix)
    g_canon = np.einsum("nij,ni->nj", jac, g_world)
    g_lat = None
    if lattice and field.lattice is not None:
        g_lat = field.lattice_grad(points, j_lbs, g_world, frame)
    return val, g_canon, g_lat


def projection_loss(state: CurveDeformState, vis: np.ndarray, cam: Camera, field, frame: int,
                    zeta, with_grad: bool = False, lattice_grad: bool = False):
    """Chamfer distance (pixels) between projections of the visible curve points and ``zeta``.

    Visibility is a constant selector. With ``with_grad`` returns
    ``(value, d/d eta, d/d lam)``; ``lattice_grad`` appends the gradient with
    respect to the frame's lattice offsets (None without a lattice).
    """
    vis = np.asarray(vis, dtype=bool)
    if len(vis) != len(state):
        raise ValueError("visibility length must match the curve")
    if not vis.any():
        raise NoVisiblePointsError("no visible points")
    target = zeta.points if hasattr(zeta, "points") else np.asarray(zeta, float)
    if len(target) == 0:
        raise ValueError("empty target curve")
    pts = state.points()[vis]
    val, g, g_lat = _project_points_grad(pts, cam, field, frame, target, lattice=lattice_grad)
    if not with_grad:
        return val
    g_eta = np.zeros(len(state))
    g_lam = np.zeros(len(state))
    g_eta[vis] = np.einsum("nd,nd->n", g, state.dirs[vis])
    g_lam[vis] = g @ state.normal
    if lattice_grad:
        return val, g_eta, g_lam, g_lat
    return val, g_eta, g_lam


def slope_loss(points, with_grad: bool = False):
    """Sum over cyclic consecutive segment pairs of (1 - cosine similarity)."""
    p = np.asarray(points.points if hasattr(points, "points") else points, dtype=np.float64)
    if len(p) < 3:
        raise ValueError("slope loss needs at least 3 points")
    s = np.roll(p, -1, axis=0) - p  # s_i = p_{i+1} - p_i
    ln = np.linalg.norm(s, axis=1)
    if np.any(ln <= 1e-12):
        raise ValueError("degenerate segment")
    u = np.roll(s, -1, axis=0)  # s_{i+1}
    lu = np.roll(ln, -1)
    cos = np.einsum("nd,nd->n", u, s) / (lu * ln)
    val = float(np.sum(1 - cos))
    if not with_grad:
        return val
    dcos_du = s / (lu * ln)[:, None] - cos[:, None] * u / (lu ** 2)[:, None]
    dcos_ds = u / (lu * ln)[:, None] - cos[:, None] * s / (ln ** 2)[:, None]
    # gradient w.r.t. each segment: s_i appears as "s" in term i and as "u" in term i-1
    g_seg = -(dcos_ds + np.roll(dcos_du, 1, axis=0))
    # s_i = p_{i+1} - p_i
    g = np.roll(g_seg, 1, axis=0) - g_seg
    return val, g


def anap_loss(points, sdf: SdfGrid, with_grad: bool = False):
    """Sum of absolute trilinear SDF values at the curve points."""
    p = np.asarray(points.points if hasattr(points, "points") else points, dtype=np.float64)
    idx, w, dw = trilinear_stencil(sdf.origin, sdf.spacing, sdf.dims, p)
    v = sdf.values.reshape(-1)[idx]
    f = np.einsum("nc,nc->n", w, v)
    val = float(np.abs(f).sum())
    if not with_grad:
        return val
    grad_f = np.einsum("nc,ncd->nd", v, dw)
    return val, np.sign(f)[:, None] * grad_f


def total_curve_loss(state: CurveDeformState, weights: CurveLossWeights, terms: list[ProjectionTerm],
                     field, sdf: SdfGrid | None, lattice_grads: dict | None = None):
    """Weighted sum of the mean projection loss over usable frames, slope and ANAP terms.

    Returns ``(value, gradient)`` with the gradient laid out like
    ``state.params()`` (eta block then lam block). Frames where no point is
    visible are skipped. When ``lattice_grads`` is a dict, the gradient of the
    value with respect to each frame's lattice offsets is added into it.
    """
    n = len(state)
    grad_p = np.zeros((n, 3))
    g_eta = np.zeros(n)
    g_lam = np.zeros(n)
    value = 0.0
    want_lat = lattice_grads is not None and field.lattice is not None
    if weights.proj > 0 and terms:
        vals, ge, gl, lat = [], np.zeros(n), np.zeros(n), []
        for t in terms:
            try:
                out = projection_loss(state, t.visible, t.camera, field, t.frame, t.target,
                                      with_grad=True, lattice_grad=want_lat)
            except NoVisiblePointsError:
                continue
            vals.append(out[0])
            ge += out[1]
            gl += out[2]
            if want_lat:
                lat.append((t.frame, out[3]))
        if vals:
            k = len(vals)
            value += weights.proj * float(np.sum(vals)) / k
            g_eta += weights.proj * ge / k
            g_lam += weights.proj * gl / k
            for frame, g in lat:
                acc = lattice_grads.setdefault(frame, np.zeros_like(g))
                acc += weights.proj / k * g
    pts = state.points()
    if weights.slop > 0:
        v, g = slope_loss(pts, with_grad=True)
        value += weights.slop * v
        grad_p += weights.slop * g
    if weights.anap > 0:
        if sdf is None:
            raise ValueError("ANAP term needs an SDF grid")
        v, g = anap_loss(pts, sdf, with_grad=True)
        value += weights.anap * v
        grad_p += weights.anap * g
    g_eta += np.einsum("nd,nd->n", grad_p, state.dirs)
    g_lam += grad_p @ state.normal
    return value, np.concatenate([g_eta, g_lam])


__all__ = ["NoVisiblePointsError", "OutOfDomainError", "ProjectionTerm", "projection_loss",
           "slope_loss", "anap_loss", "total_curve_loss"]
