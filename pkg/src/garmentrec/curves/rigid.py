"""Similarity-transform initialization of template curves against 2D observations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from ..deform.skeleton import matrix_to_quat, quat_to_matrix
from ..geometry.camera import Camera, project_unchecked, projection_jacobian
from ..geometry.curves import PolyCurve3
from ..geometry.distance import chamfer_distance, chamfer_with_grad
from ..geometry.grid import OutOfDomainError
from ..optim import Adam, DivergenceError


@dataclass
class RigidCurveTransform:
    scale: float
    rotation: np.ndarray  # unit quaternion (w, x, y, z)
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if abs(np.linalg.norm(self.rotation) - 1) > 1e-9:
            raise ValueError("rotation quaternion must be unit norm")

    @classmethod
    def identity(cls) -> "RigidCurveTransform":
        return cls(1.0, np.array([1.0, 0, 0, 0]), np.zeros(3))

    @property
    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """``s R p + t`` for each point."""
        return self.scale * np.asarray(points, float) @ self.matrix.T + self.translation

    def to_dict(self) -> dict:
        return {"scale": self.scale, "rotation": self.rotation.tolist(),
                "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "RigidCurveTransform":
        return cls(float(d["scale"]), d["rotation"], d["translation"])


@dataclass
class CurveTarget:
    """Observed visible 2D trace of one curve in one frame."""

    frame: int
    camera: Camera
    points: np.ndarray  # (M, 2) pixels


def _front_facing(y: np.ndarray, cam: Camera) -> np.ndarray:
    radial = y - y.mean(axis=0)
    return np.einsum("nd,nd->n", y - cam.center, radial) < 0


def _objective(x: np.ndarray, targets: list[CurveTarget], field, visibility: str, grad: bool):
    """Mean reprojection Chamfer over targets and its gradient w.r.t. the points ``x``."""
    total = 0.0
    g = np.zeros_like(x)
    for tg in targets:
        if grad:
            y, jac, _ = field.warp_with_jacobian(x, tg.frame)
        else:
            y = field.warp(x, tg.frame)
        pix, _, ok = project_unchecked(tg.camera, y)
        sel = ok & _front_facing(y, tg.camera) if visibility == "normal" else ok
        if not sel.any():
            sel = ok
        if not sel.any():
            return np.inf, g
        if not grad:
            total += chamfer_distance(pix[sel], tg.points)
            continue
        v, gp = chamfer_with_grad(pix[sel], tg.points)
        total += v
        gw = np.einsum("nij,ni->nj", projection_jacobian(tg.camera, y[sel]), gp)
        g[sel] += np.einsum("nij,ni->nj", jac[sel], gw)
    k = len(targets)
    return total / k, g / k


def _retract(rot: np.ndarray, omega: np.ndarray) -> np.ndarray:
    return Rotation.from_rotvec(omega).as_matrix() @ rot


def fit_rigid_init(template: PolyCurve3, targets: list[CurveTarget], field, iters: int = 150,
                   lr=(0.02, 0.02, 0.01), visibility: str = "all", frames: int | None = 1,
                   decay: float = 0.05, history: list | None = None) -> RigidCurveTransform:
    """Fit ``L' = s R L + t`` so projected warped curves match the observed 2D traces.

    The scale and rotation act about the template centroid during the fit and
    are converted to the plain ``s R p + t`` form on return. Adam runs on
    (log s, rotation increment, t) with learning rates ``lr`` decayed
    geometrically to ``decay`` times their start value; the best iterate is
    returned, so the final objective never exceeds the initial one.
    ``frames`` limits the fit to the first K targets (None = all).
    ``visibility="normal"`` drops template points whose radial direction faces
    away from the camera, for targets that only trace the visible arc.
    Templates should be sampled about as densely as the targets: the Chamfer
    floor of a sparse polyline is a quarter of its projected point spacing.
    """
    if not targets:
        raise ValueError("no target frames")
    if visibility not in ("all", "normal"):
        raise ValueError(f"unknown visibility option {visibility!r}")
    targets = list(targets) if frames is None else list(targets)[:frames]
    pts = np.asarray(template.points, float)
    c = pts.mean(axis=0)
    local = pts - c
    if np.max(np.linalg.norm(local, axis=1)) <= 1e-9:
        raise ValueError("degenerate template curve")

    log_s, rot, t = 0.0, np.eye(3), np.zeros(3)

    def evaluate(log_s, rot, t, grad):
        base = local @ rot.T
        x = c + np.exp(log_s) * base + t
        try:
            val, gx = _objective(x, targets, field, visibility, grad)
        except OutOfDomainError:
            return np.inf, None, None
        return val, gx, np.exp(log_s) * base

    best_val, gx, sb = evaluate(log_s, rot, t, True)
    if not np.isfinite(best_val):
        raise DivergenceError("optimization diverged")
    best = (log_s, rot.copy(), t.copy())
    if history is not None:
        history.append(best_val)
    opt = Adam(7, np.repeat(np.asarray(lr, float), (1, 3, 3)))
    lr0 = opt.lr.copy()
    shrink = 1.0  # halved after every rejected out-of-domain step
    for k in range(iters):
        g_s = float(np.sum(gx * sb))
        g_w = np.sum(np.cross(sb, gx), axis=0)  # d/d omega of exp([omega]) R v
        g_t = gx.sum(axis=0)
        opt.lr = shrink * lr0 * decay ** (k / max(iters - 1, 1))
        step = opt.step(np.zeros(7), np.concatenate([[g_s], g_w, g_t]))
        cand = (log_s + step[0], _retract(rot, step[1:4]), t + step[4:])
        val, gx_new, sb_new = evaluate(*cand, True)
        if np.isnan(val):
            raise DivergenceError("optimization diverged")
        if not np.isfinite(val):
            shrink *= 0.5
            continue
        log_s, rot, t = cand
        gx, sb = gx_new, sb_new
        if history is not None:
            history.append(val)
        if val < best_val:
            best_val, best = val, (log_s, rot.copy(), t.copy())
    log_s, rot, t = best
    s = float(np.exp(log_s))
    return RigidCurveTransform(s, matrix_to_quat(rot), c + t - s * rot @ c)


def reprojection_error(curve_points: np.ndarray, targets: list[CurveTarget], field) -> float:
    return float(np.mean([chamfer_distance(project_unchecked(tg.camera, field.warp(curve_points, tg.frame))[0],
                                           tg.points) for tg in targets]))
