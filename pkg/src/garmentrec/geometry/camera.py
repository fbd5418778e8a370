"""Pinhole cameras."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_DEPTH = 1e-6


class BehindCameraError(ValueError):
    pass


@dataclass
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray  # world -> camera
    translation: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        r = self.rotation
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9) or abs(np.linalg.det(r) - 1) > 1e-9:
            raise ValueError("camera rotation must be orthonormal with det +1")

    @classmethod
    def look_at(cls, eye, target, up=(0.0, 1.0, 0.0), *, fx, fy=None, width, height,
                cx=None, cy=None) -> "Camera":
        """Camera at ``eye`` looking at ``target``; image y grows downward."""
        eye, target, up = (np.asarray(a, float) for a in (eye, target, up))
        z = target - eye
        z /= np.linalg.norm(z)
        x = np.cross(z, up)
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        r = np.stack([x, y, z])
        return cls(fx, fx if fy is None else fy, width / 2 if cx is None else cx,
                   height / 2 if cy is None else cy, r, -r @ eye, width, height)

    @property
    def center(self) -> np.ndarray:
        return -self.rotation.T @ self.translation

    def to_camera(self, p: np.ndarray) -> np.ndarray:
        return np.asarray(p, float) @ self.rotation.T + self.translation

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "rotation": self.rotation.tolist(), "translation": self.translation.tolist(),
                "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   np.asarray(d["rotation"]), np.asarray(d["translation"]),
                   int(d["width"]), int(d["height"]))


def project(cam: Camera, p):
    """Pixel coordinates and camera-space depth of world point(s) ``p``."""
    single = np.ndim(p) == 1
    pc = cam.to_camera(np.atleast_2d(p))
    z = pc[:, 2]
    if np.any(z <= MIN_DEPTH):
        raise BehindCameraError("behind camera")
    pix = np.stack([cam.fx * pc[:, 0] / z + cam.cx, cam.fy * pc[:, 1] / z + cam.cy], axis=1)
    if single:
        return pix[0], float(z[0])
    return pix, z


def project_unchecked(cam: Camera, p):
    """Like :func:`project` but returns NaN pixels for points behind the camera."""
    pc = cam.to_camera(np.atleast_2d(p))
    z = pc[:, 2]
    ok = z > MIN_DEPTH
    zs = np.where(ok, z, np.nan)
    pix = np.stack([cam.fx * pc[:, 0] / zs + cam.cx, cam.fy * pc[:, 1] / zs + cam.cy], axis=1)
    return pix, z, ok


def unproject(cam: Camera, pixel, depth):
    """World point on the ray through ``pixel`` at camera-space depth ``depth``."""
    single = np.ndim(pixel) == 1
    pixel = np.atleast_2d(pixel)
    depth = np.atleast_1d(depth)
    x = (pixel[:, 0] - cam.cx) / cam.fx * depth
    y = (pixel[:, 1] - cam.cy) / cam.fy * depth
    pc = np.stack([x, y, depth], axis=1)
    out = (pc - cam.translation) @ cam.rotation
    return out[0] if single else out


def projection_jacobian(cam: Camera, p: np.ndarray) -> np.ndarray:
    """d pixel / d world point, shape (N, 2, 3)."""
    pc = cam.to_camera(np.atleast_2d(p))
    x, y, z = pc[:, 0], pc[:, 1], pc[:, 2]
    j = np.zeros((len(pc), 2, 3))
    j[:, 0, 0] = cam.fx / z
    j[:, 0, 2] = -cam.fx * x / z ** 2
    j[:, 1, 1] = cam.fy / z
    j[:, 1, 2] = -cam.fy * y / z ** 2
    return j @ cam.rotation
