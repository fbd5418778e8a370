"""Center/radial/normal parameterization of closed feature curves."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..geometry.curves import CURVE_NAMES, PolyCurve3

ETA_FLOOR = 1e-4
SURFACE_TYPES = ("upper_clothing", "bottom_clothing", "upper_bottom")


@dataclass
class CurveDeformState:
    """Curve point i sits at ``center + eta[i] * dirs[i] + lam[i] * normal``.

    The anchors (center, dirs, normal) stay fixed; eta and lam are free.
    """

    center: np.ndarray
    dirs: np.ndarray
    normal: np.ndarray
    eta: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.dirs = np.asarray(self.dirs, dtype=np.float64).reshape(-1, 3)
        self.normal = np.asarray(self.normal, dtype=np.float64).reshape(3)
        self.eta = np.asarray(self.eta, dtype=np.float64).reshape(-1).copy()
        self.lam = np.asarray(self.lam, dtype=np.float64).reshape(-1).copy()
        n = len(self.dirs)
        if len(self.eta) != n or len(self.lam) != n:
            raise ValueError("eta and lam need one entry per curve point")
        if np.any(np.abs(np.linalg.norm(self.dirs, axis=1) - 1) > 1e-9):
            raise ValueError("radial directions must be unit length")
        self.clamp()

    def __len__(self) -> int:
        return len(self.dirs)

    def clamp(self) -> None:
        np.maximum(self.eta, ETA_FLOOR, out=self.eta)

    def points(self) -> np.ndarray:
        return self.center + self.eta[:, None] * self.dirs + self.lam[:, None] * self.normal

    def params(self) -> np.ndarray:
        return np.concatenate([self.eta, self.lam])

    def set_params(self, x: np.ndarray) -> None:
        n = len(self)
        self.eta = np.array(x[:n], dtype=np.float64)
        self.lam = np.array(x[n:2 * n], dtype=np.float64)
        self.clamp()

    def copy(self) -> "CurveDeformState":
        return CurveDeformState(self.center, self.dirs, self.normal, self.eta, self.lam)

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "dirs": self.dirs.tolist(),
                "normal": self.normal.tolist(), "eta": self.eta.tolist(), "lam": self.lam.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "CurveDeformState":
        return cls(d["center"], d["dirs"], d["normal"], d["eta"], d["lam"])


def plane_normal(dirs: np.ndarray) -> np.ndarray:
    """Averaged cross product of consecutive radial directions, normalized."""
    n = len(dirs)
    s = np.cross(dirs, np.roll(dirs, 1, axis=0)).sum(axis=0) / (n - 1)
    norm = np.linalg.norm(s)
    if norm < 1e-12:
        raise ValueError("degenerate curve plane")
    return s / norm


def init_curve_state(curve: PolyCurve3) -> CurveDeformState:
    if not curve.closed:
        raise ValueError("curve must be closed")
    pts = curve.points
    center = pts.mean(axis=0)
    r = pts - center
    eta = np.linalg.norm(r, axis=1)
    if np.any(eta <= 1e-9):
        raise ValueError("degenerate radial direction")
    dirs = r / eta[:, None]
    return CurveDeformState(center, dirs, plane_normal(dirs), eta, np.zeros(len(pts)))


def deform_curve(state: CurveDeformState) -> PolyCurve3:
    return PolyCurve3(state.points(), closed=True)


def default_surfaces(garment_type: str) -> dict[str, tuple[str, ...]]:
    """Which implicit surface(s) each feature curve bounds, per garment type."""
    upper = {"neckline": ("upper_clothing",), "hemline_upper": ("upper_clothing",),
             "cuff_left": ("upper_clothing",), "cuff_right": ("upper_clothing",)}
    if garment_type in ("upper", "coat"):
        return upper
    if garment_type in ("skirt", "pants"):
        return {"waist": ("bottom_clothing",), "hemline_bottom": ("bottom_clothing",)}
    if garment_type == "dress":
        return {"neckline": ("upper_bottom",), "hemline_bottom": ("upper_bottom",),
                "cuff_left": ("upper_bottom",), "cuff_right": ("upper_bottom",)}
    if garment_type == "upper+bottom":
        return {**upper, "waist": ("upper_clothing", "bottom_clothing"),
                "hemline_bottom": ("bottom_clothing",)}
    raise ValueError(f"unknown garment type {garment_type!r}")


@dataclass
class CurveSet:
    curves: dict[str, CurveDeformState]
    surfaces: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for name in self.curves:
            if name not in CURVE_NAMES:
                raise ValueError(f"unknown curve name {name!r}")
            s = self.surfaces.get(name, ())
            if any(t not in SURFACE_TYPES for t in s):
                raise ValueError(f"unknown surface type for {name!r}")
            if len(s) > 2 or (len(s) == 2 and name != "waist"):
                raise ValueError(f"curve {name!r} may bound only one surface")

    def __getitem__(self, name: str) -> CurveDeformState:
        return self.curves[name]

    def __contains__(self, name: str) -> bool:
        return name in self.curves

    def names(self) -> list[str]:
        return list(self.curves)

    def polycurves(self) -> dict[str, PolyCurve3]:
        return {k: deform_curve(v) for k, v in self.curves.items()}

    def copy(self) -> "CurveSet":
        return CurveSet({k: v.copy() for k, v in self.curves.items()}, dict(self.surfaces))

    def to_dict(self) -> dict:
        return {"curves": [{"name": k, "closed": True, "points": v.points().tolist(),
                            "state": v.to_dict(), "surfaces": list(self.surfaces.get(k, ()))}
                           for k, v in self.curves.items()]}

    @classmethod
    def from_dict(cls, d: dict) -> "CurveSet":
        curves, surfaces = {}, {}
        for c in d["curves"]:
            if "state" in c:
                curves[c["name"]] = CurveDeformState.from_dict(c["state"])
            else:
                curves[c["name"]] = init_curve_state(PolyCurve3.from_dict(c))
            surfaces[c["name"]] = tuple(c.get("surfaces", ()))
        return cls(curves, surfaces)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "CurveSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class CurveLossWeights:
    proj: float = 1.0
    slop: float = 0.1
    anap: float = 1.0

    def __post_init__(self):
        for v in (self.proj, self.slop, self.anap):
            if not np.isfinite(v) or v < 0:
                raise ValueError("curve loss weights must be finite and non-negative")
