"""Polyline curve containers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CURVE_NAMES = ("neckline", "hemline_upper", "waist", "hemline_bottom", "cuff_left", "cuff_right")


@dataclass
class PolyCurve3:
    points: np.ndarray
    closed: bool = True

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if self.closed and len(self.points) < 3:
            raise ValueError("closed curves need at least 3 points")
        nxt = np.roll(self.points, -1, axis=0) if self.closed else self.points[1:]
        cur = self.points if self.closed else self.points[:-1]
        if len(cur) and np.any(np.linalg.norm(nxt - cur, axis=1) <= 1e-9):
            raise ValueError("consecutive curve points coincide")

    def __len__(self) -> int:
        return len(self.points)

    def to_dict(self, name: str | None = None) -> dict:
        d = {"closed": self.closed, "points": self.points.tolist()}
        if name is not None:
            d["name"] = name
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PolyCurve3":
        return cls(np.asarray(d["points"], float), bool(d.get("closed", True)))

    def length(self) -> float:
        nxt = np.roll(self.points, -1, axis=0) if self.closed else self.points[1:]
        cur = self.points if self.closed else self.points[:-1]
        return float(np.linalg.norm(nxt - cur, axis=1).sum())

    def resample(self, n: int, start: int = 0, reverse: bool = False) -> np.ndarray:
        """``n`` points at uniform arc length along the closed curve, starting at point ``start``."""
        pts = np.roll(self.points, -start, axis=0)
        if reverse:
            pts = np.concatenate([pts[:1], pts[1:][::-1]])
        seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        s = np.arange(n) * cum[-1] / n
        k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(pts) - 1)
        t = (s - cum[k]) / seg[k]
        return pts[k] + t[:, None] * (np.roll(pts, -1, axis=0)[k] - pts[k])


@dataclass
class PolyCurve2:
    points: np.ndarray
    label: str

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if not np.all(np.isfinite(self.points)):
            raise ValueError("curve coordinates must be finite")
        if self.label not in CURVE_NAMES:
            raise ValueError(f"unknown curve label {self.label!r}")

    def __len__(self) -> int:
        return len(self.points)

    def to_dict(self) -> dict:
        return {"label": self.label, "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PolyCurve2":
        return cls(np.asarray(d["points"], float).reshape(-1, 2), d["label"])
