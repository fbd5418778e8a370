"""Reconstruction metrics: sampled Chamfer distance and adjacent-frame vertex consistency."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..geometry.distance import chamfer_distance
from ..geometry.mesh import TriMesh

CM_PER_UNIT = 100.0  # scene units are meters


def metric_cd(gt: TriMesh, pred: TriMesh, samples: int = 100_000, seed: int = 0) -> float:
    """Chamfer distance in cm between area-uniform surface samples of two meshes.

    Both meshes are sampled with the same seed, so identical meshes score 0.
    """
    if gt.is_empty() or pred.is_empty():
        raise ValueError("empty mesh")
    a = gt.sample_surface(samples, np.random.default_rng(seed))
    b = pred.sample_surface(samples, np.random.default_rng(seed))
    return chamfer_distance(a, b) * CM_PER_UNIT


def metric_ccv(seq: list[TriMesh]) -> float:
    """Root mean square displacement of corresponding vertices between adjacent frames (cm)."""
    if len(seq) < 2:
        raise ValueError("need at least 2 frames")
    n = seq[0].n_vertices
    if any(m.n_vertices != n for m in seq):
        raise ValueError("topology mismatch")
    v = np.stack([m.vertices for m in seq])
    d = v[1:] - v[:-1]
    return float(np.sqrt(np.mean(np.einsum("tnd,tnd->tn", d, d)))) * CM_PER_UNIT


@dataclass
class MetricsReport:
    cd: float  # cm, canonical registered mesh vs canonical ground truth
    ccv: float  # cm
    cd_frames: list[float] = field(default_factory=list)  # cm, per evaluated frame
    gt_ccv: float | None = None
    frames: list[int] = field(default_factory=list)
    traces: dict[str, list[float]] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.cd < 0 or self.ccv < 0:
            raise ValueError("metrics must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "MetricsReport":
        return cls(**json.loads(Path(path).read_text()))
