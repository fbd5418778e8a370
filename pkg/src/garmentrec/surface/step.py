"""Gradient steps on SDF grid values."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..curves.state import SURFACE_TYPES
from ..geometry.grid import SdfGrid
from ..geometry.mesh import TriMesh
from ..optim import DivergenceError
from .losses import eikonal_loss, eikonal_samples, mcons_loss, mean_abs_loss


@dataclass
class SurfaceParams:
    grids: dict[str, SdfGrid]
    period: int = 5
    n_a: int = 1024

    def __post_init__(self):
        if not self.grids:
            raise ValueError("at least one surface type must be active")
        for k in self.grids:
            if k not in SURFACE_TYPES:
                raise ValueError(f"unknown surface type {k!r}")
        if self.period < 1:
            raise ValueError("extraction period must be >= 1")
        if self.n_a < 100:
            raise ValueError("consistency sample count must be >= 100")


@dataclass
class SurfaceLossWeights:
    mcons: float = 1.0
    ccons: float = 0.5
    eik: float = 0.1
    arap: float = 0.01

    def __post_init__(self):
        for v in (self.mcons, self.ccons, self.eik, self.arap):
            if not np.isfinite(v) or v < 0:
                raise ValueError("surface loss weights must be finite and non-negative")


@dataclass
class SurfaceObjective:
    """The in-scope implicit-surface objective for one grid with frozen samples."""

    weights: SurfaceLossWeights
    target: TriMesh | None
    cap_samples: list[np.ndarray] = field(default_factory=list)
    eik_samples: np.ndarray | None = None

    def __call__(self, grid: SdfGrid, with_grad: bool = False):
        total = 0.0
        grad = np.zeros(grid.dims) if with_grad else None
        terms = []
        if self.weights.mcons > 0 and self.target is not None and self.target.n_vertices:
            terms.append((self.weights.mcons, mcons_loss, self.target))
        if self.weights.ccons > 0:
            for s in self.cap_samples:
                terms.append((self.weights.ccons / len(self.cap_samples), mean_abs_loss, s))
        if self.weights.eik > 0 and self.eik_samples is not None:
            terms.append((self.weights.eik, eikonal_loss, self.eik_samples))
        for w, fn, pts in terms:
            if with_grad:
                v, g = fn(grid, pts, with_grad=True)
                grad += w * g
            else:
                v = fn(grid, pts)
            total += w * v
        return (total, grad) if with_grad else total


@dataclass
class StepResult:
    before: float
    after: float
    accepted: bool

    @property
    def decreased(self) -> bool:
        return self.after < self.before


def descend(grid: SdfGrid, objective: SurfaceObjective, step: float, max_halvings: int = 8) -> StepResult:
    """One normalized gradient step with backtracking; edits ``grid.values`` in place.

    The largest per-node change is ``step`` scene units before halving. The
    step is halved until the objective decreases; if it never does the grid is
    left as it was.
    """
    f0, g = objective(grid, with_grad=True)
    if not np.isfinite(f0) or not np.all(np.isfinite(g)):
        raise DivergenceError("diverged")
    gmax = float(np.max(np.abs(g)))
    if gmax == 0.0:
        return StepResult(f0, f0, False)
    direction = -g / gmax
    base = grid.values.copy()
    alpha = step
    for _ in range(max_halvings + 1):
        grid.values = base + alpha * direction
        f1 = objective(grid)
        if np.isnan(f1):
            grid.values = base
            raise DivergenceError("diverged")
        if f1 < f0:
            return StepResult(f0, f1, True)
        alpha *= 0.5
    grid.values = base
    return StepResult(f0, f0, False)


def surface_step(params: SurfaceParams, weights: SurfaceLossWeights,
                 cap_samples: dict[str, list[np.ndarray]], targets: dict[str, TriMesh | None],
                 rng: np.random.Generator, step: float, n_eik: int = 4096) -> dict[str, StepResult]:
    """One descent step per active surface grid on its mask, curve-cap and Eikonal terms.

    ``cap_samples`` maps each surface type to point samples of the capping disks
    of the curves bounding it (a curve shared by two surfaces appears in both).
    """
    out = {}
    for name in sorted(params.grids):
        grid = params.grids[name]
        eik = eikonal_samples(grid, n_eik, rng) if weights.eik > 0 else None
        obj = SurfaceObjective(weights, targets.get(name), cap_samples.get(name, []), eik)
        out[name] = descend(grid, obj, step)
    return out
