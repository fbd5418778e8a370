"""Dense scalar grids with trilinear sampling, and their binary file format."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# corner offsets in (i, j, k) order; corner c has bits (c >> 2, c >> 1, c) & 1
CORNERS = np.array([[(c >> 2) & 1, (c >> 1) & 1, c & 1] for c in range(8)], dtype=np.int64)


class OutOfDomainError(ValueError):
    pass


@dataclass
class SdfGrid:
    origin: np.ndarray
    spacing: np.ndarray
    dims: tuple[int, int, int]
    values: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.spacing = np.broadcast_to(np.asarray(self.spacing, dtype=np.float64), (3,)).copy()
        self.dims = tuple(int(d) for d in self.dims)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(self.dims)
        if min(self.dims) < 2:
            raise ValueError("grid dims must be >= 2 per axis")
        if np.any(self.spacing <= 0):
            raise ValueError("grid spacing must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    @classmethod
    def from_bounds(cls, lo, hi, dims, values=None) -> "SdfGrid":
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        dims = tuple(np.broadcast_to(np.asarray(dims, dtype=np.int64), (3,)).tolist())
        spacing = (hi - lo) / (np.asarray(dims) - 1)
        if values is None:
            values = np.zeros(dims)
        return cls(lo, spacing, dims, values)

    @classmethod
    def from_function(cls, fn, lo, hi, dims) -> "SdfGrid":
        g = cls.from_bounds(lo, hi, dims)
        g.values = np.asarray(fn(g.node_positions().reshape(-1, 3)), float).reshape(g.dims)
        return g

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.spacing * (np.asarray(self.dims) - 1)

    @property
    def min_spacing(self) -> float:
        return float(self.spacing.min())

    def copy(self) -> "SdfGrid":
        return SdfGrid(self.origin.copy(), self.spacing.copy(), self.dims, self.values.copy())

    def node_positions(self) -> np.ndarray:
        axes = [self.origin[a] + self.spacing[a] * np.arange(self.dims[a]) for a in range(3)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def contains(self, p: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(p)
        return np.all((p >= self.origin) & (p <= self.upper), axis=1)

    def sample(self, p):
        return trilinear_sample(self, p)


def trilinear_stencil(origin, spacing, dims, p, check: bool = True):
    """Corner flat indices (N, 8), blend weights (N, 8), weight gradients (N, 8, 3).

    Points must lie in the closed box; cells at the upper faces are clamped so that
    a point on the last node uses the last cell with local coordinate 1.
    """
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    dims_a = np.asarray(dims, dtype=np.int64)
    spacing = np.asarray(spacing, dtype=np.float64)
    u = (p - origin) / spacing
    if check:
        upper = dims_a - 1
        bad = np.any((u < -1e-9) | (u > upper + 1e-9), axis=1)
        if np.any(bad):
            raise OutOfDomainError("out of domain")
    cell = np.clip(np.floor(u).astype(np.int64), 0, dims_a - 2)
    t = np.clip(u - cell, 0.0, 1.0)
    w = np.empty((len(p), 8))
    dw = np.empty((len(p), 8, 3))
    idx = np.empty((len(p), 8), dtype=np.int64)
    for c, (bi, bj, bk) in enumerate(CORNERS):
        fx = t[:, 0] if bi else 1 - t[:, 0]
        fy = t[:, 1] if bj else 1 - t[:, 1]
        fz = t[:, 2] if bk else 1 - t[:, 2]
        sx = 1.0 if bi else -1.0
        sy = 1.0 if bj else -1.0
        sz = 1.0 if bk else -1.0
        w[:, c] = fx * fy * fz
        dw[:, c, 0] = sx * fy * fz / spacing[0]
        dw[:, c, 1] = fx * sy * fz / spacing[1]
        dw[:, c, 2] = fx * fy * sz / spacing[2]
        idx[:, c] = ((cell[:, 0] + bi) * dims_a[1] + (cell[:, 1] + bj)) * dims_a[2] + (cell[:, 2] + bk)
    return idx, w, dw


def trilinear_sample(grid: SdfGrid, p):
    """Value and analytic gradient of the trilinear interpolant at ``p``.

    ``p`` may be a single point (returns a float and a 3-vector) or an (N, 3)
    array. Raises :class:`OutOfDomainError` outside the closed grid box.
    """
    single = np.ndim(p) == 1
    idx, w, dw = trilinear_stencil(grid.origin, grid.spacing, grid.dims, p)
    v = grid.values.reshape(-1)[idx]
    val = np.einsum("nc,nc->n", w, v)
    grad = np.einsum("ncd,nc->nd", dw, v)
    if single:
        return float(val[0]), grad[0]
    return val, grad


def save_grid(grid: SdfGrid, path: str | Path) -> None:
    """Raw little-endian float32 block (``.raw``) with a JSON header (``.json``)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"origin": grid.origin.tolist(), "spacing": grid.spacing.tolist(),
              "dims": list(grid.dims), "dtype": "<f4", "order": "C"}
    path.with_suffix(".json").write_text(json.dumps(header, indent=1))
    path.with_suffix(".raw").write_bytes(grid.values.astype("<f4").tobytes(order="C"))


def load_grid(path: str | Path) -> SdfGrid:
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    raw = np.frombuffer(path.with_suffix(".raw").read_bytes(), dtype="<f4")
    return SdfGrid(header["origin"], header["spacing"], header["dims"],
                   raw.astype(np.float64).reshape(header["dims"]))
