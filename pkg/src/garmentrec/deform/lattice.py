"""Per-frame control-point lattice for small non-rigid displacements."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry.grid import trilinear_stencil


@dataclass
class LatticeDeform:
    lo: np.ndarray
    hi: np.ndarray
    offsets: np.ndarray  # (frames, cx, cy, cz, 3)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64).reshape(3)
        self.hi = np.asarray(self.hi, dtype=np.float64).reshape(3)
        self.offsets = np.asarray(self.offsets, dtype=np.float64)
        if self.offsets.ndim != 5 or self.offsets.shape[-1] != 3:
            raise ValueError("offsets must have shape (frames, cx, cy, cz, 3)")
        if not np.all(np.isfinite(self.offsets)):
            raise ValueError("lattice offsets must be finite")

    @classmethod
    def zeros(cls, lo, hi, n_frames: int, dims=(8, 8, 8)) -> "LatticeDeform":
        return cls(lo, hi, np.zeros((n_frames, *dims, 3)))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.offsets.shape[1:4])

    @property
    def spacing(self) -> np.ndarray:
        return (self.hi - self.lo) / (np.asarray(self.dims) - 1)

    @property
    def n_frames(self) -> int:
        return self.offsets.shape[0]

    def control_points(self) -> np.ndarray:
        axes = [self.lo[a] + self.spacing[a] * np.arange(self.dims[a]) for a in range(3)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def stencil(self, p: np.ndarray):
        """Trilinear stencil for points inside the box; outside rows get zero weights."""
        p = np.atleast_2d(p)
        inside = np.all((p >= self.lo) & (p <= self.hi), axis=1)
        idx = np.zeros((len(p), 8), dtype=np.int64)
        w = np.zeros((len(p), 8))
        dw = np.zeros((len(p), 8, 3))
        if inside.any():
            i, ww, dd = trilinear_stencil(self.lo, self.spacing, self.dims, p[inside], check=False)
            idx[inside], w[inside], dw[inside] = i, ww, dd
        return idx, w, dw


def lattice_displacement(p: np.ndarray, lattice: LatticeDeform, frame: int, with_jacobian=False):
    idx, w, dw = lattice.stencil(p)
    o = lattice.offsets[frame].reshape(-1, 3)[idx]  # (N, 8, 3)
    disp = np.einsum("nc,ncd->nd", w, o)
    if with_jacobian:
        # d disp_a / d p_b = sum_c o_c[a] * dw_c[b]
        return disp, np.einsum("nca,ncb->nab", o, dw)
    return disp


def lattice_warp(p, lattice: LatticeDeform, frame: int) -> np.ndarray:
    """``p`` plus the trilinear blend of the frame's control offsets (identity outside the box)."""
    single = np.ndim(p) == 1
    pts = np.atleast_2d(np.asarray(p, float))
    out = pts + lattice_displacement(pts, lattice, frame)
    return out[0] if single else out


def _neighbour_pairs(dims):
    n = np.arange(int(np.prod(dims))).reshape(dims)
    pairs = []
    for axis in range(3):
        a = np.take(n, np.arange(dims[axis] - 1), axis=axis).reshape(-1)
        b = np.take(n, np.arange(1, dims[axis]), axis=axis).reshape(-1)
        pairs.append(np.stack([a, b], 1))
    return np.concatenate(pairs)


def arap_penalty(lattice: LatticeDeform, frame: int, with_grad: bool = False):
    """Mean squared offset difference over all 6-neighbour control pairs.

    Zero for constant offset fields (rigid translation of the lattice).
    """
    o = lattice.offsets[frame].reshape(-1, 3)
    pairs = _neighbour_pairs(lattice.dims)
    d = o[pairs[:, 0]] - o[pairs[:, 1]]
    val = float(np.mean(np.einsum("nd,nd->n", d, d)))
    if not with_grad:
        return val
    g = np.zeros_like(o)
    np.add.at(g, pairs[:, 0], 2 * d / len(pairs))
    np.add.at(g, pairs[:, 1], -2 * d / len(pairs))
    return val, g.reshape(lattice.offsets[frame].shape)
