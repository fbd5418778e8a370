"""Skinning weights diffused from the body surface into a voxel grid."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from ..geometry.grid import trilinear_stencil
from .skeleton import SkinnedBody

TOP_K = 4


@dataclass
class WeightGrid:
    origin: np.ndarray
    spacing: np.ndarray
    dims: tuple[int, int, int]
    joint_idx: np.ndarray  # (nx, ny, nz, 4)
    joint_w: np.ndarray  # (nx, ny, nz, 4)
    n_joints: int
    _dense: np.ndarray | None = field(default=None, repr=False)

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.spacing * (np.asarray(self.dims) - 1)

    def dense(self) -> np.ndarray:
        """(nx*ny*nz, J) dense weight table, built on first use."""
        if self._dense is None:
            n = int(np.prod(self.dims))
            d = np.zeros((n, self.n_joints))
            rows = np.repeat(np.arange(n), TOP_K)
            np.add.at(d, (rows, self.joint_idx.reshape(-1)), self.joint_w.reshape(-1))
            self._dense = d
        return self._dense

    def contains(self, p: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(p)
        return np.all((p >= self.origin - 1e-9) & (p <= self.upper + 1e-9), axis=1)

    def sample(self, p: np.ndarray, with_grad: bool = False):
        """Trilinearly blended weights (N, J), optionally with d w / d p (N, J, 3)."""
        idx, w, dw = trilinear_stencil(self.origin, self.spacing, self.dims, p)
        table = self.dense()
        out = np.zeros((len(idx), self.n_joints))
        grad = np.zeros((len(idx), self.n_joints, 3)) if with_grad else None
        for c in range(8):
            rows = table[idx[:, c]]
            out += w[:, c, None] * rows
            if with_grad:
                grad += rows[:, :, None] * dw[:, c, None, :]
        return (out, grad) if with_grad else out

    def voxel_weights(self, i: int, j: int, k: int) -> list[tuple[int, float]]:
        return [(int(a), float(b)) for a, b in zip(self.joint_idx[i, j, k], self.joint_w[i, j, k]) if b > 0]


def build_weight_grid(body: SkinnedBody, dims=64, bounds=None, margin: float | None = None,
                      passes: int = 10) -> WeightGrid:
    """Propagate per-vertex body weights into a grid.

    Each voxel starts from the weights of its nearest body vertex. ``passes``
    rounds of 3x3x3 box blur with re-normalization then diffuse weights into free
    space; voxels within one voxel diagonal of the body surface keep their
    surface weights so the field still agrees with the body where it matters.
    Only the top four joints per voxel are kept.
    """
    if body.mesh.n_vertices == 0:
        raise ValueError("empty body mesh")
    dims = tuple(np.broadcast_to(np.asarray(dims, dtype=np.int64), (3,)).tolist())
    if min(dims) < 2:
        raise ValueError("weight grid dims must be >= 2")
    if bounds is None:
        lo, hi = body.mesh.bounds()
        if margin is None:
            margin = 0.1 * float(np.linalg.norm(hi - lo))
        lo, hi = lo - margin, hi + margin
    else:
        lo, hi = (np.asarray(b, float) for b in bounds)
    spacing = (hi - lo) / (np.asarray(dims) - 1)
    axes = [lo[a] + spacing[a] * np.arange(dims[a]) for a in range(3)]
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    dist, nn = cKDTree(body.mesh.vertices).query(nodes)
    vw = body.dense_weights()
    w = vw[nn].reshape(*dims, -1)
    if passes > 0:
        pinned = (dist <= np.linalg.norm(spacing)).reshape(dims)
        pinned_vals = w[pinned]
        for _ in range(passes):
            w = ndimage.uniform_filter(w, size=(3, 3, 3, 1), mode="nearest")
            w[pinned] = pinned_vals
            w /= w.sum(axis=-1, keepdims=True)
    flat = w.reshape(-1, w.shape[-1])
    k = min(TOP_K, flat.shape[1])
    top = np.argsort(-flat, axis=1, kind="stable")[:, :k]
    topw = np.take_along_axis(flat, top, axis=1)
    topw = np.maximum(topw, 0)
    topw /= topw.sum(axis=1, keepdims=True)
    if k < TOP_K:
        top = np.pad(top, ((0, 0), (0, TOP_K - k)))
        topw = np.pad(topw, ((0, 0), (0, TOP_K - k)))
    return WeightGrid(lo, spacing, dims, top.reshape(*dims, TOP_K), topw.reshape(*dims, TOP_K),
                      body.n_joints)

