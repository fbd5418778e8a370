"""Canonical-to-view deformation: lattice displacement followed by skinning."""
from __future__ import annotations

import numpy as np

from ..geometry.grid import OutOfDomainError
from .lattice import LatticeDeform, lattice_displacement
from .skeleton import Pose, Skeleton, blend, skinning_transforms
from .weights import WeightGrid


class DeformField:
    def __init__(self, weights: WeightGrid, skeleton: Skeleton, poses: list[Pose],
                 lattice: LatticeDeform | None = None):
        self.weights = weights
        self.skeleton = skeleton
        self.poses = list(poses)
        self.lattice = lattice
        self._transforms = [skinning_transforms(skeleton, p) for p in self.poses]

    @property
    def n_frames(self) -> int:
        return len(self.poses)

    def transforms(self, frame: int) -> np.ndarray:
        return self._transforms[frame]

    def _pre(self, p: np.ndarray, frame: int, with_jacobian: bool):
        if self.lattice is None:
            return (p, None) if with_jacobian else p
        if with_jacobian:
            d, jd = lattice_displacement(p, self.lattice, frame, with_jacobian=True)
            return p + d, jd
        return p + lattice_displacement(p, self.lattice, frame)

    def warp(self, p: np.ndarray, frame: int) -> np.ndarray:
        p = np.atleast_2d(np.asarray(p, float))
        x = self._pre(p, frame, False)
        if not np.all(self.weights.contains(x)):
            raise OutOfDomainError("out of domain")
        return blend(x, self.weights.sample(x), self._transforms[frame])

    def warp_with_jacobian(self, p: np.ndarray, frame: int):
        """Warped points (N, 3), d warp / d p (N, 3, 3) and d warp / d lattice-displaced point."""
        p = np.atleast_2d(np.asarray(p, float))
        x, jd = self._pre(p, frame, True)
        if not np.all(self.weights.contains(x)):
            raise OutOfDomainError("out of domain")
        w, dw = self.weights.sample(x, with_grad=True)
        a = self._transforms[frame][:, :3, :]
        m = np.einsum("nj,jab->nab", w, a)
        y = np.einsum("nab,nb->na", m[:, :, :3], x) + m[:, :, 3]
        tx = np.einsum("jab,nb->nja", a[:, :, :3], x) + a[None, :, :, 3]  # (N, J, 3)
        j_lbs = m[:, :, :3] + np.einsum("nja,njb->nab", tx, dw)
        j = j_lbs if jd is None else j_lbs @ (np.eye(3) + jd)
        return y, j, j_lbs

    def lattice_grad(self, p: np.ndarray, j_lbs: np.ndarray, upstream: np.ndarray,
                     frame: int) -> np.ndarray:
        """Pull an upstream gradient on warped points back to the frame's lattice offsets."""
        idx, w, _ = self.lattice.stencil(p)
        gx = np.einsum("nab,na->nb", j_lbs, upstream)  # d/dx of upstream . y
        g = np.zeros((int(np.prod(self.lattice.dims)), 3))
        for c in range(8):
            np.add.at(g, idx[:, c], w[:, c, None] * gx)
        return g.reshape(*self.lattice.dims, 3)


def phi_warp(p, field: DeformField, frame: int) -> np.ndarray:
    """Warp canonical point(s) to the view space of ``frame``."""
    single = np.ndim(p) == 1
    out = field.warp(p, frame)
    return out[0] if single else out
