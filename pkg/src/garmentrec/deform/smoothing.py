"""Temporal smoothing of pose sequences."""
from __future__ import annotations

import numpy as np

from .skeleton import Pose


def second_difference_energy(x: np.ndarray) -> float:
    d = x[:-2] - 2 * x[1:-1] + x[2:]
    return float(np.sum(d * d))


def _jacobi_targets(x: np.ndarray) -> np.ndarray:
    # per-index minimiser of sum_s |x_{s-1} - 2 x_s + x_{s+1}|^2 with the rest fixed
    t = len(x)
    d = np.zeros_like(x)
    d[1:-1] = x[:-2] - 2 * x[1:-1] + x[2:]
    out = x.copy()
    for i in range(1, t - 1):
        num = np.zeros(x.shape[1:])
        den = 0.0
        for s in (i - 1, i, i + 1):
            if 1 <= s <= t - 2:
                a = -2.0 if s == i else 1.0
                r = d[s] - a * x[i]
                num -= a * r
                den += a * a
        out[i] = num / den
    return out


def smooth_poses(poses: list[Pose], weight: float = 0.5) -> list[Pose]:
    """One damped Jacobi pass on the second-difference energy of the pose sequence.

    Quaternion components (hemisphere-aligned, then re-normalised) and root
    translations are smoothed; the first and last poses are kept exactly.
    """
    if len(poses) < 3:
        return list(poses)
    q = np.stack([p.rotations for p in poses]).copy()
    for t in range(1, len(q)):
        flip = np.einsum("jc,jc->j", q[t], q[t - 1]) < 0
        q[t, flip] *= -1
    tr = np.stack([p.translation for p in poses])
    q_new = q + weight * (_jacobi_targets(q) - q)
    tr_new = tr + weight * (_jacobi_targets(tr) - tr)
    q_new /= np.linalg.norm(q_new, axis=-1, keepdims=True)
    out = [Pose(q_new[t], tr_new[t]) for t in range(len(poses))]
    out[0], out[-1] = poses[0], poses[-1]
    return out
