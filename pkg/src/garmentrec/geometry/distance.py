"""Point-set distances."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


def _check(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or len(a) == 0 or len(b) == 0:
        raise ValueError("empty point set")
    if a.shape[1] != b.shape[1]:
        raise ValueError("dimension mismatch")
    return a, b


def nearest(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For every row of ``a``: distance to, and index of, its nearest row in ``b``."""
    if len(b) * len(a) <= 4096:
        d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
        j = np.argmin(d, axis=1)
        return d[np.arange(len(a)), j], j
    d, j = cKDTree(b).query(a)
    return d, j


def chamfer_distance(a, b) -> float:
    """Symmetric Chamfer distance: mean NN distance a->b plus mean NN distance b->a.

    Distances are unsquared Euclidean; works for 2D and 3D sets.
    """
    a, b = _check(a, b)
    dab, _ = nearest(a, b)
    dba, _ = nearest(b, a)
    return float(dab.mean() + dba.mean())


def chamfer_with_grad(a, b) -> tuple[float, np.ndarray]:
    """Chamfer distance and its gradient with respect to the points of ``a``."""
    a, b = _check(a, b)
    dab, jab = nearest(a, b)
    dba, jba = nearest(b, a)
    g = np.zeros_like(a)
    diff = a - b[jab]
    g += diff / np.maximum(dab, 1e-12)[:, None] / len(a)
    diff2 = b - a[jba]
    np.add.at(g, jba, -diff2 / np.maximum(dba, 1e-12)[:, None] / len(b))
    return float(dab.mean() + dba.mean()), g
