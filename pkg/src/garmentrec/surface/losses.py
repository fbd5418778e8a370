"""Implicit-surface losses on SDF grid values, with analytic gradients."""
from __future__ import annotations

import numpy as np

from ..geometry.curves import PolyCurve3
from ..geometry.grid import OutOfDomainError, SdfGrid, trilinear_stencil
from ..geometry.isosurface import marching_cubes
from ..geometry.mesh import TriMesh


def extract_canonical_mesh(sdf: SdfGrid) -> TriMesh:
    mesh = marching_cubes(sdf, 0.0)
    if mesh.is_empty():
        raise ValueError("empty surface")
    return mesh


def _scatter(sdf: SdfGrid, idx: np.ndarray, weights: np.ndarray) -> np.ndarray:
    n = int(np.prod(sdf.dims))
    return np.bincount(idx.reshape(-1), weights=weights.reshape(-1), minlength=n).reshape(sdf.dims)


def mean_abs_loss(sdf: SdfGrid, points: np.ndarray, with_grad: bool = False):
    """Mean |f| over points; gradient w.r.t. grid values is sign(f) times the trilinear weights."""
    points = np.atleast_2d(np.asarray(points, float))
    if len(points) == 0:
        raise ValueError("no sample points")
    idx, w, _ = trilinear_stencil(sdf.origin, sdf.spacing, sdf.dims, points)
    f = np.einsum("nc,nc->n", w, sdf.values.reshape(-1)[idx])
    val = float(np.mean(np.abs(f)))
    if not with_grad:
        return val
    return val, _scatter(sdf, idx, np.sign(f)[:, None] * w / len(points))


def mcons_loss(sdf: SdfGrid, mesh: TriMesh, with_grad: bool = False):
    """Mean absolute SDF value over the in-domain vertices of the mask-updated mesh."""
    v = mesh.vertices[sdf.contains(mesh.vertices)]
    if len(v) == 0:
        raise OutOfDomainError("no mesh vertex inside the grid")
    return mean_abs_loss(sdf, v, with_grad)


def build_curve_surface(curve: PolyCurve3) -> TriMesh:
    """Triangle fan from the curve centroid to consecutive curve points."""
    if not curve.closed:
        raise ValueError("curve must be closed")
    pts = curve.points
    n = len(pts)
    verts = np.concatenate([pts, pts.mean(axis=0, keepdims=True)])
    faces = np.stack([np.arange(n), np.roll(np.arange(n), -1), np.full(n, n)], axis=1)
    return TriMesh(verts, faces)


def curve_surface_samples(curve: PolyCurve3, n: int, seed: int = 0) -> np.ndarray:
    return build_curve_surface(curve).sample_surface(n, np.random.default_rng(seed))


def ccons_loss(sdf: SdfGrid, curve: PolyCurve3, n_a: int = 1024, seed: int = 0,
               with_grad: bool = False):
    """Mean |f| over ``n_a`` area-uniform samples of the curve's capping disk."""
    return mean_abs_loss(sdf, curve_surface_samples(curve, n_a, seed), with_grad)


def eikonal_samples(sdf: SdfGrid, n: int, rng: np.random.Generator, band: float = 3.0) -> np.ndarray:
    """Half near the zero set (|f| < band * spacing at grid nodes, jittered), half uniform."""
    n_band = n // 2
    lo, hi = sdf.origin, sdf.upper
    uniform = lo + (hi - lo) * rng.random((n - n_band, 3))
    near = np.flatnonzero(np.abs(sdf.values.reshape(-1)) < band * sdf.min_spacing)
    if len(near) == 0 or n_band == 0:
        return np.concatenate([uniform, lo + (hi - lo) * rng.random((n_band, 3))])
    pick = near[rng.integers(0, len(near), n_band)]
    ijk = np.stack(np.unravel_index(pick, sdf.dims), axis=1)
    p = lo + (ijk + rng.random((n_band, 3)) - 0.5) * sdf.spacing
    return np.concatenate([np.clip(p, lo, hi), uniform])


def eikonal_loss(sdf: SdfGrid, samples: np.ndarray, with_grad: bool = False):
    """Mean (|grad f| - 1)^2 over in-domain samples; out-of-domain samples are skipped."""
    samples = np.atleast_2d(np.asarray(samples, float))
    samples = samples[sdf.contains(samples)]
    if len(samples) == 0:
        raise OutOfDomainError("out of domain")
    idx, _, dw = trilinear_stencil(sdf.origin, sdf.spacing, sdf.dims, samples)
    v = sdf.values.reshape(-1)[idx]
    g = np.einsum("ncd,nc->nd", dw, v)
    gn = np.linalg.norm(g, axis=1)
    r = gn - 1
    val = float(np.mean(r * r))
    if not with_grad:
        return val
    unit = np.divide(g, gn[:, None], out=np.zeros_like(g), where=gn[:, None] > 1e-12)
    coef = 2 * r[:, None] * unit / len(samples)
    return val, _scatter(sdf, idx, np.einsum("ncd,nd->nc", dw, coef))
