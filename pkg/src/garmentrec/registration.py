"""Garment templates, handle-based Laplacian deformation and template registration."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .geometry.curves import CURVE_NAMES, PolyCurve3
from .geometry.grid import SdfGrid, trilinear_stencil
from .geometry.isosurface import sdf_from_mesh
from .geometry.mesh import TriMesh, close_mesh, load_obj, open_tube, save_obj

GARMENT_TYPES = ("upper", "dress", "coat", "pants", "skirt")
HANDLE_WEIGHT = 1e4


@dataclass
class GarmentTemplate:
    mesh: TriMesh
    labels: dict[str, np.ndarray]  # curve name -> ordered boundary loop
    garment_type: str

    def __post_init__(self):
        if self.garment_type not in GARMENT_TYPES:
            raise ValueError(f"unknown garment type {self.garment_type!r}")
        loops = self.mesh.get_boundary_loops()
        keys = {frozenset(map(int, lp)) for lp in loops}
        for name, lp in self.labels.items():
            if name not in CURVE_NAMES:
                raise ValueError(f"unknown curve label {name!r}")
            if frozenset(map(int, lp)) not in keys:
                raise ValueError(f"label {name!r} is not a boundary loop")
        if len(self.labels) != len(loops):
            raise ValueError("every boundary loop needs a label")

    def save(self, obj_path: str | Path, json_path: str | Path) -> None:
        save_obj(self.mesh, obj_path)
        Path(json_path).write_text(json.dumps({
            "garment_type": self.garment_type,
            "loops": {k: np.asarray(v).tolist() for k, v in self.labels.items()}}))

    @classmethod
    def load(cls, obj_path: str | Path, json_path: str | Path) -> "GarmentTemplate":
        d = json.loads(Path(json_path).read_text())
        return cls(load_obj(obj_path), {k: np.asarray(v, dtype=np.int64) for k, v in d["loops"].items()},
                   d["garment_type"])


def label_loops_by_height(mesh: TriMesh, top: str, bottom: str) -> dict[str, np.ndarray]:
    loops = sorted(mesh.get_boundary_loops(), key=lambda lp: mesh.vertices[lp, 1].mean())
    if len(loops) != 2:
        raise ValueError("expected exactly two boundary loops")
    return {bottom: loops[0], top: loops[1]}


def default_template(garment_type: str, n_around: int = 48, n_rows: int = 16) -> GarmentTemplate:
    """Generic open-tube template for the garment types the synthetic scenes produce."""
    if garment_type == "skirt":
        mesh = open_tube(0.28, 0.16, 0.5, 1.0, n_around, n_rows)
        return GarmentTemplate(mesh, label_loops_by_height(mesh, "waist", "hemline_bottom"), "skirt")
    if garment_type in ("upper", "coat"):
        mesh = open_tube(0.19, 0.15, 0.98, 1.34, n_around, n_rows)
        return GarmentTemplate(mesh, label_loops_by_height(mesh, "neckline", "hemline_upper"),
                               garment_type)
    if garment_type == "dress":
        mesh = open_tube(0.28, 0.15, 0.58, 1.34, n_around, n_rows)
        return GarmentTemplate(mesh, label_loops_by_height(mesh, "neckline", "hemline_bottom"), "dress")
    raise ValueError(f"no built-in template for garment type {garment_type!r}")


@dataclass
class HandleConstraints:
    indices: np.ndarray
    targets: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        self.targets = np.asarray(self.targets, dtype=np.float64).reshape(-1, 3)
        self.weights = np.broadcast_to(np.asarray(self.weights, dtype=np.float64),
                                       self.indices.shape).copy()
        if len(self.targets) != len(self.indices):
            raise ValueError("one target per handle")
        if np.any(self.weights <= 0):
            raise ValueError("handle weights must be positive")

    def __len__(self) -> int:
        return len(self.indices)


def uniform_laplacian(mesh: TriMesh) -> sparse.csr_matrix:
    """``L = I - D^-1 A`` over the edge graph."""
    e = mesh.edges()
    n = mesh.n_vertices
    a = sparse.coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                          shape=(n, n)).tocsr()
    deg = np.asarray(a.sum(axis=1)).reshape(-1)
    inv = np.divide(1.0, deg, out=np.zeros(n), where=deg > 0)
    return (sparse.identity(n) - sparse.diags(inv) @ a).tocsr()


def laplacian_handle_deform(mesh: TriMesh, handles: HandleConstraints) -> TriMesh:
    """Minimize ``|L x - L x0|^2 + sum_k w_k |x_vk - target_k|^2`` per coordinate."""
    n = mesh.n_vertices
    if len(handles) == 0:
        raise ValueError("no handles")
    if np.any((handles.indices < 0) | (handles.indices >= n)):
        raise ValueError("handle index out of range")
    lap = uniform_laplacian(mesh)
    adj = (lap != 0).astype(np.int8)
    ncomp, comp = connected_components(adj, directed=False)
    if len(np.setdiff1d(np.arange(ncomp), comp[handles.indices])):
        raise ValueError("singular system: a mesh component has no handles")
    w = np.zeros(n)
    np.add.at(w, handles.indices, handles.weights)
    rhs_t = np.zeros((n, 3))
    np.add.at(rhs_t, handles.indices, handles.weights[:, None] * handles.targets)
    ltl = (lap.T @ lap).tocsc()
    system = (ltl + sparse.diags(w)).tocsc()
    rhs = ltl @ mesh.vertices + rhs_t
    x = splu(system).solve(rhs)
    out = TriMesh(x, mesh.faces.copy())
    out.boundary_loops = mesh.boundary_loops
    return out


def resample_to_loop(loop_points: np.ndarray, curve: PolyCurve3) -> np.ndarray:
    """Arc-length uniform positions on ``curve``, one per loop vertex.

    The correspondence starts at the curve vertex nearest to the first loop
    vertex (lowest index on ties); the traversal direction with the smaller
    total distance to the loop wins.
    """
    d0 = np.linalg.norm(curve.points - loop_points[0], axis=1)
    start = int(np.argmin(d0))
    m = len(loop_points)
    fwd = curve.resample(m, start=start)
    bwd = curve.resample(m, start=start, reverse=True)
    cost_f = np.linalg.norm(fwd - loop_points, axis=1).sum()
    cost_b = np.linalg.norm(bwd - loop_points, axis=1).sum()
    return fwd if cost_f <= cost_b else bwd


def _as_polycurves(curves) -> dict[str, PolyCurve3]:
    if hasattr(curves, "polycurves"):
        return curves.polycurves()
    return {k: v if isinstance(v, PolyCurve3) else PolyCurve3(v) for k, v in curves.items()}


def boundary_handles(template: GarmentTemplate, curves, weight: float = HANDLE_WEIGHT,
                     mesh: TriMesh | None = None) -> HandleConstraints:
    curves = _as_polycurves(curves)
    mesh = template.mesh if mesh is None else mesh
    idx, tgt = [], []
    for name, loop in template.labels.items():
        if name not in curves:
            raise ValueError(f"unmatched curve {name!r}")
        idx.append(loop)
        tgt.append(resample_to_loop(mesh.vertices[loop], curves[name]))
    return HandleConstraints(np.concatenate(idx), np.concatenate(tgt), weight)


def init_sdf_from_template(template: GarmentTemplate, curves, dims=64, margin: float | None = None,
                           bounds=None) -> SdfGrid:
    """Deform the template so its boundary loops follow ``curves``, cap it, and grid its SDF."""
    deformed = laplacian_handle_deform(template.mesh, boundary_handles(template, curves))
    return sdf_from_mesh(close_mesh(deformed), dims=dims, margin=margin, bounds=bounds)


def _sdf_value_grad(sdf: SdfGrid, p: np.ndarray):
    inside = sdf.contains(p)
    f = np.zeros(len(p))
    g = np.zeros((len(p), 3))
    if inside.any():
        idx, w, dw = trilinear_stencil(sdf.origin, sdf.spacing, sdf.dims, p[inside], check=False)
        v = sdf.values.reshape(-1)[idx]
        f[inside] = np.einsum("nc,nc->n", w, v)
        g[inside] = np.einsum("ncd,nc->nd", dw, v)
    return f, g, inside


def register_template(template: GarmentTemplate, curves, sdf: SdfGrid, iters: int = 20,
                      smoothing: float = 0.1, history: list | None = None, newton_steps: int = 3) -> TriMesh:
    """Fit the open template to final curves (boundary) and the SDF zero set (interior).

    Stage one pins every labeled boundary loop to the arc-length resampled
    curve with a handle-based Laplacian solve. Each later pass applies one
    uniform Laplacian smoothing step to interior vertices and then
    ``newton_steps`` Newton projections ``v - f grad f / |grad f|^2``; vertices
    outside the grid or with a vanishing gradient are left in place.
    """
    mesh = laplacian_handle_deform(template.mesh, boundary_handles(template, curves))
    v = mesh.vertices.copy()
    interior = np.ones(len(v), dtype=bool)
    interior[np.concatenate(list(template.labels.values()))] = False
    lap = uniform_laplacian(mesh)
    for _ in range(iters):
        delta = -(lap @ v)
        v[interior] += smoothing * delta[interior]
        for _ in range(newton_steps):
            f, g, inside = _sdf_value_grad(sdf, v)
            gn2 = np.einsum("nd,nd->n", g, g)
            ok = interior & inside & (gn2 >= 1e-12)
            v[ok] -= (f[ok] / gn2[ok])[:, None] * g[ok]
        if history is not None:
            f2, _, ins2 = _sdf_value_grad(sdf, v)
            history.append(float(np.abs(f2[interior & ins2]).max(initial=0.0)))
    out = TriMesh(v, mesh.faces.copy())
    out.boundary_loops = [lp.copy() for lp in template.mesh.get_boundary_loops()]
    return out
