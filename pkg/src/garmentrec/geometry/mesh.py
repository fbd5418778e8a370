"""Triangle meshes, boundary loops, capping and OBJ I/O."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray
    boundary_loops: list[np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(self.faces):
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise ValueError("face index out of range")
            f = self.faces
            if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
                raise ValueError("face repeats a vertex")

    @classmethod
    def empty(cls) -> "TriMesh":
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def is_empty(self) -> bool:
        return self.n_faces == 0

    def copy(self) -> "TriMesh":
        loops = None if self.boundary_loops is None else [l.copy() for l in self.boundary_loops]
        return TriMesh(self.vertices.copy(), self.faces.copy(), loops)

    def with_vertices(self, vertices: np.ndarray) -> "TriMesh":
        """Same connectivity (and boundary loops), new positions."""
        return TriMesh(vertices, self.faces.copy(), self.boundary_loops)

    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]

    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted (E, 2)."""
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)

    def edge_face_counts(self) -> tuple[np.ndarray, np.ndarray]:
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0, return_counts=True)

    def is_watertight(self) -> bool:
        if self.is_empty():
            return False
        _, counts = self.edge_face_counts()
        return bool(np.all(counts == 2))

    def euler_characteristic(self) -> int:
        used = np.unique(self.faces)
        return int(len(used) - len(self.edges()) + self.n_faces)

    def face_normals(self, normalize: bool = True) -> np.ndarray:
        t = self.triangles()
        n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
        if normalize:
            n = n / np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-300)
        return n

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals(normalize=False), axis=1)

    def area(self) -> float:
        return float(self.face_areas().sum())

    def volume(self) -> float:
        """Signed volume; positive for a closed mesh with outward winding."""
        t = self.triangles()
        return float(np.einsum("ij,ij->i", t[:, 0], np.cross(t[:, 1], t[:, 2])).sum() / 6.0)

    def vertex_normals(self) -> np.ndarray:
        # area-weighted
        fn = self.face_normals(normalize=False)
        n = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(n, self.faces[:, k], fn)
        return n / np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-300)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def diagonal(self) -> float:
        lo, hi = self.bounds()
        return float(np.linalg.norm(hi - lo))

    def neighbors(self) -> list[np.ndarray]:
        e = self.edges()
        nbrs: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for a, b in e:
            nbrs[a].append(b)
            nbrs[b].append(a)
        return [np.asarray(n, dtype=np.int64) for n in nbrs]

    def get_boundary_loops(self) -> list[np.ndarray]:
        if self.boundary_loops is None:
            self.boundary_loops = find_boundary_loops(self.faces)
        return self.boundary_loops

    def boundary_vertices(self) -> np.ndarray:
        loops = self.get_boundary_loops()
        if not loops:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(loops))

    def sample_surface(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Area-uniform samples on the surface."""
        if self.is_empty():
            raise ValueError("empty mesh")
        areas = self.face_areas()
        cdf = np.cumsum(areas)
        cdf /= cdf[-1]
        idx = np.searchsorted(cdf, rng.random(n), side="right")
        idx = np.minimum(idx, self.n_faces - 1)
        r1 = np.sqrt(rng.random(n))
        r2 = rng.random(n)
        t = self.triangles()[idx]
        return ((1 - r1)[:, None] * t[:, 0] + (r1 * (1 - r2))[:, None] * t[:, 1]
                + (r1 * r2)[:, None] * t[:, 2])


def find_boundary_loops(faces: np.ndarray) -> list[np.ndarray]:
    """Ordered boundary cycles, each following the half-edge direction of its faces.

    Raises ValueError on a boundary vertex with more than one outgoing boundary
    half-edge (pinched boundary).
    """
    faces = np.asarray(faces, dtype=np.int64)
    he = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    present = set(map(tuple, he.tolist()))
    nxt: dict[int, int] = {}
    for u, v in he.tolist():
        if (v, u) not in present:
            if u in nxt:
                raise ValueError("degenerate boundary")
            nxt[u] = v
    loops = []
    seen: set[int] = set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        cur = nxt[start]
        while cur != start:
            if cur in seen or cur not in nxt:
                raise ValueError("degenerate boundary")
            loop.append(cur)
            seen.add(cur)
            cur = nxt[cur]
        loops.append(np.asarray(loop, dtype=np.int64))
    return loops


def close_mesh(mesh: TriMesh) -> TriMesh:
    """Cap every boundary loop with a triangle fan around the loop centroid."""
    loops = mesh.get_boundary_loops()
    if not loops:
        return mesh
    verts = [mesh.vertices]
    faces = [mesh.faces]
    n = mesh.n_vertices
    for loop in loops:
        if len(loop) < 3 or len(np.unique(loop)) != len(loop):
            raise ValueError("degenerate boundary")
        pts = mesh.vertices[loop]
        seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        if np.any(seg < 1e-12):
            raise ValueError("degenerate boundary")
        verts.append(pts.mean(axis=0, keepdims=True))
        a = loop
        b = np.roll(loop, -1)
        c = np.full(len(loop), n)
        # boundary half-edge a->b exists; the cap must contain b->a
        faces.append(np.stack([b, a, c], axis=1))
        n += 1
    out = TriMesh(np.concatenate(verts), np.concatenate(faces))
    out.boundary_loops = []
    return out


def merge_meshes(meshes: list[TriMesh]) -> TriMesh:
    verts, faces, off = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + off)
        off += m.n_vertices
    if not verts:
        return TriMesh.empty()
    return TriMesh(np.concatenate(verts), np.concatenate(faces))


def save_obj(mesh: TriMesh, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    path.write_text("\n".join(lines) + "\n")


def load_obj(path: str | Path) -> TriMesh:
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            for k in range(1, len(idx) - 1):
                faces.append([idx[0], idx[k], idx[k + 1]])
    return TriMesh(np.asarray(verts).reshape(-1, 3), np.asarray(faces, dtype=np.int64).reshape(-1, 3))


# -- primitive builders used by templates, mannequin and tests --

def uv_sphere(radius: float = 1.0, n_lat: int = 16, n_lon: int = 32, center=(0.0, 0.0, 0.0)) -> TriMesh:
    verts = [[0.0, 0.0, radius]]
    for i in range(1, n_lat):
        th = np.pi * i / n_lat
        for j in range(n_lon):
            ph = 2 * np.pi * j / n_lon
            verts.append([radius * np.sin(th) * np.cos(ph), radius * np.sin(th) * np.sin(ph),
                          radius * np.cos(th)])
    verts.append([0.0, 0.0, -radius])
    faces = []
    ring = lambda i, j: 1 + (i - 1) * n_lon + (j % n_lon)  # noqa: E731
    for j in range(n_lon):
        faces.append([0, ring(1, j), ring(1, j + 1)])
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            faces.append([a, c, d])
            faces.append([a, d, b])
    last = len(verts) - 1
    for j in range(n_lon):
        faces.append([last, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)])
    return TriMesh(np.asarray(verts) + np.asarray(center), faces)


def icosphere(radius: float = 1.0, subdivisions: int = 3) -> TriMesh:
    t = (1.0 + 5 ** 0.5) / 2.0
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0], [0, -1, t], [0, 1, t],
                  [0, -1, -t], [0, 1, -t], [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], float)
    f = [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
         [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
         [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    verts = list(v / np.linalg.norm(v, axis=1, keepdims=True))
    faces = f
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new
    return TriMesh(np.asarray(verts) * radius, faces)


def box_mesh(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0)) -> TriMesh:
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    c = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], float)
    v = lo + c * (hi - lo)
    # index = 4i + 2j + k
    f = [[0, 1, 3], [0, 3, 2], [4, 6, 7], [4, 7, 5], [0, 4, 5], [0, 5, 1],
         [2, 3, 7], [2, 7, 6], [0, 2, 6], [0, 6, 4], [1, 5, 7], [1, 7, 3]]
    return TriMesh(v, f)


def open_tube(radii_bottom: np.ndarray | float, radius_top: float, y_bottom: float, y_top: float,
              n_around: int = 64, n_rows: int = 24, center_xz=(0.0, 0.0),
              hem_offsets: np.ndarray | None = None) -> TriMesh:
    """Open frustum around the y axis with outward winding.

    Row 0 is the bottom loop, row ``n_rows`` the top loop. ``radii_bottom`` may be
    a per-column array (perturbed hem); ``hem_offsets`` shifts bottom-row heights.
    """
    ang = 2 * np.pi * np.arange(n_around) / n_around
    rb = np.broadcast_to(np.asarray(radii_bottom, float), (n_around,))
    yb = y_bottom + (np.zeros(n_around) if hem_offsets is None else np.asarray(hem_offsets, float))
    verts = []
    for i in range(n_rows + 1):
        s = i / n_rows
        r = (1 - s) * rb + s * radius_top
        y = (1 - s) * yb + s * y_top
        verts.append(np.stack([center_xz[0] + r * np.cos(ang), y, center_xz[1] - r * np.sin(ang)], 1))
    verts = np.concatenate(verts)
    faces = []
    for i in range(n_rows):
        for j in range(n_around):
            a = i * n_around + j
            b = i * n_around + (j + 1) % n_around
            c = (i + 1) * n_around + j
            d = (i + 1) * n_around + (j + 1) % n_around
            faces.append([a, b, d])
            faces.append([a, d, c])
    return TriMesh(verts, faces)
