"""Capsule-limb mannequin used as the body proxy for synthetic scenes."""
from __future__ import annotations

import numpy as np

from ..deform.skeleton import Joint, Skeleton, SkinnedBody, rigid
from ..geometry.mesh import TriMesh, merge_meshes, uv_sphere

# arms hang 30 degrees below horizontal
_ARM = np.array([np.cos(np.pi / 6), -np.sin(np.pi / 6), 0.0])


def _joint_table(p: dict):
    """Joint (name, parent, rest position) rows plus the forearm length."""
    sh, hip, h = p["shoulder_width"] / 2, p["hip_width"] / 2, p["height"]
    up, fore = p["upper_arm"], p["forearm"]
    pelvis = np.array([0, 0.95, 0]) * h / 1.7
    l_sh = np.array([sh, 1.40 * h / 1.7, 0])
    r_sh = l_sh * [-1, 1, 1]
    return [
        ("pelvis", -1, pelvis),
        ("spine", 0, np.array([0, 1.15, 0]) * h / 1.7),
        ("chest", 1, np.array([0, 1.30, 0]) * h / 1.7),
        ("head", 2, np.array([0, 1.50, 0]) * h / 1.7),
        ("l_shoulder", 2, l_sh),
        ("l_elbow", 4, l_sh + up * _ARM),
        ("r_shoulder", 2, r_sh),
        ("r_elbow", 6, r_sh + up * _ARM * [-1, 1, 1]),
        ("l_hip", 0, np.array([hip, 0.90 * h / 1.7, 0])),
        ("l_knee", 8, np.array([hip, 0.50 * h / 1.7, 0])),
        ("r_hip", 0, np.array([-hip, 0.90 * h / 1.7, 0])),
        ("r_knee", 10, np.array([-hip, 0.50 * h / 1.7, 0])),
    ], fore


DEFAULT_PROPORTIONS = {"height": 1.7, "shoulder_width": 0.34, "hip_width": 0.18, "upper_arm": 0.27,
                       "forearm": 0.25, "torso_radius": 0.13, "pelvis_radius": 0.13,
                       "arm_radius": 0.045, "leg_radius": 0.07}


def capsule(a, b, radius: float, n_lat: int = 8, n_lon: int = 16) -> tuple[TriMesh, np.ndarray]:
    """Closed capsule from ``a`` to ``b``; also returns each vertex's axial parameter in [0, 1]."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    axis = b - a
    length = float(np.linalg.norm(axis))
    s = uv_sphere(radius, 2 * n_lat, n_lon)
    v = s.vertices.copy()
    # uv_sphere poles lie on z; stretch the upper hemisphere along z by the axis length
    top = v[:, 2] >= -1e-12
    v[top, 2] += length
    t = np.clip(v[:, 2] / length, 0, 1) if length > 0 else np.full(len(v), 0.5)
    z = axis / length if length > 0 else np.array([0.0, 0.0, 1.0])
    helper = np.array([1.0, 0, 0]) if abs(z[0]) < 0.9 else np.array([0, 1.0, 0])
    x = np.cross(helper, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    rot = np.stack([x, y, z], axis=1)
    return TriMesh(v @ rot.T + a, s.faces), t


def build_mannequin(proportions: dict | None = None) -> SkinnedBody:
    """Skinned capsule body: y up, facing +z, arms angled down, legs straight."""
    p = {**DEFAULT_PROPORTIONS, **(proportions or {})}
    table, fore = _joint_table(p)
    joints = [Joint(n, par, rigid(translation=pos if par < 0 else pos - table[par][2]))
              for n, par, pos in table]
    skel = Skeleton(joints)
    pos = {n: q for n, _, q in table}
    h = p["height"] / 1.7
    tr, ar, lr = p["torso_radius"], p["arm_radius"], p["leg_radius"]
    # (joint, start, end, radius, parent blend joint, child blend joint)
    parts = [
        ("pelvis", pos["pelvis"] + [-0.04, -0.03 * h, 0], pos["pelvis"] + [0.04, -0.03 * h, 0],
         p["pelvis_radius"], None, None),
        ("spine", np.array([0, 1.0 * h, 0]), pos["chest"], tr, "pelvis", "chest"),
        ("chest", pos["chest"], np.array([0, 1.40 * h, 0]), tr, None, None),
        ("head", pos["head"] + [0, 0.05 * h, 0], pos["head"] + [0, 0.10 * h, 0], 0.1 * h, None, None),
    ]
    for side, sgn in (("l", 1), ("r", -1)):
        arm = _ARM * [sgn, 1, 1]
        sh, el = pos[f"{side}_shoulder"], pos[f"{side}_elbow"]
        parts += [
            (f"{side}_shoulder", sh, el, ar, "chest", f"{side}_elbow"),
            (f"{side}_elbow", el, el + fore * arm, ar * 0.9, None, None),
            (f"{side}_hip", pos[f"{side}_hip"], pos[f"{side}_knee"], lr, "pelvis", f"{side}_knee"),
            (f"{side}_knee", pos[f"{side}_knee"], pos[f"{side}_knee"] - [0, 0.42 * h, 0], lr * 0.8,
             None, None),
        ]
    meshes, idx, wts = [], [], []
    for name, a, b, r, par, child in parts:
        m, t = capsule(a, b, r)
        j = skel.index(name)
        ji = np.zeros((len(t), 4), dtype=np.int64)
        jw = np.zeros((len(t), 4))
        ji[:, 0] = j
        jw[:, 0] = 1.0
        if par is not None:
            w = np.clip(0.5 * (1 - t / 0.25), 0, 0.5)
            ji[:, 1], jw[:, 1] = skel.index(par), w
            jw[:, 0] -= w
        if child is not None:
            w = np.clip(0.5 * (t - 0.75) / 0.25, 0, 0.5)
            ji[:, 2], jw[:, 2] = skel.index(child), w
            jw[:, 0] -= w
        meshes.append(m)
        idx.append(ji)
        wts.append(jw)
    return SkinnedBody(merge_meshes(meshes), np.concatenate(idx), np.concatenate(wts), skel)
