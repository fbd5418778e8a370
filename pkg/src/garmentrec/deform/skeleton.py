"""Kinematic tree, poses and linear blend skinning."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from ..geometry.mesh import TriMesh, load_obj, save_obj


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """(w, x, y, z) unit quaternion(s) to rotation matrices."""
    q = np.asarray(q, dtype=np.float64)
    return Rotation.from_quat(q[..., [1, 2, 3, 0]]).as_matrix()


def matrix_to_quat(r: np.ndarray) -> np.ndarray:
    q = Rotation.from_matrix(r).as_quat()
    return q[..., [3, 0, 1, 2]]


def axis_angle_quat(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, float)
    axis = axis / np.linalg.norm(axis)
    return np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis])


def rigid(rotation=None, translation=None) -> np.ndarray:
    t = np.eye(4)
    if rotation is not None:
        t[:3, :3] = rotation
    if translation is not None:
        t[:3, 3] = translation
    return t


@dataclass
class Joint:
    name: str
    parent: int
    rest: np.ndarray  # 4x4 rest transform relative to the parent joint


class Skeleton:
    def __init__(self, joints: list[Joint]):
        roots = [i for i, j in enumerate(joints) if j.parent == -1]
        if len(roots) != 1:
            raise ValueError("skeleton needs exactly one root")
        for i, j in enumerate(joints):
            if j.parent >= i:
                raise ValueError("joints must be topologically sorted")
        self.joints = joints
        self.names = [j.name for j in joints]
        self.rest_global = np.empty((len(joints), 4, 4))
        for i, j in enumerate(joints):
            r = np.asarray(j.rest, float)
            self.rest_global[i] = r if j.parent < 0 else self.rest_global[j.parent] @ r
        self.rest_global_inv = np.linalg.inv(self.rest_global)

    def __len__(self) -> int:
        return len(self.joints)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown joint {name!r}") from None

    def joint_positions(self) -> np.ndarray:
        return self.rest_global[:, :3, 3].copy()

    def to_dict(self) -> dict:
        return {"joints": [{"name": j.name, "parent": j.parent, "rest": np.asarray(j.rest).tolist()}
                           for j in self.joints]}

    @classmethod
    def from_dict(cls, d: dict) -> "Skeleton":
        return cls([Joint(j["name"], int(j["parent"]), np.asarray(j["rest"], float))
                    for j in d["joints"]])


@dataclass
class Pose:
    rotations: np.ndarray  # (J, 4) local joint rotations, (w, x, y, z)
    translation: np.ndarray  # root translation

    def __post_init__(self):
        self.rotations = np.asarray(self.rotations, dtype=np.float64).reshape(-1, 4)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if np.any(np.abs(np.linalg.norm(self.rotations, axis=1) - 1) > 1e-9):
            raise ValueError("pose quaternions must be unit norm")

    @classmethod
    def identity(cls, n_joints: int) -> "Pose":
        q = np.zeros((n_joints, 4))
        q[:, 0] = 1
        return cls(q, np.zeros(3))

    def to_dict(self) -> dict:
        return {"rotations": self.rotations.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        q = np.asarray(d["rotations"], float)
        return cls(q / np.linalg.norm(q, axis=1, keepdims=True), d["translation"])


def global_transforms(skeleton: Skeleton, pose: Pose) -> np.ndarray:
    """Posed world transform of each joint frame, (J, 4, 4)."""
    rots = quat_to_matrix(pose.rotations)
    g = np.empty((len(skeleton), 4, 4))
    for i, j in enumerate(skeleton.joints):
        local = np.asarray(j.rest) @ rigid(rots[i])
        if j.parent < 0:
            g[i] = rigid(translation=pose.translation) @ local
        else:
            g[i] = g[j.parent] @ local
    return g


def skinning_transforms(skeleton: Skeleton, pose: Pose) -> np.ndarray:
    """Rest-to-posed transforms ``G_j(pose) @ G_j(rest)^-1`` per joint, (J, 4, 4)."""
    return global_transforms(skeleton, pose) @ skeleton.rest_global_inv


def blend(points: np.ndarray, weights: np.ndarray, transforms: np.ndarray) -> np.ndarray:
    """Apply the weight-blended transforms: ``(sum_j w_j T_j) p`` for each point.

    ``weights`` is dense (N, J).
    """
    points = np.atleast_2d(points)
    m = np.einsum("nj,jab->nab", weights, transforms[:, :3, :])
    return np.einsum("nab,nb->na", m[:, :, :3], points) + m[:, :, 3]


def dense_weights(entries, n_joints: int) -> np.ndarray:
    """List of (joint, weight) pairs -> dense weight vector."""
    w = np.zeros(n_joints)
    for j, v in entries:
        w[int(j)] += v
    return w


def lbs_warp(p, weights, pose: Pose, skeleton: Skeleton) -> np.ndarray:
    """Linear blend skinning of point(s) ``p``.

    ``weights`` may be a (joint, weight) list for a single point or a dense
    (N, J) / (J,) array.
    """
    single = np.ndim(p) == 1
    if isinstance(weights, (list, tuple)):
        weights = dense_weights(weights, len(skeleton))
    w = np.atleast_2d(np.asarray(weights, float))
    out = blend(np.atleast_2d(p), w, skinning_transforms(skeleton, pose))
    return out[0] if single else out


class SkinnedBody:
    """Body proxy mesh with at most four joint weights per vertex."""

    def __init__(self, mesh: TriMesh, joint_idx: np.ndarray, joint_w: np.ndarray,
                 skeleton: Skeleton):
        joint_idx = np.asarray(joint_idx, dtype=np.int64)
        joint_w = np.asarray(joint_w, dtype=np.float64)
        cols = joint_idx.size // mesh.n_vertices if mesh.n_vertices else 1
        joint_idx = joint_idx.reshape(mesh.n_vertices, cols)
        joint_w = joint_w.reshape(mesh.n_vertices, cols)
        if joint_idx.shape[1] > 4:
            raise ValueError("at most 4 joints per vertex")
        if np.any(joint_w < 0) or np.any(np.abs(joint_w.sum(axis=1) - 1) > 1e-6):
            raise ValueError("vertex weights must be non-negative and sum to 1")
        self.mesh = mesh
        self.joint_idx = joint_idx
        self.joint_w = joint_w
        self.skeleton = skeleton

    @property
    def n_joints(self) -> int:
        return len(self.skeleton)

    def dense_weights(self) -> np.ndarray:
        w = np.zeros((self.mesh.n_vertices, self.n_joints))
        rows = np.repeat(np.arange(self.mesh.n_vertices), self.joint_idx.shape[1])
        np.add.at(w, (rows, self.joint_idx.reshape(-1)), self.joint_w.reshape(-1))
        return w

    def posed(self, pose: Pose) -> TriMesh:
        if self.mesh.is_empty():
            return self.mesh
        v = blend(self.mesh.vertices, self.dense_weights(), skinning_transforms(self.skeleton, pose))
        return self.mesh.with_vertices(v)

    def save(self, obj_path: str | Path, json_path: str | Path) -> None:
        save_obj(self.mesh, obj_path)
        d = self.skeleton.to_dict()
        d["weights"] = [[[int(j), float(w)] for j, w in zip(ji, jw) if w > 0]
                        for ji, jw in zip(self.joint_idx, self.joint_w)]
        Path(json_path).write_text(json.dumps(d))

    @classmethod
    def load(cls, obj_path: str | Path, json_path: str | Path) -> "SkinnedBody":
        mesh = load_obj(obj_path)
        d = json.loads(Path(json_path).read_text())
        skel = Skeleton.from_dict(d)
        idx = np.zeros((mesh.n_vertices, 4), dtype=np.int64)
        w = np.zeros((mesh.n_vertices, 4))
        for i, entries in enumerate(d["weights"]):
            for k, (j, v) in enumerate(entries):
                idx[i, k], w[i, k] = j, v
        w /= w.sum(axis=1, keepdims=True)
        return cls(mesh, idx, w, skel)


def save_poses(poses: list[Pose], path: str | Path) -> None:
    Path(path).write_text(json.dumps([p.to_dict() for p in poses]))


def load_poses(path: str | Path) -> list[Pose]:
    return [Pose.from_dict(d) for d in json.loads(Path(path).read_text())]
