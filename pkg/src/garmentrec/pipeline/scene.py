"""Deterministic synthetic garment scenes with masks and visible curve traces."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..deform.skeleton import Pose, SkinnedBody, axis_angle_quat, blend, skinning_transforms
from ..geometry.camera import Camera, project_unchecked
from ..geometry.curves import PolyCurve2, PolyCurve3
from ..geometry.images import ScalarImage
from ..geometry.mesh import TriMesh, merge_meshes, open_tube
from ..geometry.raycast import occluded_by
from ..registration import label_loops_by_height
from ..visibility import rasterize_depth
from .mannequin import build_mannequin


class ConfigError(ValueError):
    """Invalid scene or run configuration."""


@dataclass
class Keyframe:
    frame: int
    joint: str
    axis: tuple[float, float, float]
    angle_deg: float


@dataclass
class SceneConfig:
    garment: str = "skirt"
    n_frames: int = 60
    turn_deg: float = 360.0
    keyframes: list[Keyframe] = field(default_factory=list)
    proportions: dict = field(default_factory=dict)
    width: int = 256
    height: int = 256
    fx: float = 420.0
    eye: tuple[float, float, float] = (0.0, 0.8, 2.6)
    target: tuple[float, float, float] = (0.0, 0.78, 0.0)
    hem_amplitude: float = 0.03
    hem_lobes: int = 5
    garment_around: int = 64
    garment_rows: int = 24
    curve_samples: int = 128
    seed: int = 0

    def __post_init__(self):
        self.keyframes = [k if isinstance(k, Keyframe) else Keyframe(**k) for k in self.keyframes]
        if self.n_frames < 2:
            raise ConfigError("a scene needs at least 2 frames")
        if self.garment not in ("skirt", "upper", "coat", "dress"):
            raise ConfigError(f"garment type {self.garment!r} is not supported by the scene generator")
        if self.width < 8 or self.height < 8 or self.fx <= 0:
            raise ConfigError("invalid image size or focal length")

    @property
    def full_turn(self) -> bool:
        return abs(self.turn_deg) >= 360.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown scene config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from None


@dataclass
class FrameObservation:
    frame: int
    camera: Camera
    pose: Pose
    mask: ScalarImage
    curves: dict[str, PolyCurve2]

    def __post_init__(self):
        if self.mask.width != self.camera.width or self.mask.height != self.camera.height:
            raise ValueError("mask size must match the camera")


@dataclass
class SyntheticScene:
    config: SceneConfig
    body: SkinnedBody
    garment: TriMesh  # canonical ground-truth garment
    garment_weights: np.ndarray  # dense (V, J)
    gt_curves: dict[str, PolyCurve3]  # canonical boundary curves
    loops: dict[str, np.ndarray]
    poses: list[Pose]
    observations: list[FrameObservation]

    def garment_sequence(self) -> list[TriMesh]:
        return [self.garment.with_vertices(blend(self.garment.vertices, self.garment_weights,
                                                 skinning_transforms(self.body.skeleton, p)))
                for p in self.poses]


def build_garment(cfg: SceneConfig) -> tuple[TriMesh, dict[str, np.ndarray]]:
    """Ground-truth canonical garment and its labeled boundary loops."""
    n = cfg.garment_around
    th = 2 * np.pi * np.arange(n) / n
    phase = np.random.default_rng(cfg.seed).uniform(0, 2 * np.pi)
    wobble = cfg.hem_amplitude * np.sin(cfg.hem_lobes * th + phase)
    if cfg.garment == "skirt":
        mesh = open_tube(0.34 + wobble, 0.18, 0.45, 1.0, n, cfg.garment_rows)
        return mesh, label_loops_by_height(mesh, "waist", "hemline_bottom")
    if cfg.garment in ("upper", "coat"):
        mesh = open_tube(0.2 + 0.5 * wobble, 0.16, 0.95, 1.36, n, cfg.garment_rows)
        return mesh, label_loops_by_height(mesh, "neckline", "hemline_upper")
    mesh = open_tube(0.32 + wobble, 0.16, 0.55, 1.36, n, cfg.garment_rows)
    return mesh, label_loops_by_height(mesh, "neckline", "hemline_bottom")


def nearest_vertex_weights(points: np.ndarray, body: SkinnedBody) -> np.ndarray:
    _, nn = cKDTree(body.mesh.vertices).query(points)
    return body.dense_weights()[nn]


def make_poses(cfg: SceneConfig, body: SkinnedBody) -> list[Pose]:
    """Root rotation sweep about the vertical axis plus interpolated joint keyframes."""
    skel = body.skeleton
    tracks: dict[tuple[str, tuple], list[tuple[int, float]]] = {}
    for k in cfg.keyframes:
        try:
            skel.index(k.joint)
        except KeyError:
            raise ConfigError(f"motion script references unknown joint {k.joint!r}") from None
        tracks.setdefault((k.joint, tuple(float(a) for a in k.axis)), []).append((k.frame, k.angle_deg))
    poses = []
    for t in range(cfg.n_frames):
        q = np.zeros((len(skel), 4))
        q[:, 0] = 1.0
        rots = {}
        for (joint, axis), keys in tracks.items():
            keys = sorted(keys)
            ang = np.interp(t, [f for f, _ in keys], [a for _, a in keys])
            rots.setdefault(joint, []).append(axis_angle_quat(axis, np.deg2rad(ang)))
        for joint, qs in rots.items():
            acc = np.array([1.0, 0, 0, 0])
            for qq in qs:
                acc = _qmul(acc, qq)
            q[skel.index(joint)] = acc / np.linalg.norm(acc)
        yaw = np.deg2rad(cfg.turn_deg) * t / cfg.n_frames
        q[0] = _qmul(axis_angle_quat((0, 1, 0), yaw), q[0])
        q[0] /= np.linalg.norm(q[0])
        poses.append(Pose(q, np.zeros(3)))
    return poses


def _qmul(a, b):
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2, w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
                     w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2, w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2])


def loop_samples(vertices: np.ndarray, loop: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Arc-length uniform samples on a canonical loop as (segment start, segment end, t)."""
    pts = vertices[loop]
    seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.arange(n) * cum[-1] / n
    k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(pts) - 1)
    t = (s - cum[k]) / seg[k]
    return loop[k], np.roll(loop, -1)[k], t


def render_observation(frame: int, cam: Camera, pose: Pose, garment_view: TriMesh, body_view: TriMesh,
                       curve_view: dict[str, np.ndarray], tol: float = 1e-4) -> FrameObservation:
    g = rasterize_depth(garment_view, cam).depth
    b = rasterize_depth(body_view, cam).depth
    mask = (np.isfinite(g) & (g <= b)).astype(np.float64)
    occluders = merge_meshes([garment_view, body_view])
    curves = {}
    for name, pts in curve_view.items():
        vis = ~occluded_by(cam, pts, occluders, tol=tol)
        pix, _, ok = project_unchecked(cam, pts)
        keep = vis & ok
        inside = keep & (pix[:, 0] >= 0) & (pix[:, 0] <= cam.width - 1) & (pix[:, 1] >= 0) \
            & (pix[:, 1] <= cam.height - 1)
        if inside.any():
            curves[name] = PolyCurve2(pix[inside], name)
    return FrameObservation(frame, cam, pose, ScalarImage(cam.width, cam.height, mask), curves)


def scene_camera(cfg: SceneConfig) -> Camera:
    return Camera.look_at(cfg.eye, cfg.target, fx=cfg.fx, width=cfg.width, height=cfg.height)


def synth_scene(cfg: SceneConfig) -> SyntheticScene:
    """Mannequin, skinned ground-truth garment, animation, masks and visible curve traces."""
    body = build_mannequin(cfg.proportions)
    garment, loops = build_garment(cfg)
    gw = nearest_vertex_weights(garment.vertices, body)
    poses = make_poses(cfg, body)
    cam = scene_camera(cfg)
    gt_curves = {k: PolyCurve3(garment.vertices[lp]) for k, lp in loops.items()}
    samples = {k: loop_samples(garment.vertices, lp, cfg.curve_samples) for k, lp in loops.items()}
    bw = body.dense_weights()
    obs = []
    for t, pose in enumerate(poses):
        tf = skinning_transforms(body.skeleton, pose)
        gv = blend(garment.vertices, gw, tf)
        bv = blend(body.mesh.vertices, bw, tf)
        cv = {k: (1 - s[2])[:, None] * gv[s[0]] + s[2][:, None] * gv[s[1]] for k, s in samples.items()}
        obs.append(render_observation(t, cam, pose, garment.with_vertices(gv), body.mesh.with_vertices(bv), cv))
    return SyntheticScene(cfg, body, garment, gw, gt_curves, loops, poses, obs)
