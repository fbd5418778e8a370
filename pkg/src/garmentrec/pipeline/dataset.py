"""On-disk layout of synthetic (or externally prepared) observation sets."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..deform.skeleton import Pose, SkinnedBody, load_poses, save_poses
from ..geometry.camera import Camera
from ..geometry.curves import PolyCurve2, PolyCurve3
from ..geometry.images import load_mask_png, save_mask_png
from ..geometry.mesh import TriMesh, load_obj, save_obj
from ..registration import GarmentTemplate, default_template
from .scene import FrameObservation, SceneConfig, SyntheticScene

# data/
#   scene.json, body.obj, body.json, poses.json, cameras.json
#   template.obj, template.json
#   masks/mask_0000.png ...  curves/frame_0000.json ...
#   gt/canonical.obj, gt/curves.json, gt/frame_0000.obj ...


@dataclass
class Dataset:
    root: Path
    garment_type: str
    body: SkinnedBody
    template: GarmentTemplate
    observations: list[FrameObservation]

    @property
    def poses(self) -> list[Pose]:
        return [o.pose for o in self.observations]


def save_scene(scene: SyntheticScene, out: str | Path) -> Path:
    out = Path(out)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    (out / "curves").mkdir(exist_ok=True)
    (out / "gt").mkdir(exist_ok=True)
    (out / "scene.json").write_text(json.dumps(scene.config.to_dict(), indent=1))
    scene.body.save(out / "body.obj", out / "body.json")
    save_poses(scene.poses, out / "poses.json")
    (out / "cameras.json").write_text(json.dumps([o.camera.to_dict() for o in scene.observations]))
    default_template(scene.config.garment).save(out / "template.obj", out / "template.json")
    for o in scene.observations:
        save_mask_png(o.mask, out / "masks" / f"mask_{o.frame:04d}.png")
        (out / "curves" / f"frame_{o.frame:04d}.json").write_text(
            json.dumps({k: c.to_dict() for k, c in sorted(o.curves.items())}))
    save_obj(scene.garment, out / "gt" / "canonical.obj")
    (out / "gt" / "curves.json").write_text(
        json.dumps({k: c.to_dict(k) for k, c in sorted(scene.gt_curves.items())}))
    for t, m in enumerate(scene.garment_sequence()):
        save_obj(m, out / "gt" / f"frame_{t:04d}.obj")
    return out


def load_dataset(root: str | Path) -> Dataset:
    root = Path(root)
    if not (root / "scene.json").exists():
        raise FileNotFoundError(f"no scene.json in {root}")
    cfg = SceneConfig.from_dict(json.loads((root / "scene.json").read_text()))
    body = SkinnedBody.load(root / "body.obj", root / "body.json")
    poses = load_poses(root / "poses.json")
    cams = [Camera.from_dict(c) for c in json.loads((root / "cameras.json").read_text())]
    template = GarmentTemplate.load(root / "template.obj", root / "template.json")
    obs = []
    for t, (pose, cam) in enumerate(zip(poses, cams)):
        mask = load_mask_png(root / "masks" / f"mask_{t:04d}.png")
        cd = json.loads((root / "curves" / f"frame_{t:04d}.json").read_text())
        obs.append(FrameObservation(t, cam, pose, mask, {k: PolyCurve2.from_dict(v) for k, v in cd.items()}))
    return Dataset(root, cfg.garment, body, template, obs)


def load_gt(gt_dir: str | Path) -> tuple[TriMesh, list[TriMesh], dict[str, PolyCurve3]]:
    gt_dir = Path(gt_dir)
    frames = sorted(gt_dir.glob("frame_*.obj"))
    curves = {k: PolyCurve3.from_dict(v) for k, v in json.loads((gt_dir / "curves.json").read_text()).items()}
    return load_obj(gt_dir / "canonical.obj"), [load_obj(f) for f in frames], curves


def load_mesh_sequence(d: str | Path) -> tuple[TriMesh | None, list[TriMesh]]:
    d = Path(d)
    canon = d / "canonical.obj"
    return (load_obj(canon) if canon.exists() else None,
            [load_obj(f) for f in sorted(d.glob("frame_*.obj"))])


def frame_mask_array(obs: FrameObservation) -> np.ndarray:
    return np.asarray(obs.mask.data) > 0.5
