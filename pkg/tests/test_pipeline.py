import json
import logging
import subprocess
import sys

import numpy as np
import pytest

from garmentrec.geometry.images import ScalarImage
from garmentrec.geometry.mesh import TriMesh, icosphere, merge_meshes
from garmentrec.optim import DivergenceError
from garmentrec.pipeline import cli
from garmentrec.pipeline.config import RunConfig
from garmentrec.pipeline.dataset import load_dataset, load_gt, save_scene
from garmentrec.pipeline.metrics import MetricsReport, metric_ccv, metric_cd
from garmentrec.pipeline.observe import extract_visible_curves_from_mask
from garmentrec.pipeline.run import initialize_run, load_checkpoint, optimize, resume, run_pipeline
from garmentrec.pipeline.scene import ConfigError, SceneConfig, synth_scene
from oracles import brute_chamfer, raycast_occluded

TINY_SCENE = dict(n_frames=6, width=96, height=96, fx=158.0, garment_around=32, garment_rows=8, curve_samples=48)
TINY_RUN = dict(grid_dims=24, weight_dims=24, lattice_dims=4, epochs=2, k_curve=3, k_surface=5, period=1,
                mask_batch=2, mask_iters=1, rigid_iters=20, register_iters=5, n_a=200, n_eik=500,
                cd_samples=2000, cd_frame_stride=2)


@pytest.fixture(scope="module")
def tiny_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny") / "data"
    save_scene(synth_scene(SceneConfig(**TINY_SCENE)), root)
    return root


def tiny_cfg(**kw):
    return RunConfig(**{**TINY_RUN, **kw})


# -- synthetic scenes --------------------------------------------------------------------------

def test_scene_masks_nonempty_full_turn():
    scene = synth_scene(SceneConfig(**TINY_SCENE))
    assert scene.config.full_turn
    assert all(np.asarray(o.mask.data).sum() > 0 for o in scene.observations)


def test_scene_deterministic():
    a = synth_scene(SceneConfig(**TINY_SCENE, seed=4))
    b = synth_scene(SceneConfig(**TINY_SCENE, seed=4))
    for oa, ob in zip(a.observations, b.observations):
        assert np.array_equal(oa.mask.data, ob.mask.data)
        assert oa.curves.keys() == ob.curves.keys()
        for k in oa.curves:
            assert np.array_equal(oa.curves[k].points, ob.curves[k].points)


def test_static_front_hemline_is_front_arc():
    from garmentrec.deform.skeleton import blend, skinning_transforms
    from garmentrec.geometry.camera import project
    from garmentrec.pipeline.scene import loop_samples
    cfg = SceneConfig(**{**TINY_SCENE, "n_frames": 2, "turn_deg": 0.0, "curve_samples": 96})
    scene = synth_scene(cfg)
    obs = scene.observations[0]
    tf = skinning_transforms(scene.body.skeleton, scene.poses[0])
    gv = blend(scene.garment.vertices, scene.garment_weights, tf)
    bv = blend(scene.body.mesh.vertices, scene.body.dense_weights(), tf)
    a, b, t = loop_samples(scene.garment.vertices, scene.loops["hemline_bottom"], 96)
    hem = (1 - t)[:, None] * gv[a] + t[:, None] * gv[b]
    occluders = merge_meshes([scene.garment.with_vertices(gv), scene.body.mesh.with_vertices(bv)])
    visible = ~raycast_occluded(obs.camera, hem, occluders.triangles(), 1e-4)
    pix = project(obs.camera, hem)[0]
    zeta = obs.curves["hemline_bottom"].points
    assert len(zeta) == visible.sum()
    assert np.allclose(zeta, pix[visible])
    # the camera sits on +z, so every kept hem sample is on the front half
    assert np.all(hem[visible, 2] > 0)


def test_scene_config_errors():
    with pytest.raises(ConfigError, match="unknown joint"):
        synth_scene(SceneConfig(**TINY_SCENE, keyframes=[dict(frame=0, joint="tail", axis=(1, 0, 0), angle_deg=10)]))
    with pytest.raises(ConfigError):
        SceneConfig(n_frames=1)
    with pytest.raises(ConfigError):
        SceneConfig(garment="pants")
    with pytest.raises(ConfigError, match="unknown scene config keys"):
        SceneConfig.from_dict({"frames": 3})


def test_dataset_roundtrip(tiny_data):
    d = load_dataset(tiny_data)
    scene = synth_scene(SceneConfig(**TINY_SCENE))
    assert d.garment_type == "skirt" and len(d.observations) == 6
    for o, ref in zip(d.observations, scene.observations):
        assert np.array_equal(np.asarray(o.mask.data) > 0.5, np.asarray(ref.mask.data) > 0.5)
        assert np.allclose(o.camera.rotation, ref.camera.rotation)
    canon, seq, curves = load_gt(tiny_data / "gt")
    assert len(seq) == 6 and set(curves) == {"waist", "hemline_bottom"}
    assert np.allclose(canon.vertices, scene.garment.vertices, atol=1e-6)


# -- metrics ---------------------------------------------------------------------------------------

def test_cd_self_and_shift():
    mesh = icosphere(0.5, 4)
    assert metric_cd(mesh, mesh) <= 0.02
    shifted = mesh.with_vertices(mesh.vertices + [0.01, 0, 0])
    # a translation along the normal of a flat sheet moves every sample by exactly 1 cm
    flat = TriMesh(np.array([[0, 0, 0], [1.0, 0, 0], [0, 1, 0], [1, 1, 0]]), [[0, 1, 2], [1, 3, 2]])
    assert metric_cd(flat, flat.with_vertices(flat.vertices + [0, 0, 0.01])) == pytest.approx(2.0, rel=0.05)
    assert metric_cd(mesh, shifted) > 0.5


def test_cd_empty_error():
    with pytest.raises(ValueError, match="empty mesh"):
        metric_cd(TriMesh.empty(), icosphere(1, 1))


def test_ccv_cases(rng):
    mesh = icosphere(0.3, 2)
    assert metric_ccv([mesh] * 4) == 0.0
    d = np.array([0.003, -0.004, 0.012])
    seq = [mesh.with_vertices(mesh.vertices + t * d) for t in range(5)]
    assert metric_ccv(seq) == pytest.approx(100 * np.linalg.norm(d), rel=1e-12)
    jitter = [mesh.with_vertices(mesh.vertices + rng.normal(scale=0.01, size=mesh.vertices.shape)) for _ in range(4)]
    total, count = 0.0, 0
    for t in range(3):
        for i in range(mesh.n_vertices):
            total += float(np.sum((jitter[t + 1].vertices[i] - jitter[t].vertices[i]) ** 2))
            count += 1
    assert metric_ccv(jitter) == pytest.approx(100 * np.sqrt(total / count), rel=1e-12)
    with pytest.raises(ValueError, match="topology mismatch"):
        metric_ccv([mesh, icosphere(0.3, 1)])
    with pytest.raises(ValueError):
        metric_ccv([mesh])


def test_metrics_report_roundtrip(tmp_path):
    r = MetricsReport(1.5, 0.3, [1.0, 2.0], 0.2, [0, 6], {"a": [1.0]}, {"grid_spacing": 0.01})
    r.save(tmp_path / "r.json")
    assert MetricsReport.load(tmp_path / "r.json") == r
    with pytest.raises(ValueError):
        MetricsReport(-1.0, 0.0)


# -- observations from masks ---------------------------------------------------------------------------

def disk_mask(r, size=96, c=48.0, hole=0.0):
    yy, xx = np.mgrid[0:size, 0:size]
    d = np.hypot(xx - c, yy - c)
    return ScalarImage.mask(((d <= r) & (d >= hole)).astype(float))


def circle_points(r, n=200, c=48.0):
    th = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return np.stack([c + r * np.cos(th), c + r * np.sin(th)], 1)


def test_mask_curve_matches_circle():
    zeta = extract_visible_curves_from_mask(disk_mask(30), circle_points(30, 64), "waist")
    assert brute_chamfer(zeta.points, circle_points(30, 240)) <= 1.0


def test_mask_curve_annulus_keeps_outer_boundary():
    zeta = extract_visible_curves_from_mask(disk_mask(30, hole=15), circle_points(30, 64), "waist")
    r = np.hypot(zeta.points[:, 0] - 48, zeta.points[:, 1] - 48)
    assert len(r) > 50 and r.min() > 25


def test_mask_curve_far_prior_is_empty(caplog):
    with caplog.at_level(logging.WARNING):
        zeta = extract_visible_curves_from_mask(disk_mask(10), circle_points(40, 64), "waist")
    assert len(zeta.points) == 0 and "no mask boundary" in caplog.text


def test_mask_curve_errors():
    with pytest.raises(ValueError, match="empty mask"):
        extract_visible_curves_from_mask(ScalarImage.mask(np.zeros((8, 8))), circle_points(3, 8, 4), "waist")


# -- run configuration -------------------------------------------------------------------------------------

def test_run_config_validation(tmp_path):
    assert RunConfig().rigid_iters == 150
    with pytest.raises(ConfigError):
        RunConfig(lam_proj=-1)
    with pytest.raises(ConfigError):
        RunConfig(period=0)
    with pytest.raises(ConfigError):
        RunConfig(visibility_mode="magic")
    with pytest.raises(ConfigError, match="unknown run config keys"):
        RunConfig.from_dict({"lambda": 1})
    cfg = tiny_cfg(seed=3)
    (tmp_path / "run.json").write_text(json.dumps(cfg.to_dict()))
    assert RunConfig.load(tmp_path / "run.json") == cfg
    (tmp_path / "bad.json").write_text("[1, 2]")
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "bad.json")


# -- driver ----------------------------------------------------------------------------------------------------

def test_zero_epoch_run_is_initialization(tiny_data):
    data = load_dataset(tiny_data)
    cfg = tiny_cfg(epochs=0)
    rec, state = initialize_run(data, cfg)
    res = run_pipeline(data, cfg)
    assert res.state.epoch == 0
    name = rec.surface_name
    assert np.array_equal(res.grids[name].values, state.grids[name].values)
    for k in state.curves.names():
        assert np.array_equal(res.curves[k].points(), state.curves[k].points())
    assert res.registered.n_vertices == data.template.mesh.n_vertices


def checkpoint_bytes(ckpt):
    return {p.name: p.read_bytes() for p in sorted(ckpt.iterdir()) if p.is_file()}


def test_run_deterministic(tiny_data, tmp_path):
    data = load_dataset(tiny_data)
    gt = load_gt(tiny_data / "gt")[:2]
    r1 = run_pipeline(data, tiny_cfg(), tmp_path / "a", gt)
    r2 = run_pipeline(data, tiny_cfg(), tmp_path / "b", gt)
    assert checkpoint_bytes(tmp_path / "a") == checkpoint_bytes(tmp_path / "b")
    assert json.dumps(r1.report.to_dict()) == json.dumps(r2.report.to_dict())


def test_resume_matches_uninterrupted(tiny_data, tmp_path):
    data = load_dataset(tiny_data)
    cfg = tiny_cfg(epochs=3)
    rec, state = initialize_run(data, cfg, tmp_path / "full")
    optimize(rec, state, tmp_path / "full")
    rec2, state2 = initialize_run(data, cfg, tmp_path / "part")
    optimize(rec2, state2, tmp_path / "part", until=1)
    rec3, state3 = resume(data, cfg, tmp_path / "part")
    assert state3.epoch == 1
    optimize(rec3, state3, tmp_path / "part")
    a, b = checkpoint_bytes(tmp_path / "full"), checkpoint_bytes(tmp_path / "part")
    assert a.keys() == b.keys()
    for k in a:
        if k != "manifest.json":
            assert a[k] == b[k], k
    ma, mb = json.loads(a["manifest.json"]), json.loads(b["manifest.json"])
    assert ma == mb


def test_load_checkpoint_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path)


# -- command line -------------------------------------------------------------------------------------------------

def write_json(path, d):
    path.write_text(json.dumps(d))
    return path.name


def test_cli_end_to_end(tmp_path):
    ws = tmp_path
    write_json(ws / "scene.json", TINY_SCENE)
    write_json(ws / "run.json", TINY_RUN)
    w = ["--workspace", str(ws)]
    assert cli.main(w + ["synth", "--config", "scene.json", "--out", "data"]) == 0
    assert cli.main(w + ["init", "--data", "data", "--run", "run.json"]) == 0
    assert json.loads((ws / "ckpt" / "manifest.json").read_text())["epoch"] == 0
    assert cli.main(w + ["optimize", "--data", "data", "--run", "run.json", "--resume", "--until", "1"]) == 0
    assert json.loads((ws / "ckpt" / "manifest.json").read_text())["epoch"] == 1
    assert cli.main(w + ["optimize", "--data", "data", "--run", "run.json", "--resume"]) == 0
    assert json.loads((ws / "ckpt" / "manifest.json").read_text())["epoch"] == 2
    assert cli.main(w + ["extract", "--checkpoint", "ckpt", "--out", "meshes"]) == 0
    assert (ws / "meshes" / "canonical.obj").exists() and len(list((ws / "meshes").glob("frame_*.obj"))) == 6
    assert cli.main(w + ["eval", "--gt", "data/gt", "--pred", "meshes", "--report", "out/report.json"]) == 0
    report = MetricsReport.load(ws / "out" / "report.json")
    assert report.cd > 0 and report.gt_ccv > 0
    for f in ("cd_frames.csv", "cd_frames.png", "objectives.png"):
        assert (ws / "out" / f).stat().st_size > 0
    timing = json.loads((ws / "timing.json").read_text())
    assert {"synth", "init", "optimize", "extract", "eval"} <= set(timing)


def test_cli_config_errors(tmp_path, capsys):
    w = ["--workspace", str(tmp_path)]
    write_json(tmp_path / "bad_scene.json", {"n_frames": 1})
    assert cli.main(w + ["synth", "--config", "bad_scene.json", "--out", "d"]) == 3
    write_json(tmp_path / "typo.json", {"epoch": 3})
    assert cli.main(w + ["init", "--data", "d", "--run", "typo.json"]) == 3
    assert cli.main(w + ["synth", "--config", "missing.json", "--out", "d"]) == 3
    with pytest.raises(SystemExit) as e:
        cli.main(w + ["synth", "--out", "d"])
    assert e.value.code == 3
    assert "config error" in capsys.readouterr().err


def test_cli_missing_data_is_config_error(tmp_path):
    write_json(tmp_path / "run.json", TINY_RUN)
    assert cli.main(["--workspace", str(tmp_path), "init", "--data", "nowhere", "--run", "run.json"]) == 3


def test_cli_divergence_exit_code(tiny_data, tmp_path, monkeypatch, capsys):
    write_json(tmp_path / "run.json", TINY_RUN)

    def diverge(*a, **k):
        raise DivergenceError("optimization diverged")
    monkeypatch.setattr(cli, "optimize", diverge)
    code = cli.main(["--workspace", str(tmp_path), "optimize", "--data", str(tiny_data), "--run", "run.json"])
    assert code == 2
    err = capsys.readouterr().err
    assert "diverged" in err and "last checkpoint" in err


def test_cli_entry_point_process(tmp_path):
    write_json(tmp_path / "scene.json", {"n_frames": 0})
    p = subprocess.run([sys.executable, "-m", "garmentrec.pipeline.cli", "--workspace", str(tmp_path),
                        "synth", "--config", "scene.json", "--out", "d"], capture_output=True, text=True)
    assert p.returncode == 3 and "config error" in p.stderr
