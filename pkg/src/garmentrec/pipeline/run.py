"""Progressive curve/surface co-evolution driver with resumable checkpoints."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..curves import (CurveLossWeights, CurveSet, CurveTarget, ProjectionTerm, RigidCurveTransform,
                      default_surfaces, deform_curve, fit_rigid_init, init_curve_state, total_curve_loss)
from ..deform import DeformField, LatticeDeform, arap_penalty, build_weight_grid, smooth_poses
from ..geometry.curves import PolyCurve3
from ..geometry.grid import SdfGrid, load_grid, save_grid
from ..geometry.mesh import TriMesh
from ..optim import Adam, DivergenceError
from ..registration import boundary_handles, init_sdf_from_template, laplacian_handle_deform, register_template
from ..surface import (SurfaceLossWeights, SurfaceParams, curve_surface_samples, extract_canonical_mesh,
                       mask_update_mesh, surface_step)
from ..visibility import BodyCorrespondence, rasterize_depth, surface_aware_visibility
from .config import RunConfig
from .dataset import Dataset
from .metrics import MetricsReport, metric_ccv, metric_cd

log = logging.getLogger(__name__)

SURFACE_OF_GARMENT = {"skirt": "bottom_clothing", "pants": "bottom_clothing", "upper": "upper_clothing",
                      "coat": "upper_clothing", "dress": "upper_bottom"}


@dataclass
class PipelineState:
    epoch: int
    curves: CurveSet
    rigid: dict[str, RigidCurveTransform]
    grids: dict[str, SdfGrid]
    lattice: LatticeDeform
    corr: dict[str, np.ndarray]
    ts: TriMesh
    ts_hat: TriMesh
    ts_epoch: int
    visibility: dict[tuple[int, str], np.ndarray]
    curve_opt: dict[str, Adam]
    lattice_opt: Adam
    rng: np.random.Generator
    traces: dict[str, list[float]] = field(default_factory=dict)

    def trace(self, key: str, value: float) -> None:
        self.traces.setdefault(key, []).append(float(value))


def _weight_bounds(body) -> tuple[np.ndarray, np.ndarray]:
    """Body box made square in the horizontal plane, padded by 10% of its diagonal."""
    lo, hi = body.mesh.bounds()
    c = (lo + hi) / 2
    half = (hi - lo) / 2
    half[[0, 2]] = half[[0, 2]].max()
    pad = 0.1 * float(np.linalg.norm(2 * half))
    return c - half - pad, c + half + pad


def _cube_bounds(points: np.ndarray, margin_frac: float = 0.1):
    lo, hi = points.min(axis=0), points.max(axis=0)
    c = (lo + hi) / 2
    half = (hi - lo).max() / 2
    pad = margin_frac * float(np.linalg.norm(hi - lo))
    return c - half - pad, c + half + pad


class Reconstruction:
    """Holds everything derived deterministically from the dataset and config."""

    def __init__(self, data: Dataset, cfg: RunConfig):
        self.data = data
        self.cfg = cfg
        self.obs = data.observations
        self.surface_name = SURFACE_OF_GARMENT[data.garment_type]
        self.curve_surfaces = {k: v for k, v in default_surfaces(data.garment_type).items()
                               if k in data.template.labels}
        self.curve_names = [k for k in data.template.labels]
        self.weights = build_weight_grid(data.body, dims=cfg.weight_dims, bounds=_weight_bounds(data.body))
        self.skeleton = data.body.skeleton
        self.poses = smooth_poses(data.poses, cfg.pose_smoothing) if cfg.pose_smoothing > 0 else data.poses
        self.curve_w = CurveLossWeights(cfg.lam_proj, cfg.lam_slop, cfg.lam_anap)
        self.surface_w = SurfaceLossWeights(cfg.lam_mcons, cfg.lam_ccons, cfg.lam_eik, cfg.lam_arap)
        self._posed_body: dict[int, TriMesh] = {}
        self._body_buf: dict[int, object] = {}
        self._mask_sdf: dict[int, np.ndarray] = {}
        self.field: DeformField | None = None

    # -- helpers ---------------------------------------------------------------
    def make_field(self, lattice: LatticeDeform) -> DeformField:
        self.field = DeformField(self.weights, self.skeleton, self.poses, lattice)
        return self.field

    def posed_body(self, t: int) -> TriMesh:
        if t not in self._posed_body:
            self._posed_body[t] = self.data.body.posed(self.poses[t])
        return self._posed_body[t]

    def body_buffer(self, t: int):
        if t not in self._body_buf:
            self._body_buf[t] = rasterize_depth(self.posed_body(t), self.obs[t].camera)
        return self._body_buf[t]

    def bias(self, state: PipelineState) -> float:
        return self.cfg.depth_bias * state.grids[self.surface_name].min_spacing

    def template_curve(self, name: str) -> PolyCurve3:
        return PolyCurve3(self.data.template.mesh.vertices[self.data.template.labels[name]])

    # -- initialization ----------------------------------------------------------
    def initialize(self) -> PipelineState:
        cfg = self.cfg
        rng = np.random.default_rng(cfg.seed)
        n_frames = len(self.obs)
        lattice = LatticeDeform.zeros(np.zeros(3), np.ones(3), n_frames, (cfg.lattice_dims,) * 3)
        fld = self.make_field(lattice)
        curves, rigid = {}, {}
        for name in self.curve_names:
            with_curve = [o for o in self.obs if name in o.curves]
            if not with_curve:
                raise ValueError(f"curve {name!r} is never observed")
            stride = max(1, len(with_curve) // cfg.rigid_frames)
            chosen = with_curve[::stride][:cfg.rigid_frames]
            targets = [CurveTarget(o.frame, o.camera, o.curves[name].points) for o in chosen]
            tf = fit_rigid_init(self.template_curve(name), targets, fld, iters=cfg.rigid_iters,
                                visibility="normal", frames=None)
            rigid[name] = tf
            curves[name] = init_curve_state(PolyCurve3(tf.apply(self.template_curve(name).points)))
        cset = CurveSet(curves, dict(self.curve_surfaces))
        init_curves = cset.polycurves()
        deformed = laplacian_handle_deform(self.data.template.mesh,
                                           boundary_handles(self.data.template, init_curves))
        lo, hi = _cube_bounds(deformed.vertices)
        grid = init_sdf_from_template(self.data.template, init_curves, dims=cfg.grid_dims, bounds=(lo, hi))
        lattice.lo, lattice.hi = lo, hi
        corr = {k: BodyCorrespondence.nearest(v.points(), self.data.body.mesh).vertex
                for k, v in cset.curves.items()}
        state = PipelineState(
            epoch=0, curves=cset, rigid=rigid, grids={self.surface_name: grid}, lattice=lattice,
            corr=corr, ts=TriMesh.empty(), ts_hat=TriMesh.empty(), ts_epoch=0, visibility={},
            curve_opt={k: Adam(2 * len(v), cfg.curve_lr) for k, v in cset.curves.items()},
            lattice_opt=Adam(lattice.offsets.size, cfg.lattice_lr), rng=rng)
        self.refresh_meshes(state)
        self.refresh_visibility(state)
        return state

    # -- schedule pieces -------------------------------------------------------------
    def refresh_meshes(self, state: PipelineState) -> None:
        cfg = self.cfg
        grid = state.grids[self.surface_name]
        state.ts = extract_canonical_mesh(grid)
        batch = np.sort(state.rng.choice(len(self.obs), size=min(cfg.mask_batch, len(self.obs)),
                                         replace=False))
        state.ts_hat = mask_update_mesh(state.ts, [self.obs[int(b)] for b in batch], self.field,
                                        cfg.mask_alpha, cfg.mask_iters, sdf2d=self._mask_sdf,
                                        body=self.data.body, bias=self.bias(state),
                                        max_move=cfg.mask_max_move * grid.min_spacing)
        state.ts_epoch = state.epoch

    def refresh_visibility(self, state: PipelineState) -> None:
        fld = self.field
        bias = self.bias(state)
        vis = {}
        for o in self.obs:
            names = [n for n in self.curve_names if n in o.curves]
            if not names:
                continue
            gbuf = None
            if self.cfg.visibility_mode in ("surface_only", "surface_aware"):
                gbuf = rasterize_depth(state.ts.with_vertices(fld.warp(state.ts.vertices, o.frame)),
                                       o.camera, bias)
            for name in names:
                st = state.curves[name]
                m = surface_aware_visibility(
                    st.points(), st.center, None, self.data.body, BodyCorrespondence(state.corr[name]),
                    fld, o.frame, o.camera, self.cfg.visibility_mode, bias, garment_buffer=gbuf,
                    body_buffer=self.body_buffer(o.frame), posed_body=self.posed_body(o.frame))
                vis[(o.frame, name)] = m.visible
        state.visibility = vis

    def curve_steps(self, state: PipelineState) -> None:
        cfg = self.cfg
        fld = self.field
        use_lattice = cfg.lattice_lr > 0
        for _ in range(cfg.k_curve):
            lat_grads: dict[int, np.ndarray] | None = {} if use_lattice else None
            total = 0.0
            updates = {}
            for name in self.curve_names:
                st = state.curves[name]
                terms = [ProjectionTerm(o.frame, o.camera, state.visibility[(o.frame, name)],
                                        o.curves[name].points)
                         for o in self.obs if (o.frame, name) in state.visibility]
                sdf = state.grids[self.curve_surfaces.get(name, (self.surface_name,))[0]]
                val, g = total_curve_loss(st, self.curve_w, terms, fld, sdf, lat_grads)
                if not np.isfinite(val):
                    raise DivergenceError("optimization diverged")
                total += val
                updates[name] = state.curve_opt[name].step(st.params(), g)
            if use_lattice:
                grad = np.zeros_like(state.lattice.offsets)
                for t in range(state.lattice.n_frames):
                    a, ga = arap_penalty(state.lattice, t, with_grad=True)
                    total += cfg.lam_arap * a
                    grad[t] = cfg.lam_arap * ga
                for t, g in lat_grads.items():
                    grad[t] += g
                flat = state.lattice_opt.step(state.lattice.offsets.reshape(-1), grad.reshape(-1))
                state.lattice.offsets[...] = flat.reshape(state.lattice.offsets.shape)
            for name, x in updates.items():
                state.curves[name].set_params(x)
            state.trace("curve_objective", total)

    def surface_steps(self, state: PipelineState) -> None:
        cfg = self.cfg
        params = SurfaceParams(state.grids, cfg.period, cfg.n_a)
        caps: dict[str, list[np.ndarray]] = {}
        for i, name in enumerate(self.curve_names):
            pts = curve_surface_samples(deform_curve(state.curves[name]), cfg.n_a,
                                        seed=cfg.seed + 1000 * state.epoch + i)
            for s in self.curve_surfaces.get(name, ()):
                caps.setdefault(s, []).append(pts)
        targets = {self.surface_name: state.ts_hat}
        step = cfg.surface_step * state.grids[self.surface_name].min_spacing
        for _ in range(cfg.k_surface):
            res = surface_step(params, self.surface_w, caps, targets, state.rng, step, cfg.n_eik)
            r = res[self.surface_name]
            state.trace("surface_objective", r.after)
            state.trace("surface_decreased", float(r.decreased))

    def run_epoch(self, state: PipelineState) -> None:
        cfg = self.cfg
        if state.epoch % cfg.visibility_period == 0:
            self.refresh_visibility(state)
        self.curve_steps(state)
        self.surface_steps(state)
        state.epoch += 1
        if state.epoch % cfg.period == 0:
            self.refresh_meshes(state)

    # -- outputs -------------------------------------------------------------------
    def register(self, state: PipelineState) -> tuple[TriMesh, list[TriMesh]]:
        grid = state.grids[self.surface_name]
        mesh = register_template(self.data.template, state.curves, grid, self.cfg.register_iters)
        seq = [mesh.with_vertices(self.field.warp(mesh.vertices, o.frame)) for o in self.obs]
        return mesh, seq


# -- checkpoints ---------------------------------------------------------------------

def save_checkpoint(state: PipelineState, ckpt: str | Path, data_root: str | Path, cfg: RunConfig) -> Path:
    ckpt = Path(ckpt)
    ckpt.mkdir(parents=True, exist_ok=True)
    for name, g in state.grids.items():
        save_grid(g, ckpt / f"sdf_{name}.raw")
    state.curves.save(ckpt / "curves.json")
    arrays = {
        "lattice_offsets": state.lattice.offsets, "lattice_lo": state.lattice.lo,
        "lattice_hi": state.lattice.hi,
        "ts_vertices": state.ts.vertices, "ts_faces": state.ts.faces,
        "ts_hat_vertices": state.ts_hat.vertices, "ts_hat_faces": state.ts_hat.faces,
    }
    for name, g in state.grids.items():
        arrays[f"grid_{name}"] = g.values
        arrays[f"grid_{name}_origin"] = g.origin
        arrays[f"grid_{name}_spacing"] = g.spacing
    for name, st in state.curves.curves.items():
        arrays[f"curve_{name}_eta"] = st.eta
        arrays[f"curve_{name}_lam"] = st.lam
        for k, v in state.curve_opt[name].state_dict().items():
            arrays[f"adam_{name}_{k}"] = v
        arrays[f"corr_{name}"] = state.corr[name]
    for k, v in state.lattice_opt.state_dict().items():
        arrays[f"adam_lattice_{k}"] = v
    for (frame, name), v in state.visibility.items():
        arrays[f"vis_{frame}_{name}"] = v
    tmp = ckpt / "state.tmp.npz"
    np.savez(tmp, **arrays)
    tmp.replace(ckpt / "state.npz")
    manifest = {
        "epoch": state.epoch, "ts_epoch": state.ts_epoch, "data": str(Path(data_root).resolve()),
        "config": cfg.to_dict(), "grids": sorted(state.grids), "curves": list(state.curves.curves),
        "surfaces": {k: list(v) for k, v in state.curves.surfaces.items()},
        "rigid": {k: v.to_dict() for k, v in state.rigid.items()},
        "rng": state.rng.bit_generator.state, "traces": state.traces,
        "visibility_keys": [[f, n] for f, n in state.visibility],
    }
    (ckpt / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return ckpt


def load_checkpoint(ckpt: str | Path) -> tuple[PipelineState, dict]:
    from ..curves import CurveDeformState

    ckpt = Path(ckpt)
    if not (ckpt / "manifest.json").exists():
        raise FileNotFoundError(f"no checkpoint in {ckpt}")
    man = json.loads((ckpt / "manifest.json").read_text())
    z = np.load(ckpt / "state.npz")
    grids = {}
    for name in man["grids"]:
        v = z[f"grid_{name}"]
        grids[name] = SdfGrid(z[f"grid_{name}_origin"], z[f"grid_{name}_spacing"], v.shape, v)
    cs = CurveSet.load(ckpt / "curves.json")
    curves = {}
    opts = {}
    for name in man["curves"]:
        st = cs[name]
        curves[name] = CurveDeformState(st.center, st.dirs, st.normal, z[f"curve_{name}_eta"],
                                        z[f"curve_{name}_lam"])
        opt = Adam(2 * len(st), 0.0)
        opt.load_state_dict({k: z[f"adam_{name}_{k}"] for k in ("m", "v", "t", "lr")})
        opts[name] = opt
    lattice = LatticeDeform(z["lattice_lo"], z["lattice_hi"], z["lattice_offsets"])
    lopt = Adam(lattice.offsets.size, 0.0)
    lopt.load_state_dict({k: z[f"adam_lattice_{k}"] for k in ("m", "v", "t", "lr")})
    rng = np.random.default_rng()
    rng.bit_generator.state = man["rng"]
    vis = {(int(f), n): z[f"vis_{f}_{n}"].astype(bool) for f, n in man["visibility_keys"]}
    state = PipelineState(
        epoch=int(man["epoch"]),
        curves=CurveSet(curves, {k: tuple(v) for k, v in man["surfaces"].items()}),
        rigid={k: RigidCurveTransform.from_dict(v) for k, v in man["rigid"].items()},
        grids=grids, lattice=lattice,
        corr={name: z[f"corr_{name}"] for name in man["curves"]},
        ts=TriMesh(z["ts_vertices"], z["ts_faces"]), ts_hat=TriMesh(z["ts_hat_vertices"], z["ts_hat_faces"]),
        ts_epoch=int(man["ts_epoch"]), visibility=vis, curve_opt=opts, lattice_opt=lopt, rng=rng,
        traces={k: list(v) for k, v in man["traces"].items()})
    return state, man


def restore_field(rec: Reconstruction, state: PipelineState) -> None:
    rec.make_field(state.lattice)


# -- driver ------------------------------------------------------------------------------

@dataclass
class PipelineResult:
    curves: CurveSet
    grids: dict[str, SdfGrid]
    registered: TriMesh
    sequence: list[TriMesh]
    report: MetricsReport | None
    state: PipelineState


def initialize_run(data: Dataset, cfg: RunConfig, ckpt: str | Path | None = None):
    rec = Reconstruction(data, cfg)
    state = rec.initialize()
    if ckpt is not None:
        save_checkpoint(state, ckpt, data.root, cfg)
    return rec, state


def optimize(rec: Reconstruction, state: PipelineState, ckpt: str | Path | None = None,
             until: int | None = None) -> PipelineState:
    """Run epochs until ``until`` (default: the configured count), checkpointing after each."""
    end = rec.cfg.epochs if until is None else min(until, rec.cfg.epochs)
    while state.epoch < end:
        rec.run_epoch(state)
        log.info("epoch %d surface objective %.6g", state.epoch,
                 state.traces.get("surface_objective", [float("nan")])[-1])
        if ckpt is not None:
            save_checkpoint(state, ckpt, rec.data.root, rec.cfg)
    return state


def resume(data: Dataset, cfg: RunConfig, ckpt: str | Path):
    state, _ = load_checkpoint(ckpt)
    rec = Reconstruction(data, cfg)
    restore_field(rec, state)
    return rec, state


def evaluate(registered: TriMesh, sequence: list[TriMesh], gt_canonical: TriMesh, gt_sequence: list[TriMesh],
             cfg: RunConfig, traces: dict | None = None, extra: dict | None = None) -> MetricsReport:
    frames = list(range(0, min(len(sequence), len(gt_sequence)), cfg.cd_frame_stride))
    cd_frames = [metric_cd(gt_sequence[t], sequence[t], cfg.cd_samples, seed=cfg.seed + t) for t in frames]
    return MetricsReport(
        cd=metric_cd(gt_canonical, registered, cfg.cd_samples, seed=cfg.seed),
        ccv=metric_ccv(sequence), cd_frames=cd_frames,
        gt_ccv=metric_ccv(gt_sequence) if len(gt_sequence) > 1 else None,
        frames=frames, traces=traces or {}, extra=extra or {})


def run_pipeline(data: Dataset, cfg: RunConfig, ckpt: str | Path | None = None, gt=None) -> PipelineResult:
    """Initialize, optimize, register and (with ``gt`` = (canonical, sequence)) evaluate."""
    rec, state = initialize_run(data, cfg, ckpt)
    optimize(rec, state, ckpt)
    registered, seq = rec.register(state)
    report = None
    if gt is not None:
        report = evaluate(registered, seq, gt[0], gt[1], cfg, state.traces,
                          {"grid_spacing": state.grids[rec.surface_name].min_spacing})
    return PipelineResult(state.curves, state.grids, registered, seq, report, state)
