"""Command-line interface: synth, init, optimize, extract, eval."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from ..geometry.mesh import save_obj
from ..optim import DivergenceError
from .config import RunConfig
from .dataset import load_dataset, load_gt, load_mesh_sequence, save_scene
from .report import write_report_artifacts
from .run import Reconstruction, evaluate, initialize_run, load_checkpoint, optimize, restore_field
from .scene import ConfigError, SceneConfig, synth_scene

log = logging.getLogger("garmentrec")

EXIT_OK, EXIT_DIVERGED, EXIT_CONFIG = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _read_json(path: Path, what: str) -> dict:
    try:
        d = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read {what}: {e}") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{what} must be a JSON object")
    return d


def _record_time(path: Path, key: str, seconds: float) -> None:
    """Wall-clock lives in its own file so reports and checkpoints stay byte-reproducible."""
    t = json.loads(path.read_text()) if path.exists() else {}
    t[key] = round(seconds, 3)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(t, indent=1, sort_keys=True))


def _ckpt_dir(ws: Path, cfg: RunConfig, override: str | None) -> Path:
    return ws / (override if override is not None else cfg.checkpoint_dir)


def cmd_synth(args, ws: Path) -> int:
    cfg = SceneConfig.from_dict(_read_json(ws / args.config, "scene config"))
    out = save_scene(synth_scene(cfg), ws / args.out)
    log.info("wrote %d frames to %s", cfg.n_frames, out)
    return EXIT_OK


def cmd_init(args, ws: Path) -> int:
    cfg = RunConfig.from_dict(_read_json(ws / args.run, "run config"))
    ckpt = _ckpt_dir(ws, cfg, args.checkpoint)
    initialize_run(load_dataset(ws / args.data), cfg, ckpt)
    log.info("initialized checkpoint %s", ckpt)
    return EXIT_OK


def cmd_optimize(args, ws: Path) -> int:
    cfg = RunConfig.from_dict(_read_json(ws / args.run, "run config"))
    ckpt = _ckpt_dir(ws, cfg, args.checkpoint)
    data = load_dataset(ws / args.data)
    if args.resume and (ckpt / "manifest.json").exists():
        state, _ = load_checkpoint(ckpt)
        rec = Reconstruction(data, cfg)
        restore_field(rec, state)
        log.info("resuming %s at epoch %d", ckpt, state.epoch)
    else:
        rec, state = initialize_run(data, cfg, ckpt)
    try:
        optimize(rec, state, ckpt, until=args.until)
    except DivergenceError as e:
        print(f"{e}; last checkpoint: {ckpt}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_extract(args, ws: Path) -> int:
    ckpt = ws / args.checkpoint
    state, man = load_checkpoint(ckpt)
    cfg = RunConfig.from_dict(man["config"])
    rec = Reconstruction(load_dataset(man["data"]), cfg)
    restore_field(rec, state)
    mesh, seq = rec.register(state)
    out = ws / args.out
    save_obj(mesh, out / "canonical.obj")
    for t, m in enumerate(seq):
        save_obj(m, out / f"frame_{t:04d}.obj")
    state.curves.save(out / "curves.json")
    (out / "traces.json").write_text(json.dumps(state.traces, sort_keys=True))
    (out / "run.json").write_text(json.dumps(cfg.to_dict(), indent=1))
    log.info("wrote registered mesh and %d frames to %s", len(seq), out)
    return EXIT_OK


def cmd_eval(args, ws: Path) -> int:
    pred = ws / args.pred
    if args.run is not None:
        cfg = RunConfig.from_dict(_read_json(ws / args.run, "run config"))
    elif (pred / "run.json").exists():
        cfg = RunConfig.from_dict(_read_json(pred / "run.json", "run config"))
    else:
        cfg = RunConfig()
    gt_canon, gt_seq, _ = load_gt(ws / args.gt)
    canon, seq = load_mesh_sequence(pred)
    if canon is None:
        raise FileNotFoundError(f"no canonical.obj in {pred}")
    traces = json.loads((pred / "traces.json").read_text()) if (pred / "traces.json").exists() else {}
    report = evaluate(canon, seq, gt_canon, gt_seq, cfg, traces)
    write_report_artifacts(report, ws / args.report)
    print(f"CD {report.cd:.4f} cm  CCV {report.ccv:.4f} cm")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="garmentrec", description=__doc__)
    p.add_argument("--workspace", default=".", help="root that all other paths are relative to")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("synth", help="generate a synthetic observation set")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_synth)
    s = sub.add_parser("init", help="rigid curve fit and template SDF; writes the first checkpoint")
    s.add_argument("--data", required=True)
    s.add_argument("--run", required=True)
    s.add_argument("--checkpoint", help="overrides checkpoint_dir of the run config")
    s.set_defaults(fn=cmd_init)
    s = sub.add_parser("optimize", help="run co-evolution epochs, checkpointing each one")
    s.add_argument("--data", required=True)
    s.add_argument("--run", required=True)
    s.add_argument("--checkpoint", help="overrides checkpoint_dir of the run config")
    s.add_argument("--resume", action="store_true", help="continue from an existing checkpoint")
    s.add_argument("--until", type=int, help="stop after this epoch")
    s.set_defaults(fn=cmd_optimize)
    s = sub.add_parser("extract", help="register the template and write per-frame meshes")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_extract)
    s = sub.add_parser("eval", help="CD and CCV against ground truth")
    s.add_argument("--gt", required=True)
    s.add_argument("--pred", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--run", help="run config for sampling settings")
    s.set_defaults(fn=cmd_eval)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    ws = Path(args.workspace)
    t0 = time.perf_counter()
    try:
        code = args.fn(args, ws)
    except (ConfigError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as e:
        print(str(e), file=sys.stderr)
        return EXIT_DIVERGED
    if code == EXIT_OK:
        _record_time(ws / "timing.json", args.command, time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
