"""Run configuration for the curve/surface co-evolution."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from ..visibility import MODES
from .scene import ConfigError


@dataclass
class RunConfig:
    # loss weights
    lam_proj: float = 1.0
    lam_slop: float = 0.01
    lam_anap: float = 0.1
    lam_mcons: float = 1.0
    lam_ccons: float = 0.5
    lam_eik: float = 0.1
    lam_arap: float = 0.01
    # step sizes
    curve_lr: float = 0.002  # Adam step on eta / lam, scene units
    lattice_lr: float = 1e-4  # Adam step on lattice offsets, scene units
    surface_step: float = 0.25  # max SDF node change per step, in grid spacings
    # schedule
    epochs: int = 20
    k_curve: int = 20
    k_surface: int = 50
    period: int = 2
    visibility_period: int = 1
    mask_batch: int = 8
    mask_alpha: float = 0.8
    mask_iters: int = 5
    mask_max_move: float = 2.0  # per mask-update iteration, in grid spacings
    # resolution
    grid_dims: int = 64
    weight_dims: int = 64
    lattice_dims: int = 8
    n_a: int = 1024
    n_eik: int = 4096
    # initialization / extraction
    rigid_iters: int = 150
    rigid_frames: int = 1
    register_iters: int = 20
    visibility_mode: str = "surface_aware"
    depth_bias: float = 2.0  # in SDF grid spacings
    pose_smoothing: float = 0.0  # damped Jacobi weight applied once to the input poses; 0 keeps them
    # evaluation
    cd_samples: int = 100_000
    cd_frame_stride: int = 6
    seed: int = 0
    checkpoint_dir: str = "ckpt"

    def __post_init__(self):
        weights = [self.lam_proj, self.lam_slop, self.lam_anap, self.lam_mcons, self.lam_ccons,
                   self.lam_eik, self.lam_arap]
        if any(not (w >= 0) for w in weights):
            raise ConfigError("loss weights must be non-negative")
        steps = [self.curve_lr, self.lattice_lr, self.surface_step, self.mask_alpha, self.mask_max_move]
        if any(not (v >= 0) for v in steps):
            raise ConfigError("step sizes must be non-negative")
        counts = [self.k_curve, self.k_surface, self.mask_iters, self.rigid_iters, self.register_iters]
        if self.epochs < 0 or any(c < 0 for c in counts):
            raise ConfigError("counts must be non-negative")
        if self.period < 1 or self.visibility_period < 1 or self.mask_batch < 1 or self.rigid_frames < 1:
            raise ConfigError("periods and batch sizes must be positive")
        if self.grid_dims < 8 or self.weight_dims < 8 or self.lattice_dims < 2:
            raise ConfigError("grid resolutions too small")
        if self.n_a < 100:
            raise ConfigError("n_a must be >= 100")
        if not 0 <= self.pose_smoothing <= 1:
            raise ConfigError("pose_smoothing must lie in [0, 1]")
        if self.visibility_mode not in MODES:
            raise ConfigError(f"unknown visibility mode {self.visibility_mode!r}")
        if self.cd_samples < 1 or self.cd_frame_stride < 1:
            raise ConfigError("invalid evaluation settings")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read run config: {e}") from None
        if not isinstance(d, dict):
            raise ConfigError("run config must be a JSON object")
        return cls.from_dict(d)
