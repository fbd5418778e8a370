"""Synthetic scenes, the co-evolution driver, metrics and the command line."""
from .config import RunConfig
from .dataset import Dataset, load_dataset, load_gt, save_scene
from .metrics import MetricsReport, metric_ccv, metric_cd
from .run import PipelineResult, run_pipeline
from .scene import ConfigError, SceneConfig, synth_scene

__all__ = ["RunConfig", "Dataset", "load_dataset", "load_gt", "save_scene", "MetricsReport", "metric_ccv",
           "metric_cd", "PipelineResult", "run_pipeline", "ConfigError", "SceneConfig", "synth_scene"]
