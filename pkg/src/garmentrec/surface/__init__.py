"""Implicit-surface optimization: consistency losses, Eikonal term, mask-guided mesh updates."""
from .losses import (build_curve_surface, ccons_loss, curve_surface_samples, eikonal_loss,
                     eikonal_samples, extract_canonical_mesh, mcons_loss, mean_abs_loss)
from .mask_update import mask_sdf, mask_update_mesh, silhouette_iou
from .step import (StepResult, SurfaceLossWeights, SurfaceObjective, SurfaceParams, descend,
                   surface_step)

__all__ = ["build_curve_surface", "ccons_loss", "curve_surface_samples", "eikonal_loss",
           "eikonal_samples", "extract_canonical_mesh", "mcons_loss", "mean_abs_loss", "mask_sdf",
           "mask_update_mesh", "silhouette_iou", "StepResult", "SurfaceLossWeights",
           "SurfaceObjective", "SurfaceParams", "descend", "surface_step"]
