"""Feature-curve parameterization, rigid initialization and curve losses."""
from .losses import (NoVisiblePointsError, ProjectionTerm, anap_loss, projection_loss, slope_loss,
                     total_curve_loss)
from .rigid import CurveTarget, RigidCurveTransform, fit_rigid_init, reprojection_error
from .state import (ETA_FLOOR, SURFACE_TYPES, CurveDeformState, CurveLossWeights, CurveSet,
                    default_surfaces, deform_curve, init_curve_state, plane_normal)

__all__ = ["NoVisiblePointsError", "ProjectionTerm", "anap_loss", "projection_loss", "slope_loss",
           "total_curve_loss", "CurveTarget", "RigidCurveTransform", "fit_rigid_init",
           "reprojection_error", "ETA_FLOOR", "SURFACE_TYPES", "CurveDeformState", "CurveLossWeights",
           "CurveSet", "default_surfaces", "deform_curve", "init_curve_state", "plane_normal"]
