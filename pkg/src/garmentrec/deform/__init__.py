from .field import DeformField, phi_warp
from .lattice import LatticeDeform, arap_penalty, lattice_warp
from .skeleton import (Joint, Pose, Skeleton, SkinnedBody, axis_angle_quat, lbs_warp,
                       load_poses, quat_to_matrix, rigid, save_poses, skinning_transforms)
from .smoothing import smooth_poses
from .weights import WeightGrid, build_weight_grid

__all__ = [
    "DeformField", "phi_warp", "LatticeDeform", "arap_penalty", "lattice_warp", "Joint", "Pose",
    "Skeleton", "SkinnedBody", "axis_angle_quat", "lbs_warp", "load_poses", "quat_to_matrix",
    "rigid", "save_poses", "skinning_transforms", "smooth_poses", "WeightGrid",
    "build_weight_grid",
]
