from .camera import BehindCameraError, Camera, project, project_unchecked, projection_jacobian, unproject
from .distance import chamfer_distance, chamfer_with_grad
from .grid import OutOfDomainError, SdfGrid, load_grid, save_grid, trilinear_sample
from .images import ScalarImage
from .isosurface import marching_cubes, sdf_from_mesh, unsigned_distance, winding_number
from .mesh import TriMesh, close_mesh, find_boundary_loops, load_obj, save_obj
from .curves import PolyCurve2, PolyCurve3, CURVE_NAMES

__all__ = [
    "BehindCameraError", "Camera", "project", "project_unchecked", "projection_jacobian",
    "unproject", "chamfer_distance", "chamfer_with_grad", "OutOfDomainError", "SdfGrid",
    "load_grid", "save_grid", "trilinear_sample", "ScalarImage", "marching_cubes",
    "sdf_from_mesh", "unsigned_distance", "winding_number", "TriMesh", "close_mesh",
    "find_boundary_loops", "load_obj", "save_obj", "PolyCurve2", "PolyCurve3", "CURVE_NAMES",
]
