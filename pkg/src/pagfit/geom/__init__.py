"""Geometric primitives: point clouds, rigid poses, rotations, cameras,
meshes, and signed distance grids."""

from .camera import CameraIntrinsics, project_points, unproject_pixels
from .mesh import (
    TriangleMesh,
    box_mesh,
    cylinder_mesh,
    icosphere_mesh,
    load_mesh,
    load_obj,
    load_ply_cloud,
    load_ply_mesh,
    save_obj,
    save_ply_cloud,
    save_ply_mesh,
)
from .pointcloud import (
    PointCloud,
    RigidPose,
    apply_pose,
    chamfer_distance,
    min_pair_distance,
    nearest_distances,
)
from .pose import PoseTrajectory
from .rotation import (
    axis_angle_to_matrix,
    geodesic_distance,
    random_rotation,
    rotation_from_6d,
    rotation_to_6d,
    slerp,
    slerp_midpoint,
    so3_exp,
    so3_log,
)
from .sdf import SdfGrid, build_sdf, load_sdf, query_sdf, save_sdf

__all__ = [
    "CameraIntrinsics",
    "PointCloud",
    "PoseTrajectory",
    "RigidPose",
    "SdfGrid",
    "TriangleMesh",
    "apply_pose",
    "axis_angle_to_matrix",
    "box_mesh",
    "build_sdf",
    "chamfer_distance",
    "cylinder_mesh",
    "geodesic_distance",
    "icosphere_mesh",
    "load_mesh",
    "load_obj",
    "load_ply_cloud",
    "load_ply_mesh",
    "load_sdf",
    "min_pair_distance",
    "nearest_distances",
    "project_points",
    "random_rotation",
    "rotation_from_6d",
    "rotation_to_6d",
    "save_obj",
    "save_ply_cloud",
    "save_ply_mesh",
    "save_sdf",
    "slerp",
    "slerp_midpoint",
    "so3_exp",
    "so3_log",
    "unproject_pixels",
    "query_sdf",
]
