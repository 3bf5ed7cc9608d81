"""Camera models, rigid poses, bounding primitives, and georegistration."""

from .camera import CameraIntrinsics, pixel_grid, pixel_rays, project_point, project_points
from .ground import estimate_ground_heights
from .mercator import EARTH_RADIUS_M, GeoCoordinate, geo_to_local, local_to_geo
from .pose import Pose, read_pose_file, write_pose_file
from .primitives import (
    CUBOID,
    ELLIPSOID,
    GROUND_POLYGON,
    BoundingPrimitive,
    point_in_primitive,
    points_in_polygon,
    points_in_primitive,
    ray_intersects_primitive,
    rays_intersect_primitive,
)

__all__ = [
    "CameraIntrinsics",
    "Pose",
    "GeoCoordinate",
    "BoundingPrimitive",
    "CUBOID",
    "ELLIPSOID",
    "GROUND_POLYGON",
    "EARTH_RADIUS_M",
    "estimate_ground_heights",
    "geo_to_local",
    "local_to_geo",
    "pixel_grid",
    "pixel_rays",
    "point_in_primitive",
    "points_in_polygon",
    "points_in_primitive",
    "project_point",
    "project_points",
    "ray_intersects_primitive",
    "rays_intersect_primitive",
    "read_pose_file",
    "write_pose_file",
]
