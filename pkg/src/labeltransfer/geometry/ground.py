"""Ground-polygon vertex height estimation from the accumulated point cloud."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..errors import EmptyNeighborhood

DEFAULT_SEARCH_RADIUS = 5.0


def estimate_ground_heights(polygon_xy, cameras, cloud, k=8, search_radius=DEFAULT_SEARCH_RADIUS):
    """Per-vertex ground heights.

    Each vertex starts at the height of the nearest camera (by x-y distance)
    and is then replaced by the median z of the k nearest cloud points around
    (x, y, initial z). Raises EmptyNeighborhood if a vertex has no cloud point
    within `search_radius`.
    """
    poly = np.atleast_2d(np.asarray(polygon_xy, dtype=np.float64))
    if len(cloud) == 0:
        raise EmptyNeighborhood("empty point cloud")
    if not cameras:
        raise ValueError("at least one camera pose required")
    if k < 1:
        raise ValueError("k must be >= 1")
    cam_xy = np.array([p.translation[:2] for p in cameras])
    cam_z = np.array([p.translation[2] for p in cameras])
    d2 = ((poly[:, None, :] - cam_xy[None, :, :]) ** 2).sum(axis=2)
    z_init = cam_z[np.argmin(d2, axis=1)]

    tree = cKDTree(cloud.positions)
    heights = np.empty(len(poly))
    query = np.column_stack([poly, z_init])
    dists, idx = tree.query(query, k=k, distance_upper_bound=search_radius)
    dists = np.atleast_2d(dists)
    idx = np.atleast_2d(idx)
    for v in range(len(poly)):
        valid = np.isfinite(dists[v])
        if not valid.any():
            raise EmptyNeighborhood(
                f"vertex {v} has no cloud point within {search_radius} m"
            )
        heights[v] = np.median(cloud.positions[idx[v, valid], 2])
    return heights
