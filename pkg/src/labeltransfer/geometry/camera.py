"""Pinhole camera model and projection helpers.

Camera frame follows the usual computer-vision convention: x right, y down,
z forward (optical axis). Pixel coordinates are (u, v) = (column, row).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PointBehindCamera

MIN_DEPTH = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width):
            raise ValueError("cx outside [0, width)")
        if not (0 <= self.cy < self.height):
            raise ValueError("cy outside [0, height)")


def project_point(intr: CameraIntrinsics, p_cam) -> np.ndarray:
    """Project one camera-frame point to pixel coordinates (no bounds clipping)."""
    p = np.asarray(p_cam, dtype=np.float64)
    if p[2] <= MIN_DEPTH:
        raise PointBehindCamera(f"z = {p[2]:.6g}")
    return np.array([intr.fx * p[0] / p[2] + intr.cx, intr.fy * p[1] / p[2] + intr.cy])


def project_points(intr: CameraIntrinsics, p_cam):
    """Vectorized projection.

    Returns (pixels (N,2), in_front (N,)). Rows with z <= MIN_DEPTH carry NaN
    pixels instead of raising; callers filter on the mask.
    """
    p = np.asarray(p_cam, dtype=np.float64)
    in_front = p[:, 2] > MIN_DEPTH
    z = np.where(in_front, p[:, 2], 1.0)
    px = np.stack(
        [intr.fx * p[:, 0] / z + intr.cx, intr.fy * p[:, 1] / z + intr.cy], axis=1
    )
    px[~in_front] = np.nan
    return px, in_front


def pixel_grid(intr: CameraIntrinsics):
    """Pixel-center coordinates as an (H, W, 2) array of (u, v)."""
    u, v = np.meshgrid(np.arange(intr.width), np.arange(intr.height))
    return np.stack([u, v], axis=-1).astype(np.float64)


def pixel_rays(intr: CameraIntrinsics, pose):
    """World-frame unit ray directions through every pixel center.

    `pose` is camera-to-world. Returns (origin (3,), dirs (H, W, 3)).
    """
    uv = pixel_grid(intr)
    d_cam = np.dstack(
        [
            (uv[..., 0] - intr.cx) / intr.fx,
            (uv[..., 1] - intr.cy) / intr.fy,
            np.ones((intr.height, intr.width)),
        ]
    )
    d_cam /= np.linalg.norm(d_cam, axis=-1, keepdims=True)
    d_world = d_cam @ pose.rotation.T
    return pose.translation.copy(), d_world
