"""Point clouds: accumulation, deduplication, normals, visibility.

Frame clouds are given in sensor coordinates together with a sensor-to-world
pose. Accumulation is sequential (first-seen point wins) to match the fusion
order of the capture pipeline.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import MissingPose
from .geometry.camera import CameraIntrinsics, MIN_DEPTH
from .geometry.pose import Pose
from .geometry.primitives import BoundingPrimitive, points_in_primitive

DEFAULT_DEDUP_RADIUS = 0.05
DEFAULT_SPLAT_RADIUS_PX = 2
DEFAULT_DEPTH_SLACK = 0.01


def _opt(a, n, shape_tail, dtype):
    if a is None:
        return None
    out = np.asarray(a, dtype=dtype)
    if out.shape != (n,) + shape_tail:
        raise ValueError(f"optional array has shape {out.shape}, expected {(n,) + shape_tail}")
    return out


@dataclass
class PointCloud:
    positions: np.ndarray
    colors: np.ndarray | None = None
    normals: np.ndarray | None = None
    frame_index: np.ndarray | None = None
    labels: np.ndarray | None = None
    confidences: np.ndarray | None = None
    curvatures: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=np.float64))
        if self.positions.size == 0:
            self.positions = self.positions.reshape(0, 3)
        if self.positions.shape[1] != 3:
            raise ValueError("positions must be (N, 3)")
        n = len(self.positions)
        self.colors = _opt(self.colors, n, (3,), np.float64)
        self.normals = _opt(self.normals, n, (3,), np.float64)
        self.frame_index = _opt(self.frame_index, n, (), np.int32)
        self.labels = _opt(self.labels, n, (), np.int32)
        self.confidences = _opt(self.confidences, n, (), np.float64)
        self.curvatures = _opt(self.curvatures, n, (), np.float64)
        if self.normals is not None and n:
            norms = np.linalg.norm(self.normals, axis=1)
            if np.abs(norms - 1.0).max() > 1e-6:
                raise ValueError("normals must be unit length")
        if self.confidences is not None and n:
            if self.confidences.min() < 0 or self.confidences.max() > 1:
                raise ValueError("confidences must lie in [0, 1]")

    def __len__(self):
        return len(self.positions)

    def _arrays(self):
        return {
            k: getattr(self, k)
            for k in ("colors", "normals", "frame_index", "labels", "confidences", "curvatures")
        }

    def select(self, idx) -> "PointCloud":
        kw = {k: (v[idx] if v is not None else None) for k, v in self._arrays().items()}
        return PointCloud(self.positions[idx], **kw)

    def transformed(self, pose: Pose) -> "PointCloud":
        kw = self._arrays()
        if kw["normals"] is not None:
            kw["normals"] = pose.rotate(kw["normals"])
        return PointCloud(pose.transform(self.positions), **kw)

    @staticmethod
    def concatenate(clouds) -> "PointCloud":
        clouds = [c for c in clouds if len(c)]
        if not clouds:
            return PointCloud(np.zeros((0, 3)))
        pos = np.vstack([c.positions for c in clouds])
        kw = {}
        for k in ("colors", "normals", "frame_index", "labels", "confidences", "curvatures"):
            vals = [getattr(c, k) for c in clouds]
            kw[k] = np.concatenate(vals) if all(v is not None for v in vals) else None
        return PointCloud(pos, **kw)


@dataclass
class VisibilityMask:
    visible: np.ndarray
    projections: np.ndarray


class HashGrid:
    """Uniform voxel hash supporting incremental insert + radius queries."""

    def __init__(self, cell_size: float):
        self.cell = float(cell_size)
        self._cells: dict[tuple, list] = {}
        self._points: list = []

    def _key(self, p):
        return tuple(np.floor(p / self.cell).astype(np.int64))

    def insert(self, p):
        idx = len(self._points)
        self._points.append(np.asarray(p, dtype=np.float64))
        self._cells.setdefault(self._key(p), []).append(idx)
        return idx

    def any_within(self, p, radius) -> bool:
        k = self._key(p)
        r2 = radius * radius
        reach = int(np.ceil(radius / self.cell))
        for dx in range(-reach, reach + 1):
            for dy in range(-reach, reach + 1):
                for dz in range(-reach, reach + 1):
                    for i in self._cells.get((k[0] + dx, k[1] + dy, k[2] + dz), ()):
                        d = self._points[i] - p
                        if d @ d < r2:
                            return True
        return False


def _resolve_frame(entry):
    if len(entry) == 3:
        return entry
    pose, cloud = entry
    return pose, cloud, None


def accumulate_static(per_frame_clouds, dynamic_primitives=(), dedup_radius=DEFAULT_DEDUP_RADIUS):
    """World-frame accumulation of the static scene.

    `per_frame_clouds` is a list of (pose, cloud) or (pose, cloud, timestamp).
    Points enclosed by any dynamic primitive posed at the frame's timestamp are
    dropped; remaining points are fused sequentially, discarding a point when
    an already-kept point lies closer than `dedup_radius`.
    """
    if dedup_radius <= 0:
        raise ValueError("dedup_radius must be positive")
    grid = HashGrid(dedup_radius)
    kept = []
    for entry in per_frame_clouds:
        pose, cloud, timestamp = _resolve_frame(entry)
        if len(cloud) == 0:
            continue
        world = cloud.transformed(pose)
        mask = np.ones(len(world), dtype=bool)
        for b in dynamic_primitives:
            if not b.dynamic or not b.labeled_at(timestamp):
                continue
            bpose = b.resolve_pose(timestamp)
            mask &= ~points_in_primitive(b, world.positions, bpose)
        world = world.select(mask)
        keep_idx = []
        for i in range(len(world)):
            p = world.positions[i]
            if not grid.any_within(p, dedup_radius):
                grid.insert(p)
                keep_idx.append(i)
        if keep_idx:
            kept.append(world.select(np.array(keep_idx)))
    return PointCloud.concatenate(kept) if kept else PointCloud(np.zeros((0, 3)))


def accumulate_dynamic(per_frame_clouds, primitive: BoundingPrimitive, pose_resolver=None):
    """Canonical-frame accumulation for one dynamic object.

    `per_frame_clouds` is a list of (pose, cloud, timestamp). Points enclosed
    by the primitive at each timestamp are mapped into the object frame by the
    inverse primitive pose. Returns (canonical cloud, {timestamp: world pose}).
    """
    if not primitive.dynamic:
        raise ValueError("primitive must be dynamic")
    parts = []
    placements = {}
    for entry in per_frame_clouds:
        pose, cloud, timestamp = _resolve_frame(entry)
        if timestamp is None:
            raise MissingPose("dynamic accumulation requires frame timestamps")
        obj_pose = primitive.resolve_pose(timestamp, pose_resolver)
        placements[timestamp] = obj_pose
        if len(cloud) == 0:
            continue
        world = cloud.transformed(pose)
        inside = points_in_primitive(primitive, world.positions, obj_pose)
        if inside.any():
            parts.append(world.select(inside).transformed(obj_pose.inverse()))
    canonical = PointCloud.concatenate(parts) if parts else PointCloud(np.zeros((0, 3)))
    return canonical, placements


def estimate_normals(cloud: PointCloud, k: int, sensor_origins=None, return_degenerate=False):
    """PCA normals over k nearest neighbors.

    Normals are oriented toward the point's sensor origin when `frame_index`
    and `sensor_origins` (mapping frame -> (3,)) are available, otherwise into
    the +z half-space. Degenerate neighborhoods (two smallest eigenvalues equal
    within 1e-12) get the +z normal and are flagged.
    """
    n = len(cloud)
    if k < 3:
        raise ValueError("k must be >= 3")
    if n < k:
        raise ValueError(f"cloud has {n} points, need at least k={k}")
    tree = cKDTree(cloud.positions)
    _, idx = tree.query(cloud.positions, k=k)
    nb = cloud.positions[idx]  # (N, k, 3)
    centered = nb - nb.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    evals, evecs = np.linalg.eigh(cov)  # ascending eigenvalues
    normals = evecs[:, :, 0].copy()
    degenerate = np.abs(evals[:, 0] - evals[:, 1]) <= 1e-12
    normals[degenerate] = (0.0, 0.0, 1.0)
    total = evals.sum(axis=1)
    curvatures = np.where(total > 0, evals[:, 0] / np.maximum(total, 1e-300), 0.0)

    if cloud.frame_index is not None and sensor_origins is not None:
        origins = np.array([sensor_origins[f] for f in cloud.frame_index])
        toward = origins - cloud.positions
        flip = np.einsum("ni,ni->n", normals, toward) < 0
        normals[flip] = -normals[flip]
    else:
        key = np.where(
            normals[:, 2] != 0, normals[:, 2],
            np.where(normals[:, 1] != 0, normals[:, 1], normals[:, 0]),
        )
        normals[key < 0] = -normals[key < 0]
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    out = replace(cloud, normals=normals, curvatures=curvatures)
    return (out, degenerate) if return_degenerate else out


def determine_visibility(
    cloud: PointCloud,
    pose: Pose,
    intr: CameraIntrinsics,
    splat_radius_px: int = DEFAULT_SPLAT_RADIUS_PX,
    depth_slack: float = DEFAULT_DEPTH_SLACK,
) -> VisibilityMask:
    """Splatted min-depth-buffer visibility.

    Each in-frustum point writes its depth to every pixel within
    `splat_radius_px` (Chebyshev window); a point is visible iff
    depth <= buffer + depth_slack * depth at its own pixel.
    """
    if splat_radius_px < 0:
        raise ValueError("splat_radius_px must be >= 0")
    cam = pose.inverse().transform(cloud.positions)
    z = cam[:, 2]
    proj = np.full((len(cloud), 2), np.nan)
    in_front = z > MIN_DEPTH
    proj[in_front, 0] = intr.fx * cam[in_front, 0] / z[in_front] + intr.cx
    proj[in_front, 1] = intr.fy * cam[in_front, 1] / z[in_front] + intr.cy
    px = np.floor(proj[:, 0]).astype(np.int64, copy=False)
    py = np.floor(proj[:, 1]).astype(np.int64, copy=False)
    with np.errstate(invalid="ignore"):
        in_img = in_front & (proj[:, 0] >= 0) & (proj[:, 0] < intr.width)
        in_img &= (proj[:, 1] >= 0) & (proj[:, 1] < intr.height)

    buffer = np.full((intr.height, intr.width), np.inf)
    sel = np.flatnonzero(in_img)
    if sel.size:
        # descending depth order makes plain assignment equivalent to min-scatter
        order = sel[np.argsort(-z[sel], kind="stable")]
        ox, oy, oz = px[order], py[order], z[order]
        r = int(splat_radius_px)
        for dy in range(-r, r + 1):
            yy = oy + dy
            ok_y = (yy >= 0) & (yy < intr.height)
            for dx in range(-r, r + 1):
                xx = ox + dx
                ok = ok_y & (xx >= 0) & (xx < intr.width)
                # duplicate pixel indices resolve to the last write, which is
                # the smallest depth thanks to the descending sort
                buffer[yy[ok], xx[ok]] = oz[ok]
        visible = np.zeros(len(cloud), dtype=bool)
        visible[sel] = z[sel] * (1.0 - depth_slack) <= buffer[py[sel], px[sel]]
    else:
        visible = np.zeros(len(cloud), dtype=bool)
    return VisibilityMask(visible=visible, projections=proj)
