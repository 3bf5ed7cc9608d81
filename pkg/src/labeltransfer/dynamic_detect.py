"""Dynamic-point detection via clamped log-odds occupancy + cluster voting.

A sparse voxel grid accumulates per-scan occupancy evidence. Voxels that ever
reach the lower clamp stay free forever (absorbing state); points whose
smoothness clusters fall mostly into free voxels are flagged dynamic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import MissingNormals
from .pointcloud import PointCloud

DEFAULT_VOXEL_SIZE = 0.2
DEFAULT_L_OCC = 0.85
DEFAULT_L_FREE = -0.4
DEFAULT_P_MIN = -2.0
DEFAULT_P_MAX = 3.5
DEFAULT_PROB_THRESHOLD = 0.5
DEFAULT_ANGLE_THRESHOLD_DEG = 8.0
DEFAULT_CURVATURE_THRESHOLD = 1.0
DEFAULT_MIN_CLUSTER = 50
DEFAULT_NEIGHBOR_RADIUS = 0.3


@dataclass
class OccupancyGrid:
    voxel_size: float = DEFAULT_VOXEL_SIZE
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    p_min: float = DEFAULT_P_MIN
    p_max: float = DEFAULT_P_MAX
    l_occ: float = DEFAULT_L_OCC
    l_free: float = DEFAULT_L_FREE
    log_odds: dict = field(default_factory=dict)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        if not (self.p_min < 0 < self.p_max):
            raise ValueError("need p_min < 0 < p_max")
        if not (self.l_occ > 0 > self.l_free):
            raise ValueError("need l_occ > 0 > l_free")

    def voxel_indices(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.floor((pts - self.origin) / self.voxel_size).astype(np.int64)

    def voxel_center(self, index):
        return self.origin + (np.asarray(index, dtype=np.float64) + 0.5) * self.voxel_size

    def _bump(self, key, increment):
        prev = self.log_odds.get(key, 0.0)
        if prev == self.p_min:
            return  # absorbing free state
        self.log_odds[key] = float(np.clip(prev + increment, self.p_min, self.p_max))


def _traverse_rays(grid: OccupancyGrid, origin, endpoints):
    """Voxels crossed by each ray, endpoint voxel excluded (parallel 3D DDA)."""
    o = np.asarray(origin, dtype=np.float64)
    ends = np.atleast_2d(np.asarray(endpoints, dtype=np.float64))
    start_v = grid.voxel_indices(o[None, :])[0]
    end_v = grid.voxel_indices(ends)
    d = ends - o
    seg_len = np.linalg.norm(d, axis=1)
    ok = seg_len > 1e-12
    dirn = np.where(ok[:, None], d, 1.0) / np.where(ok, seg_len, np.sqrt(3.0))[:, None]
    step = np.sign(dirn).astype(np.int64)
    small = np.abs(dirn) < 1e-12
    inv = 1.0 / np.where(small, 1.0, np.abs(dirn))
    inv[small] = np.inf
    cur = np.tile(start_v, (len(ends), 1))
    # parameter (metric distance) at which each axis next crosses a boundary
    frac = (o - grid.origin) / grid.voxel_size - start_v
    t_max = np.where(
        step > 0, (1.0 - frac[None, :]) * inv * grid.voxel_size,
        np.where(step < 0, frac[None, :] * inv * grid.voxel_size, np.inf),
    )
    t_delta = inv * grid.voxel_size
    visited = []
    active = ok & ~(cur == end_v).all(axis=1)
    max_steps = (int(np.ceil(seg_len.max() / grid.voxel_size)) + 2) * 3 if len(ends) else 0
    for _ in range(max_steps):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        ax = np.argmin(t_max[rows], axis=1)
        t_entry = t_max[rows, ax]
        # next boundary beyond the endpoint: the ray is done (endpoint voxel is
        # handled by the caller, never recorded as traversed)
        passed = t_entry > seg_len[rows] + 1e-9
        active[rows[passed]] = False
        go, axg = rows[~passed], ax[~passed]
        cur[go, axg] += step[go, axg]
        t_max[go, axg] += t_delta[go, axg]
        reached = (cur[go] == end_v[go]).all(axis=1)
        rec = go[~reached]
        if rec.size:
            visited.append(cur[rec].copy())
        active[go[reached]] = False
    if not visited:
        return np.zeros((0, 3), dtype=np.int64), start_v
    return np.vstack(visited), start_v


def integrate_scan(grid: OccupancyGrid, sensor_origin, scan: PointCloud) -> OccupancyGrid:
    """One scan: endpoint voxels get +l_occ, traversed voxels +l_free.

    Each voxel receives at most one increment per scan; endpoint evidence wins
    over free evidence. Mutates and returns `grid`.
    """
    if len(scan) == 0:
        return grid
    end_v = grid.voxel_indices(scan.positions)
    occupied = {tuple(v) for v in end_v}
    crossed, start_v = _traverse_rays(grid, sensor_origin, scan.positions)
    free = {tuple(v) for v in crossed}
    free.add(tuple(start_v))
    free -= occupied
    for key in sorted(occupied):
        grid._bump(key, grid.l_occ)
    for key in sorted(free):
        grid._bump(key, grid.l_free)
    return grid


def free_voxel_set(grid: OccupancyGrid, threshold=None):
    """Voxel indices with stored log-odds <= threshold (default: exactly p_min)."""
    if threshold is None:
        threshold = grid.p_min
    if threshold > 0:
        raise ValueError("threshold must be <= 0")
    return {k for k, v in grid.log_odds.items() if v <= threshold}


@dataclass
class Cluster:
    indices: np.ndarray
    occupancy_probability: float | None = None


def region_growing(
    cloud: PointCloud,
    angle_threshold_deg=DEFAULT_ANGLE_THRESHOLD_DEG,
    curvature_threshold=DEFAULT_CURVATURE_THRESHOLD,
    min_cluster=DEFAULT_MIN_CLUSTER,
    neighbor_radius=DEFAULT_NEIGHBOR_RADIUS,
):
    """Smoothness-constrained region growing (PCL-style).

    Seeds are taken in ascending curvature order; a neighbor joins a region if
    its normal is within `angle_threshold_deg` of the growing point's normal,
    and continues to grow the region if its curvature is below
    `curvature_threshold`.
    """
    if cloud.normals is None:
        raise MissingNormals("region growing requires normals")
    n = len(cloud)
    if n == 0:
        return []
    curv = cloud.curvatures if cloud.curvatures is not None else np.zeros(n)
    tree = cKDTree(cloud.positions)
    neighbor_lists = tree.query_ball_point(cloud.positions, neighbor_radius)
    cos_thr = np.cos(np.radians(angle_threshold_deg))
    normals = cloud.normals

    unassigned = np.ones(n, dtype=bool)
    order = np.argsort(curv, kind="stable")
    clusters = []
    for seed in order:
        if not unassigned[seed]:
            continue
        members = [seed]
        unassigned[seed] = False
        queue = [seed]
        while queue:
            cur = queue.pop(0)
            for nb in neighbor_lists[cur]:
                if not unassigned[nb]:
                    continue
                if abs(normals[cur] @ normals[nb]) >= cos_thr:
                    unassigned[nb] = False
                    members.append(nb)
                    if curv[nb] <= curvature_threshold:
                        queue.append(nb)
        if len(members) >= min_cluster:
            clusters.append(Cluster(indices=np.array(sorted(members), dtype=np.int64)))
    return clusters


def detect_dynamic(
    cloud: PointCloud,
    clusters,
    grid: OccupancyGrid,
    prob_threshold=DEFAULT_PROB_THRESHOLD,
    free_threshold=None,
):
    """Per-point dynamic flags from cluster-level free-voxel voting.

    A cluster's occupancy probability is the exact fraction of its members
    whose enclosing voxel is in the free set; clusters above `prob_threshold`
    are dynamic. Returns (flags (N,) bool, clusters with probabilities filled).
    """
    if not (0 < prob_threshold <= 1):
        raise ValueError("prob_threshold must be in (0, 1]")
    free = free_voxel_set(grid, free_threshold)
    vox = grid.voxel_indices(cloud.positions)
    in_free = np.array([tuple(v) in free for v in vox]) if len(cloud) else np.zeros(0, bool)
    flags = np.zeros(len(cloud), dtype=bool)
    out = []
    for c in clusters:
        p = float(in_free[c.indices].sum()) / len(c.indices)
        out.append(Cluster(indices=c.indices, occupancy_probability=p))
        if p > prob_threshold:
            flags[c.indices] = True
    return flags, out
