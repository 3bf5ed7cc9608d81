"""Bounding primitives (cuboid, ellipsoid, extruded ground polygon).

Containment is boundary-inclusive everywhere so that points exactly on a face
resolve deterministically. Ground polygons use the even-odd rule in the x-y
plane and an inverse-distance-weighted per-vertex height profile.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MissingPose
from .pose import Pose

CUBOID = "cuboid"
ELLIPSOID = "ellipsoid"
GROUND_POLYGON = "ground_polygon"
SHAPES = (CUBOID, ELLIPSOID, GROUND_POLYGON)

_EPS = 1e-12


# ---------------------------------------------------------------------------
# polygon helpers (2D, x-y plane)
# ---------------------------------------------------------------------------

def points_in_polygon(polygon, points):
    """Even-odd containment test, boundary-inclusive. polygon (V,2), points (N,2)."""
    poly = np.asarray(polygon, dtype=np.float64)
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    on_edge = np.zeros(len(pts), dtype=bool)
    v = len(poly)
    for i in range(v):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % v]
        # crossing-number toggle for edges straddling the horizontal line at y
        crosses = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < np.where(crosses, xint, np.inf))
        # boundary test: distance from point to segment
        ex, ey = x1 - x0, y1 - y0
        L2 = ex * ex + ey * ey
        t = np.clip(((x - x0) * ex + (y - y0) * ey) / max(L2, _EPS), 0.0, 1.0)
        d2 = (x0 + t * ex - x) ** 2 + (y0 + t * ey - y) ** 2
        on_edge |= d2 <= 1e-20
    return inside | on_edge


def _segments_properly_intersect(p, q, r, s):
    """True if open segments pq and rs cross at an interior point."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    o1, o2 = orient(p, q, r), orient(p, q, s)
    o3, o4 = orient(r, s, p), orient(r, s, q)
    return (o1 * o2 < 0) and (o3 * o4 < 0)


def polygon_is_simple(polygon):
    """No two non-adjacent edges intersect."""
    poly = np.asarray(polygon, dtype=np.float64)
    v = len(poly)
    edges = [(poly[i], poly[(i + 1) % v]) for i in range(v)]
    for i in range(v):
        for j in range(i + 1, v):
            if j == i + 1 or (i == 0 and j == v - 1):
                continue
            if _segments_properly_intersect(*edges[i], *edges[j]):
                return False
    return True


def _polygon_noncollinear(polygon):
    poly = np.asarray(polygon, dtype=np.float64)
    d = poly - poly[0]
    cross = d[1:, 0][:, None] * d[1:, 1][None, :] - d[1:, 1][:, None] * d[1:, 0][None, :]
    return np.abs(cross).max() > _EPS


def idw_heights(polygon_xy, polygon_z, query_xy, power=2.0):
    """Inverse-distance-weighted height interpolation from polygon vertices."""
    poly = np.asarray(polygon_xy, dtype=np.float64)
    z = np.asarray(polygon_z, dtype=np.float64)
    q = np.atleast_2d(np.asarray(query_xy, dtype=np.float64))
    d2 = ((q[:, None, :] - poly[None, :, :]) ** 2).sum(axis=2)
    exact = d2 < 1e-24
    w = 1.0 / np.maximum(d2 ** (power / 2.0), 1e-24)
    out = (w * z[None, :]).sum(axis=1) / w.sum(axis=1)
    hit_rows = exact.any(axis=1)
    if hit_rows.any():
        out[hit_rows] = z[np.argmax(exact[hit_rows], axis=1)]
    return out


def fit_plane(polygon_xy, polygon_z):
    """Least-squares plane z = a*x + b*y + c through the polygon vertices."""
    poly = np.asarray(polygon_xy, dtype=np.float64)
    z = np.asarray(polygon_z, dtype=np.float64)
    A = np.column_stack([poly, np.ones(len(poly))])
    coef, *_ = np.linalg.lstsq(A, z, rcond=None)
    return coef  # (a, b, c)


# ---------------------------------------------------------------------------
# primitive type
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundingPrimitive:
    shape: str
    semantic_class: int
    instance_id: int
    pose: Pose = field(default_factory=Pose.identity)
    half_extents: np.ndarray | None = None
    semi_axes: np.ndarray | None = None
    polygon_xy: np.ndarray | None = None
    polygon_z: np.ndarray | None = None
    thickness: float | None = None
    dynamic: bool = False
    dynamic_poses: tuple = ()

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.instance_id < 0:
            raise ValueError("instance_id must be >= 0")
        if self.shape == CUBOID:
            he = np.array(self.half_extents, dtype=np.float64)
            if he.shape != (3,) or (he <= 0).any():
                raise ValueError("cuboid needs strictly positive half_extents (3,)")
            he.setflags(write=False)
            object.__setattr__(self, "half_extents", he)
        elif self.shape == ELLIPSOID:
            ax = np.array(self.semi_axes, dtype=np.float64)
            if ax.shape != (3,) or (ax <= 0).any():
                raise ValueError("ellipsoid needs strictly positive semi_axes (3,)")
            ax.setflags(write=False)
            object.__setattr__(self, "semi_axes", ax)
        else:
            poly = np.array(self.polygon_xy, dtype=np.float64)
            if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
                raise ValueError("polygon needs >= 3 2D vertices")
            if not _polygon_noncollinear(poly):
                raise ValueError("polygon vertices are collinear")
            if not polygon_is_simple(poly):
                raise ValueError("polygon is self-intersecting")
            z = np.array(self.polygon_z, dtype=np.float64)
            if z.shape != (len(poly),):
                raise ValueError("polygon_z must have one height per vertex")
            if self.thickness is None or self.thickness <= 0:
                raise ValueError("polygon needs a positive extrusion thickness")
            poly.setflags(write=False)
            z.setflags(write=False)
            object.__setattr__(self, "polygon_xy", poly)
            object.__setattr__(self, "polygon_z", z)
        if self.dynamic:
            if not self.dynamic_poses:
                raise ValueError("dynamic primitive needs dynamic_poses")
            ts = [t for t, _ in self.dynamic_poses]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError("dynamic_poses timestamps must strictly increase")
            object.__setattr__(self, "dynamic_poses", tuple(self.dynamic_poses))

    def resolve_pose(self, timestamp=None, interpolator=None) -> Pose:
        """Pose at `timestamp`; dynamic primitives need an exact keyed pose or
        an interpolator callable timestamp -> Pose."""
        if not self.dynamic:
            return self.pose
        if timestamp is None:
            raise MissingPose("dynamic primitive queried without a timestamp")
        for ts, pose in self.dynamic_poses:
            if ts == timestamp:
                return pose
        if interpolator is not None:
            return interpolator(timestamp)
        raise MissingPose(f"no pose at timestamp {timestamp!r}")

    def labeled_at(self, timestamp) -> bool:
        if not self.dynamic:
            return True
        return any(ts == timestamp for ts, _ in self.dynamic_poses)


# ---------------------------------------------------------------------------
# containment
# ---------------------------------------------------------------------------

def points_in_primitive(b: BoundingPrimitive, points, pose: Pose | None = None):
    """Vectorized boundary-inclusive containment. points (N,3) -> (N,) bool."""
    pose = pose if pose is not None else b.pose
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    local = (pts - pose.translation) @ pose.rotation
    if b.shape == CUBOID:
        return (np.abs(local) <= b.half_extents + _EPS).all(axis=1)
    if b.shape == ELLIPSOID:
        return ((local / b.semi_axes) ** 2).sum(axis=1) <= 1.0 + 1e-9
    inside2d = points_in_polygon(b.polygon_xy, local[:, :2])
    h = idw_heights(b.polygon_xy, b.polygon_z, local[:, :2])
    zok = np.abs(local[:, 2] - h) <= b.thickness + _EPS
    return inside2d & zok


def point_in_primitive(b: BoundingPrimitive, p_world, pose: Pose | None = None) -> bool:
    return bool(points_in_primitive(b, np.asarray(p_world)[None, :], pose)[0])


# ---------------------------------------------------------------------------
# ray intersection
# ---------------------------------------------------------------------------

def rays_intersect_primitive(b: BoundingPrimitive, origin, dirs, pose: Pose | None = None):
    """Entry distances for a bundle of rays from one origin.

    dirs (N,3) unit vectors; returns (N,) float with np.inf for misses. The
    entry distance is the smallest t >= 0 with origin + t*dir inside the
    primitive (0 when the origin itself is inside).
    """
    pose = pose if pose is not None else b.pose
    o = pose.rotation.T @ (np.asarray(origin, dtype=np.float64) - pose.translation)
    d = np.atleast_2d(np.asarray(dirs, dtype=np.float64)) @ pose.rotation
    if b.shape == CUBOID:
        return _ray_box(o, d, b.half_extents)
    if b.shape == ELLIPSOID:
        return _ray_ellipsoid(o, d, b.semi_axes)
    return _ray_polygon_prism(b, o, d)


def ray_intersects_primitive(b, origin, direction, pose=None):
    """Scalar wrapper: entry distance or None."""
    direction = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    t = rays_intersect_primitive(b, origin, direction[None, :], pose)[0]
    return None if np.isinf(t) else float(t)


def _ray_box(o, d, half):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
    t1 = (-half - o) * inv
    t2 = (half - o) * inv
    lo = np.minimum(t1, t2)
    hi = np.maximum(t1, t2)
    # parallel axes: inside the slab -> (-inf, inf), outside -> empty
    par = np.abs(d) < _EPS
    in_slab = np.abs(o) <= half + _EPS
    lo = np.where(par, np.where(in_slab, -np.inf, np.inf), lo)
    hi = np.where(par, np.where(in_slab, np.inf, -np.inf), hi)
    t_enter = lo.max(axis=1)
    t_exit = hi.min(axis=1)
    hit = (t_enter <= t_exit + _EPS) & (t_exit >= 0)
    return np.where(hit, np.maximum(t_enter, 0.0), np.inf)


def _ray_ellipsoid(o, d, axes):
    os = o / axes
    ds = d / axes
    a = (ds * ds).sum(axis=1)
    bq = 2.0 * (ds * os).sum(axis=1)
    c = (os * os).sum() - 1.0
    disc = bq * bq - 4 * a * c
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t_enter = (-bq - sq) / (2 * a)
    t_exit = (-bq + sq) / (2 * a)
    hit = ok & (t_exit >= 0)
    return np.where(hit, np.maximum(t_enter, 0.0), np.inf)


def _ray_polygon_prism(b, o, d, grid=64):
    """Entry distance into the extruded polygon, per ray.

    The lateral boundary is resolved from the exact 2D edge crossings; within
    each laterally-inside interval the curved top/bottom surface (IDW height
    +- thickness) is located on a parameter grid and tightened by bisection.
    """
    n = len(d)
    out = np.full(n, np.inf)
    cx = b.polygon_xy.mean(axis=0)
    rad = np.sqrt(((b.polygon_xy - cx) ** 2).sum(axis=1)).max()
    for i in range(n):
        out[i] = _ray_prism_single(b, o, d[i], cx, rad, grid)
    return out


def _prism_condition(b, o, d, ts):
    p = o[None, :] + np.asarray(ts)[:, None] * d[None, :]
    ok = points_in_polygon(b.polygon_xy, p[:, :2])
    h = idw_heights(b.polygon_xy, b.polygon_z, p[:, :2])
    return ok & (np.abs(p[:, 2] - h) <= b.thickness + _EPS)


def _ray_prism_single(b, o, d, cx, rad, grid):
    poly, zs, thick = b.polygon_xy, b.polygon_z, b.thickness
    d2 = d[:2]
    nd2 = np.linalg.norm(d2)
    if nd2 < 1e-12:
        # vertical ray: x-y fixed
        if not points_in_polygon(poly, o[None, :2])[0]:
            return np.inf
        h = idw_heights(poly, zs, o[None, :2])[0]
        if abs(d[2]) < _EPS:
            return 0.0 if abs(o[2] - h) <= thick else np.inf
        ta = (h - thick - o[2]) / d[2]
        tb = (h + thick - o[2]) / d[2]
        lo, hi = min(ta, tb), max(ta, tb)
        if hi < 0:
            return np.inf
        return max(lo, 0.0)
    # 2D crossings of the ray with polygon edges bound the laterally-inside
    # intervals; beyond the last crossing the ray is outside the polygon.
    ts = [0.0]
    for j in range(len(poly)):
        a, c = poly[j], poly[(j + 1) % len(poly)]
        e = c - a
        denom = d2[0] * e[1] - d2[1] * e[0]
        if abs(denom) < 1e-15:
            continue
        s = ((a[0] - o[0]) * e[1] - (a[1] - o[1]) * e[0]) / denom
        u = ((a[0] - o[0]) * d2[1] - (a[1] - o[1]) * d2[0]) / denom
        if 0.0 <= u <= 1.0 and s > 0:
            ts.append(s)
    ts.append((np.linalg.norm(cx - o[:2]) + rad) / nd2 + 1.0)
    ts = sorted(set(ts))
    samples = np.concatenate(
        [np.linspace(ta, tb, grid, endpoint=False) for ta, tb in zip(ts, ts[1:])]
        + [np.array([ts[-1]])]
    )
    hits = _prism_condition(b, o, d, samples)
    if not hits.any():
        return np.inf
    k = int(np.argmax(hits))
    if k == 0:
        return samples[0]
    lo, hi = samples[k - 1], samples[k]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _prism_condition(b, o, d, np.array([mid]))[0]:
            hi = mid
        else:
            lo = mid
    return hi
