"""Semi-automatic dynamic-object pose generation.

An annotated object is a fixed-size box posed at a few keyframes. Positions
are interpolated with a clamped Catmull-Rom spline, orientations with
segmentwise slerp. Poses at the remaining timestamps come from sliding the
box along the spline and maximizing voxel overlap between the per-timestamp
scan and an occupancy template fused over all keyframes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .errors import DuplicateTimestamp, EmptyScan, NoPointsInPrimitive
from .geometry.pose import Pose
from .pointcloud import PointCloud

DEFAULT_SEARCH_WINDOW = 2.0
DEFAULT_SEARCH_STEP = 0.05
DEFAULT_TEMPLATE_VOXEL = 0.2
_ARC_SAMPLES_PER_SEGMENT = 256


@dataclass(frozen=True)
class KeyframeSet:
    half_extents: np.ndarray
    keyframes: tuple  # ((timestamp, Pose), ...)

    def __post_init__(self):
        he = np.array(self.half_extents, dtype=np.float64)
        if he.shape != (3,) or (he <= 0).any():
            raise ValueError("half_extents must be positive (3,)")
        he.setflags(write=False)
        object.__setattr__(self, "half_extents", he)
        kf = tuple(self.keyframes)
        if len(kf) < 2:
            raise ValueError("need at least 2 keyframes")
        ts = [t for t, _ in kf]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise DuplicateTimestamp("keyframe timestamps must strictly increase")
        object.__setattr__(self, "keyframes", kf)

    @property
    def timestamps(self):
        return np.array([t for t, _ in self.keyframes])


class PoseSpline:
    """Clamped Catmull-Rom positions + segmentwise slerp orientations."""

    def __init__(self, keys: KeyframeSet):
        self.keys = keys
        self.t = keys.timestamps
        self.p = np.array([pose.translation for _, pose in keys.keyframes])
        rots = Rotation.from_matrix(np.array([pose.rotation for _, pose in keys.keyframes]))
        self._slerp = Slerp(self.t, rots)
        # finite-difference tangents; duplicated end knots clamp the endpoints
        n = len(self.t)
        self.m = np.empty_like(self.p)
        for i in range(n):
            lo, hi = max(i - 1, 0), min(i + 1, n - 1)
            self.m[i] = (self.p[hi] - self.p[lo]) / (self.t[hi] - self.t[lo])
        self._build_arc_table()

    def _segment(self, t):
        i = int(np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self.t) - 2))
        return i

    def position(self, t):
        t = float(np.clip(t, self.t[0], self.t[-1]))
        i = self._segment(t)
        h = self.t[i + 1] - self.t[i]
        u = (t - self.t[i]) / h
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        return h00 * self.p[i] + h10 * h * self.m[i] + h01 * self.p[i + 1] + h11 * h * self.m[i + 1]

    def rotation(self, t):
        t = float(np.clip(t, self.t[0], self.t[-1]))
        return self._slerp([t]).as_matrix()[0]

    def pose(self, t) -> Pose:
        return Pose(self.rotation(t), self.position(t))

    def _build_arc_table(self):
        ts = []
        for i in range(len(self.t) - 1):
            seg = np.linspace(self.t[i], self.t[i + 1], _ARC_SAMPLES_PER_SEGMENT, endpoint=False)
            ts.append(seg)
        ts = np.concatenate(ts + [self.t[-1:]])
        pos = np.array([self.position(t) for t in ts])
        d = np.linalg.norm(np.diff(pos, axis=0), axis=1)
        self._arc_t = ts
        self._arc_s = np.concatenate([[0.0], np.cumsum(d)])

    def arc_length(self, t):
        t = float(np.clip(t, self.t[0], self.t[-1]))
        return float(np.interp(t, self._arc_t, self._arc_s))

    def time_at_arc(self, s):
        s = float(np.clip(s, 0.0, self._arc_s[-1]))
        return float(np.interp(s, self._arc_s, self._arc_t))

    def slide(self, t, arc_offset) -> Pose:
        """Pose at the parameter whose arc length differs by `arc_offset`."""
        return self.pose(self.time_at_arc(self.arc_length(t) + arc_offset))


def fit_spline(keys: KeyframeSet) -> PoseSpline:
    return PoseSpline(keys)


@dataclass(frozen=True)
class OccupancyTemplate:
    voxel_size: float
    half_extents: np.ndarray
    occupied: frozenset  # of (i, j, k) voxel indices in the object frame


def _local_voxels(points_local, half_extents, voxel_size):
    inside = (np.abs(points_local) <= half_extents + 1e-12).all(axis=1)
    vox = np.floor(points_local[inside] / voxel_size).astype(np.int64)
    if len(vox) == 0:
        return set()
    centers = (vox + 0.5) * voxel_size
    keep = (np.abs(centers) <= half_extents).all(axis=1)
    return {tuple(v) for v in vox[keep]}


def build_template(keys: KeyframeSet, per_timestamp_points, voxel_size=DEFAULT_TEMPLATE_VOXEL):
    """Union of enclosed-point voxels over all keyframes, in the object frame."""
    key_poses = dict(keys.keyframes)
    occupied = set()
    for timestamp, cloud in per_timestamp_points:
        if timestamp not in key_poses:
            raise ValueError(f"timestamp {timestamp!r} is not a keyframe")
        local = key_poses[timestamp].inverse().transform(cloud.positions)
        occupied |= _local_voxels(local, keys.half_extents, voxel_size)
    if not occupied:
        raise NoPointsInPrimitive("no keyframe contributed enclosed points")
    return OccupancyTemplate(voxel_size, keys.half_extents, frozenset(occupied))


@dataclass
class MatchResult:
    pose: Pose
    arc_offset: float
    score: int


def match_pose(
    template: OccupancyTemplate,
    spline: PoseSpline,
    t,
    points_t: PointCloud,
    window=DEFAULT_SEARCH_WINDOW,
    step=DEFAULT_SEARCH_STEP,
) -> MatchResult:
    """Best box pose near spline(t) by template-overlap voxel count.

    Candidates slide along the spline in arc length; ties prefer the smallest
    |offset| (then the smaller signed offset).
    """
    base = spline.pose(t)
    local0 = base.inverse().transform(points_t.positions) if len(points_t) else np.zeros((0, 3))
    near = (np.abs(local0) <= 2.0 * template.half_extents).all(axis=1) if len(points_t) else np.zeros(0, bool)
    if not near.any():
        raise EmptyScan(f"no scan point within 2x extents of the spline at t={t!r}")
    offsets = np.arange(-window, window + step / 2, step)
    # visit candidates by increasing |offset| so ties resolve to the smallest
    order = sorted(range(len(offsets)), key=lambda k: (abs(offsets[k]), offsets[k]))
    best = None
    for k in order:
        off = float(offsets[k])
        cand = spline.slide(t, off)
        vox = _local_voxels(cand.inverse().transform(points_t.positions),
                            template.half_extents, template.voxel_size)
        score = len(vox & template.occupied)
        if best is None or score > best.score:
            best = MatchResult(pose=cand, arc_offset=off, score=score)
    return best


def interpolate_trajectory(
    keys: KeyframeSet,
    template: OccupancyTemplate,
    frames,
    window=DEFAULT_SEARCH_WINDOW,
    step=DEFAULT_SEARCH_STEP,
):
    """Poses for every frame timestamp within the keyframe span.

    Keyframe timestamps return the annotated pose verbatim; other timestamps
    are matched against the occupancy template. Frames whose scan is empty
    near the prediction are skipped and reported. Returns (poses, report)
    where poses is a list of (timestamp, Pose) and report a list of dicts.
    """
    spline = fit_spline(keys)
    key_poses = dict(keys.keyframes)
    t0, t1 = keys.timestamps[0], keys.timestamps[-1]
    out = []
    report = []
    for timestamp, cloud in frames:
        if not (t0 <= timestamp <= t1):
            continue
        if timestamp in key_poses:
            out.append((timestamp, key_poses[timestamp]))
            report.append({"timestamp": timestamp, "status": "keyframe"})
            continue
        try:
            m = match_pose(template, spline, timestamp, cloud, window, step)
        except EmptyScan as e:
            report.append({"timestamp": timestamp, "status": "skipped", "reason": str(e)})
            continue
        out.append((timestamp, m.pose))
        report.append(
            {"timestamp": timestamp, "status": "matched",
             "arc_offset": m.arc_offset, "score": m.score}
        )
    return out, report
