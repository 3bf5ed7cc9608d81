"""Rigid-body poses and the plain-text pose table format.

Convention used throughout the package: a `Pose` maps local (sensor/object)
coordinates into the world frame, ``p_world = R @ p_local + t``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHONORMALITY_TOL = 1e-9


def _as_readonly(a, shape, dtype=np.float64):
    out = np.array(a, dtype=dtype)
    if out.shape != shape:
        raise ValueError(f"expected shape {shape}, got {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Pose:
    """Rotation + translation, validated to be a proper rigid transform."""

    rotation: np.ndarray
    translation: np.ndarray
    frame_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "rotation", _as_readonly(self.rotation, (3, 3)))
        object.__setattr__(self, "translation", _as_readonly(self.translation, (3,)))
        err = np.abs(self.rotation.T @ self.rotation - np.eye(3)).max()
        if err >= ORTHONORMALITY_TOL:
            raise ValueError(f"rotation not orthonormal (|R^T R - I|_inf = {err:.3e})")
        if np.linalg.det(self.rotation) < 0:
            raise ValueError("rotation has negative determinant (reflection)")
        if self.frame_index is not None and self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")

    @classmethod
    def identity(cls, frame_index=None):
        return cls(np.eye(3), np.zeros(3), frame_index)

    @classmethod
    def from_quaternion(cls, q_wxyz, translation, frame_index=None):
        """Build from a (possibly unnormalized) w-x-y-z quaternion."""
        q = np.asarray(q_wxyz, dtype=np.float64)
        n = np.linalg.norm(q)
        if n < 1e-12:
            raise ValueError("zero quaternion")
        w, x, y, z = q / n
        rot = np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )
        return cls(rot, translation, frame_index)

    def quaternion(self):
        """Return the rotation as a unit w-x-y-z quaternion with w >= 0."""
        from scipy.spatial.transform import Rotation

        x, y, z, w = Rotation.from_matrix(self.rotation).as_quat()
        q = np.array([w, x, y, z])
        if q[0] < 0:
            q = -q
        return q

    def compose(self, other: "Pose") -> "Pose":
        """Composition self*other: apply `other` first, then `self`."""
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation, self.frame_index)

    def transform(self, points):
        """Apply to one point (3,) or a batch (N, 3)."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def rotate(self, vectors):
        v = np.asarray(vectors, dtype=np.float64)
        return v @ self.rotation.T

    def matrix3x4(self):
        return np.hstack([self.rotation, self.translation[:, None]])


def write_pose_file(path, poses):
    """One line per frame: `frame_index r00 r01 r02 t0 r10 ... t2` (row-major 3x4)."""
    lines = []
    for pose in poses:
        if pose.frame_index is None:
            raise ValueError("pose file requires frame_index on every pose")
        vals = pose.matrix3x4().reshape(-1)
        lines.append(str(pose.frame_index) + " " + " ".join(f"{v:.17g}" for v in vals))
    with open(path, "w") as f:
        f.write("\n".join(lines) + ("\n" if lines else ""))


def read_pose_file(path):
    poses = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            tok = line.split()
            if len(tok) != 13:
                raise ValueError(f"{path}:{lineno}: expected 13 fields, got {len(tok)}")
            mat = np.array([float(v) for v in tok[1:]]).reshape(3, 4)
            poses.append(Pose(mat[:, :3], mat[:, 3], int(tok[0])))
    return poses
