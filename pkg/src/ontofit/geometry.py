"""Rigid poses and rotation utilities.

Rotations are stored as 3x3 matrices.  The optimizer-facing parameterization
is an unconstrained axis-angle 3-vector mapped through the exponential map;
:func:`rotation_entries` evaluates that map entrywise so it also works on
:class:`~ontofit.dual.Dual` inputs.  Angles are radians, lengths are scene
units throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dual as dm
from .errors import GeometryError

ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: ``x_world = rotation @ x_local + translation``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def as_affine(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_affine(m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4):
            raise GeometryError(f"affine matrix must be 4x4, got {m.shape}")
        if np.max(np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0]))) > 1e-9:
            raise GeometryError("affine matrix bottom row must be (0, 0, 0, 1)")
        pose = Pose(m[:3, :3], m[:3, 3])
        if not pose.is_valid(tol=1e-6):
            raise GeometryError("rotation block is not orthonormal with det +1")
        return pose

    def is_valid(self, tol: float = ORTHONORMAL_TOL) -> bool:
        r = self.rotation
        return (
            np.all(np.isfinite(r))
            and np.all(np.isfinite(self.translation))
            and np.max(np.abs(r @ r.T - np.eye(3))) <= tol
            and abs(np.linalg.det(r) - 1.0) <= tol
        )

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)


def identity() -> Pose:
    return Pose()


def compose(a: Pose, b: Pose) -> Pose:
    """Pose whose affine matrix is ``affine(a) @ affine(b)``."""
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def transform_point(pose: Pose, x: np.ndarray) -> np.ndarray:
    """Apply the pose to one point ``(3,)`` or a batch ``(n, 3)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return pose.rotation @ x + pose.translation
    return x @ pose.rotation.T + pose.translation


def transform_direction(pose: Pose, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        return pose.rotation @ v
    return v @ pose.rotation.T


def skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def rotation_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_entries(w0, w1, w2):
    """Exponential-map rotation as nine entries (row-major).

    Accepts floats or duals.  A Taylor branch in angle**2 keeps the map and
    its derivatives finite at the identity.
    """
    t2 = w0 * w0 + w1 * w1 + w2 * w2
    if float(np.max(dm.value_of(t2))) < 1e-12:
        a = 1.0 - t2 * (1.0 / 6.0) + t2 * t2 * (1.0 / 120.0)
        b = 0.5 - t2 * (1.0 / 24.0) + t2 * t2 * (1.0 / 720.0)
    else:
        theta = dm.sqrt(t2)
        a = dm.sin(theta) / theta
        b = (1.0 - dm.cos(theta)) / t2
    r00 = 1.0 + b * (-(w1 * w1) - w2 * w2)
    r11 = 1.0 + b * (-(w0 * w0) - w2 * w2)
    r22 = 1.0 + b * (-(w0 * w0) - w1 * w1)
    r01 = b * (w0 * w1) - a * w2
    r10 = b * (w0 * w1) + a * w2
    r02 = b * (w0 * w2) + a * w1
    r20 = b * (w0 * w2) - a * w1
    r12 = b * (w1 * w2) - a * w0
    r21 = b * (w1 * w2) + a * w0
    return r00, r01, r02, r10, r11, r12, r20, r21, r22


def axis_angle_to_matrix(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return np.array(rotation_entries(w[0], w[1], w[2])).reshape(3, 3)


def matrix_to_axis_angle(r: np.ndarray) -> np.ndarray:
    """Log map; angle in [0, pi], with the near-pi branch via the symmetric part."""
    r = np.asarray(r, dtype=float)
    cos_theta = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    axial = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if theta < 1e-8:
        return 0.5 * axial
    if np.sin(theta) < 1e-6:
        # theta ~ pi: (R + I)/2 = u u^T
        b = (r + np.eye(3)) / 2.0
        i = int(np.argmax(np.diag(b)))
        u = b[:, i] / np.sqrt(max(b[i, i], 1e-300))
        u = u / np.linalg.norm(u)
        return theta * u
    return (theta / (2.0 * np.sin(theta))) * axial


def rotation_about_line(axis: np.ndarray, pivot: np.ndarray, angle: float) -> Pose:
    """Rotation by ``angle`` about the line through ``pivot`` with direction ``axis``."""
    u = np.asarray(axis, dtype=float)
    n = np.linalg.norm(u)
    if n < 1e-12:
        raise GeometryError("rotation axis must be a nonzero vector")
    u = u / n
    r = axis_angle_to_matrix(u * angle)
    p = np.asarray(pivot, dtype=float)
    return Pose(r, p - r @ p)


def translation_along(direction: np.ndarray, distance: float) -> Pose:
    u = np.asarray(direction, dtype=float)
    n = np.linalg.norm(u)
    if n < 1e-12:
        raise GeometryError("translation direction must be a nonzero vector")
    return Pose(np.eye(3), (u / n) * distance)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation via a normalized random quaternion."""
    q = rng.normal(size=4)
    q = q / np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_pose(rng: np.random.Generator, translation_scale: float = 1.0) -> Pose:
    return Pose(
        random_rotation(rng),
        rng.uniform(-translation_scale, translation_scale, size=3),
    )
