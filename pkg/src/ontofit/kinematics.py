"""Kinematic concept extraction from observation pairs.

Segment the moving part by per-point displacement, estimate its rigid motion
by least squares (cross-covariance SVD with reflection correction), and
decompose the motion into screw form: rotation angle about an axis line plus
translation along it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .cloud import CloudPair, PointCloud
from .errors import DegenerateInputError, NoMotionError
from .geometry import Pose, axis_angle_to_matrix, matrix_to_axis_angle
from .templates import KinematicParams

DEFAULT_THETA_MIN = 0.05  # rad
DEFAULT_D_MIN = 0.01  # length units
DEFAULT_TAU = 0.02  # segmentation displacement threshold


@dataclass(frozen=True)
class ScrewMotion:
    """Chasles form of a rigid motion.

    ``pivot`` is the axis point closest to the origin (pivot . axis = 0) and
    the axis sign is canonical: its first component larger than 1e-9 in
    magnitude is positive, with angle and slide flipped to compensate.
    ``kind`` is threshold classification only; the fields always carry the
    exact decomposition.
    """

    kind: str  # "revolute" | "prismatic" | "general"
    axis: np.ndarray
    pivot: np.ndarray
    angle: float
    distance: float

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float).reshape(3)
        p = np.asarray(self.pivot, dtype=float).reshape(3)
        a.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "axis", a)
        object.__setattr__(self, "pivot", p)


def _axis_sign(axis: np.ndarray) -> float:
    for comp in axis:
        if abs(comp) > 1e-9:
            return 1.0 if comp > 0 else -1.0
    return 1.0


def screw_decompose(motion: Pose, theta_min: float = DEFAULT_THETA_MIN,
                    d_min: float = DEFAULT_D_MIN) -> ScrewMotion:
    """Decompose a rigid motion into canonical screw parameters.

    Raises :class:`NoMotionError` when both the rotation angle and the
    translation norm fall below their thresholds.
    """
    w = matrix_to_axis_angle(motion.rotation)
    theta = float(np.linalg.norm(w))
    t = motion.translation
    if theta < 1e-9:
        norm_t = float(np.linalg.norm(t))
        if norm_t < d_min:
            raise NoMotionError(
                f"angle {theta:.2e} < {theta_min} and translation "
                f"{norm_t:.2e} < {d_min}"
            )
        u = t / norm_t
        sign = _axis_sign(u)
        u = sign * u
        return ScrewMotion("prismatic", u, np.zeros(3), 0.0, sign * norm_t)

    u = w / theta
    sign = _axis_sign(u)
    u, theta = sign * u, sign * theta
    d = float(np.dot(t, u))
    t_perp = t - d * u
    half = theta / 2.0
    pivot = 0.5 * t_perp + 0.5 * (np.cos(half) / np.sin(half)) * np.cross(u, t_perp)
    pivot = pivot - np.dot(pivot, u) * u  # exact closest-point normalization

    norm_t = float(np.linalg.norm(t))
    if abs(theta) >= theta_min and abs(d) < d_min:
        kind = "revolute"
    elif abs(theta) >= theta_min:
        kind = "general"
    elif norm_t >= d_min:
        # sub-threshold spin riding on a real translation
        kind = "prismatic"
    else:
        raise NoMotionError(
            f"angle {abs(theta):.2e} < {theta_min} and translation "
            f"{norm_t:.2e} < {d_min}"
        )
    return ScrewMotion(kind, u, pivot, theta, d)


def recompose(screw: ScrewMotion) -> Pose:
    """Rigid motion realizing the screw parameters."""
    r = axis_angle_to_matrix(screw.axis * screw.angle)
    t = (np.eye(3) - r) @ screw.pivot + screw.distance * screw.axis
    return Pose(r, t)


def estimate_rigid(initial: PointCloud | np.ndarray, final: PointCloud | np.ndarray,
                   correspondences: np.ndarray | None = None):
    """Least-squares rigid transform mapping initial points onto final points.

    ``correspondences[i]`` is the index in ``final`` matching initial point i
    (identity when omitted).  Returns (Pose, rms residual).  Raises
    :class:`DegenerateInputError` for fewer than 3 or collinear points.
    """
    src = initial.points if isinstance(initial, PointCloud) else np.asarray(initial, float)
    dst = final.points if isinstance(final, PointCloud) else np.asarray(final, float)
    if correspondences is not None:
        dst = dst[np.asarray(correspondences)]
    if src.shape != dst.shape:
        raise DegenerateInputError("corresponding clouds must have equal shape")
    if src.shape[0] < 3:
        raise DegenerateInputError("need at least 3 correspondences")

    mu_src = src.mean(axis=0)
    mu_dst = dst.mean(axis=0)
    h = (src - mu_src).T @ (dst - mu_dst)
    u, s, vt = np.linalg.svd(h)
    if s[1] <= 1e-12 * max(s[0], 1e-30):
        raise DegenerateInputError("correspondences are collinear (rank < 2)")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    trans = mu_dst - rot @ mu_src
    residual = (src @ rot.T + trans) - dst
    rms = float(np.sqrt(np.mean(np.sum(residual**2, axis=1))))
    return Pose(rot, trans), rms


@dataclass(frozen=True)
class SegmentMask:
    """Per-point moving/static split of the initial cloud, with stats."""

    moving: np.ndarray  # (n,) bool over the initial cloud
    displacement: np.ndarray  # (n,) per-point moved distance
    pairing: np.ndarray  # (n,) index into the final cloud for each initial point
    approximate: bool  # True when nearest-neighbor pseudo-correspondence was used
    threshold: float

    def __post_init__(self):
        for name in ("moving", "displacement", "pairing"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def moving_count(self) -> int:
        return int(np.count_nonzero(self.moving))

    def stats(self) -> dict:
        out = {"threshold": self.threshold, "approximate": self.approximate}
        for name, mask in (("moving", self.moving), ("static", ~self.moving)):
            if np.any(mask):
                out[f"mean_{name}"] = float(self.displacement[mask].mean())
                out[f"max_{name}"] = float(self.displacement[mask].max())
            else:
                out[f"mean_{name}"] = 0.0
                out[f"max_{name}"] = 0.0
        return out


def segment_moving_part(pair: CloudPair, tau: float = DEFAULT_TAU) -> SegmentMask:
    """Points whose displacement exceeds ``tau`` form the moving segment.

    Without exact correspondences, a single nearest-neighbor assignment after
    centroid alignment is used and the result is flagged approximate.
    """
    p0 = pair.initial.points
    p1 = pair.final.points
    if pair.correspondence:
        pairing = np.arange(p0.shape[0])
        disp = np.linalg.norm(p1 - p0, axis=1)
        approximate = False
    else:
        shift = p0.mean(axis=0) - p1.mean(axis=0)
        tree = cKDTree(p1 + shift)
        disp, pairing = tree.query(p0)
        disp = np.linalg.norm(p1[pairing] - p0, axis=1)
        approximate = True
    return SegmentMask(disp > tau, disp, pairing, approximate, float(tau))


@dataclass(frozen=True)
class JointDiagnostics:
    screw: ScrewMotion
    rms: float
    moving_count: int
    axis_cosine_distance: float | None = None
    pivot_line_distance: float | None = None


def axis_cosine_distance(u_est: np.ndarray, u_true: np.ndarray) -> float:
    """1 - |cos| between axis directions (sign-invariant alignment error)."""
    u1 = np.asarray(u_est, float)
    u2 = np.asarray(u_true, float)
    c = abs(float(np.dot(u1, u2))) / (np.linalg.norm(u1) * np.linalg.norm(u2))
    return 1.0 - min(c, 1.0)


def pivot_line_distance(p_true: np.ndarray, axis_point: np.ndarray,
                        axis_dir: np.ndarray) -> float:
    """Distance from the true pivot to the estimated axis line (well-defined
    despite the free choice of point along the axis)."""
    rel = np.asarray(p_true, float) - np.asarray(axis_point, float)
    u = np.asarray(axis_dir, float)
    u = u / np.linalg.norm(u)
    return float(np.linalg.norm(rel - np.dot(rel, u) * u))


def estimate_joint(pair: CloudPair, mask: SegmentMask,
                   theta_min: float = DEFAULT_THETA_MIN,
                   d_min: float = DEFAULT_D_MIN,
                   ground_truth: KinematicParams | None = None):
    """Rigid motion of the moving segment decomposed into joint parameters.

    The joint's positive direction follows the observed motion and its range
    is the observed displacement.  A rotationally symmetric part on a sliding
    joint picks up a spurious noise-driven spin in the rigid fit, so when a
    pure translation explains the correspondences nearly as well as the full
    rigid motion the joint is classified prismatic.  Returns
    (KinematicParams, JointDiagnostics); diagnostics carry axis/pivot errors
    when ground truth is supplied.
    """
    idx = np.flatnonzero(mask.moving)
    if idx.shape[0] < 3:
        raise DegenerateInputError(
            f"moving segment has {idx.shape[0]} points; need >= 3"
        )
    src = pair.initial.points[idx]
    dst = pair.final.points[mask.pairing[idx]]
    motion, rms = estimate_rigid(src, dst)
    screw = screw_decompose(motion, theta_min, d_min)

    t_only = (dst - src).mean(axis=0)
    rms_translation = float(
        np.sqrt(np.mean(np.sum((src + t_only - dst) ** 2, axis=1)))
    )
    translation_explains = rms_translation <= max(2.0 * rms, 1e-12)

    if abs(screw.angle) >= theta_min and not translation_explains:
        direction = screw.axis * np.sign(screw.angle)
        joint = KinematicParams("revolute", direction, screw.pivot,
                                (0.0, abs(screw.angle)))
    else:
        norm_t = float(np.linalg.norm(t_only))
        if norm_t < d_min:
            raise NoMotionError("moving segment displacement below both thresholds")
        direction = t_only / norm_t
        joint = KinematicParams("prismatic", direction, np.zeros(3), (0.0, norm_t))

    cos_dist = pivot_dist = None
    if ground_truth is not None and ground_truth.kind == joint.kind:
        cos_dist = axis_cosine_distance(joint.axis, ground_truth.axis)
        if joint.kind == "revolute":
            pivot_dist = pivot_line_distance(ground_truth.pivot, joint.pivot, joint.axis)
    diag = JointDiagnostics(screw, rms, int(idx.shape[0]), cos_dist, pivot_dist)
    return joint, diag
