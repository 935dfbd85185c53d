"""Rendering template instances: surface sampling, meshes, partial scans,
corruption augmentation, and articulated before/after cloud pairs.

All operations are pure given a seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from .cloud import CloudPair, PointCloud, TriMesh
from .config import NoiseConfig
from .errors import GeometryError
from .geometry import Pose, compose, transform_point
from .templates import Instance, KinematicParams
from .templates.composites import proportional_counts


def sample_surface(inst: Instance, n: int, seed) -> PointCloud:
    """n exact surface points, allocated area-proportionally for composites."""
    if n < 1:
        raise ValueError("sample count must be >= 1")
    rng = np.random.default_rng(seed)
    local, labels = inst.template.sample_local(inst.params, n, rng)
    return PointCloud(transform_point(inst.pose, local), labels)


def render_mesh(inst: Instance, resolution: int = 64) -> TriMesh:
    return inst.template.mesh_local(inst.params, resolution).transformed(inst.pose)


def partial_scan_indices(cloud: PointCloud, camera,
                         radius_factor: float = 100.0) -> np.ndarray:
    """Sorted indices of the camera-visible subset (spherical-flip hidden
    point removal: reflect about a large sphere centered on the camera, keep
    the convex hull of the flipped cloud plus the camera)."""
    camera = np.asarray(camera, dtype=float).reshape(3)
    center = cloud.centroid()
    bound = cloud.bounding_radius()
    if np.linalg.norm(camera - center) <= bound:
        raise GeometryError("camera lies inside the cloud bounding sphere")
    rel = cloud.points - camera
    norms = np.linalg.norm(rel, axis=1)
    radius = radius_factor * bound
    flipped = rel * ((2.0 * radius / norms - 1.0))[:, None]
    hull = ConvexHull(np.vstack([flipped, np.zeros(3)]))
    n = len(cloud)
    return np.array(sorted(v for v in hull.vertices if v < n))


def partial_scan(cloud: PointCloud, camera, radius_factor: float = 100.0) -> PointCloud:
    """Camera-visible subset of the cloud (see :func:`partial_scan_indices`)."""
    return cloud.take(partial_scan_indices(cloud, camera, radius_factor))


def augment(cloud: PointCloud, sigma: float, dropout: float, outliers: float,
            seed) -> PointCloud:
    """Gaussian jitter, uniform dropout, then uniform box outliers.

    ``sigma`` is an absolute length; fractions are of the input size.
    Outliers are drawn uniformly inside the input's bounding box scaled 1.5x
    about its center.  Stages with zero magnitude are skipped, so the all-zero
    call returns the cloud unchanged.
    """
    if not (0.0 <= dropout < 1.0 and 0.0 <= outliers < 1.0):
        raise ValueError("dropout and outlier fractions must lie in [0, 1)")
    if sigma == 0.0 and dropout == 0.0 and outliers == 0.0:
        return cloud
    rng = np.random.default_rng(seed)
    pts = cloud.points
    labels = list(cloud.labels) if cloud.labels is not None else None
    n = pts.shape[0]
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    if sigma > 0.0:
        pts = pts + rng.normal(0.0, sigma, size=pts.shape)
    if dropout > 0.0:
        n_drop = int(round(n * dropout))
        keep = np.sort(rng.permutation(n)[: n - n_drop])
        pts = pts[keep]
        if labels is not None:
            labels = [labels[i] for i in keep]
    if outliers > 0.0:
        n_out = int(round(n * outliers))
        center, half = (lo + hi) / 2.0, (hi - lo) / 2.0
        extra = center + rng.uniform(-1.0, 1.0, size=(n_out, 3)) * (1.5 * half)
        pts = np.vstack([pts, extra])
        if labels is not None:
            labels.extend(["outlier"] * n_out)
    return PointCloud(pts, tuple(labels) if labels is not None else None)


@dataclass(frozen=True)
class SceneSpec:
    """An articulated scene: one moving instance on a one-DOF world joint,
    optional static base instances, camera, and corruption settings.

    ``moving.pose`` is the placement at joint state 0; states are fractions
    of the joint range.
    """

    moving: Instance
    joint: KinematicParams
    base: tuple[Instance, ...] = ()
    states: tuple[float, float] = (0.0, 1.0)
    camera: np.ndarray = field(default_factory=lambda: np.array([5.0, 0.0, 0.0]))
    noise: NoiseConfig | None = None
    partial: bool = False

    def __post_init__(self):
        object.__setattr__(self, "camera", np.asarray(self.camera, dtype=float).reshape(3))
        s0, s1 = self.states
        if not (0.0 <= s0 <= 1.0 and 0.0 <= s1 <= 1.0):
            raise ValueError("joint states must be fractions in [0, 1]")

    def displacement(self, fraction: float) -> Pose:
        """World rigid transform from joint state 0 to the given fraction."""
        return self.joint.displacement(fraction * self.joint.span)

    def moving_pose_at(self, fraction: float) -> Pose:
        return compose(self.displacement(fraction), self.moving.pose)


def render_pair(scene: SceneSpec, n: int, seed,
                min_moving_share: float = 0.35) -> CloudPair:
    """Sample the scene once, place the moving part at both joint states.

    Corresponding indices are the same material point; static base points are
    appended identically to both frames.  Labels mark "moving"/"base".
    Allocation is area-proportional, except the moving part is floored at
    ``min_moving_share`` of the budget so thin articulated parts stay
    observable next to bulky bases.
    """
    rng = np.random.default_rng(seed)
    parts = [scene.moving, *scene.base]
    areas = [p.template.surface_area(p.params) for p in parts]
    counts = proportional_counts(areas, n)
    floor = int(np.ceil(min_moving_share * n)) if scene.base else 1
    if counts[0] < floor:
        deficit = floor - counts[0]
        counts = counts.copy()
        counts[0] = floor
        base_total = sum(counts[1:])
        for j in range(1, len(counts)):
            take = int(round(deficit * counts[j] / base_total)) if base_total else 0
            counts[j] -= min(take, counts[j])
        # largest-remainder rounding may leave the total off by a point or two
        drift = int(counts.sum()) - n
        counts[int(np.argmax(counts[1:])) + 1] -= drift

    moving_local, _ = scene.moving.template.sample_local(
        scene.moving.params, counts[0], rng
    )
    ref = transform_point(scene.moving.pose, moving_local)
    d0 = scene.displacement(scene.states[0])
    d1 = scene.displacement(scene.states[1])
    initial = [transform_point(d0, ref)]
    final = [transform_point(d1, ref)]
    labels = ["moving"] * counts[0]
    for inst, cnt in zip(scene.base, counts[1:]):
        if cnt == 0:
            continue
        local, _ = inst.template.sample_local(inst.params, cnt, rng)
        world = transform_point(inst.pose, local)
        initial.append(world)
        final.append(world)
        labels.extend(["base"] * cnt)
    cloud0 = PointCloud(np.vstack(initial), tuple(labels))
    cloud1 = PointCloud(np.vstack(final), tuple(labels))
    return CloudPair(cloud0, cloud1, correspondence=True)


def augment_pair(pair: CloudPair, noise: NoiseConfig, seed) -> CloudPair:
    """Corrupt a corresponding pair while keeping index correspondence.

    Dropout removes the same material points from both frames; jitter is
    independent per frame (sensor noise); outliers are static clutter placed
    identically in both frames before jitter.
    """
    if not pair.correspondence:
        raise ValueError("augment_pair requires a corresponding pair")
    rng = np.random.default_rng(seed)
    p0, p1 = pair.initial.points, pair.final.points
    labels = list(pair.initial.labels) if pair.initial.labels is not None else None
    n = p0.shape[0]

    if noise.dropout > 0.0:
        n_drop = int(round(n * noise.dropout))
        keep = np.sort(rng.permutation(n)[: n - n_drop])
        p0, p1 = p0[keep], p1[keep]
        if labels is not None:
            labels = [labels[i] for i in keep]

    if noise.outliers > 0.0:
        n_out = int(round(n * noise.outliers))
        lo = np.minimum(p0.min(axis=0), p1.min(axis=0))
        hi = np.maximum(p0.max(axis=0), p1.max(axis=0))
        center, half = (lo + hi) / 2.0, (hi - lo) / 2.0
        extra = center + rng.uniform(-1.0, 1.0, size=(n_out, 3)) * (1.5 * half)
        p0 = np.vstack([p0, extra])
        p1 = np.vstack([p1, extra])
        if labels is not None:
            labels.extend(["outlier"] * n_out)

    sigma = noise.sigma_rel * PointCloud(p0).bounding_radius()
    if sigma > 0.0:
        p0 = p0 + rng.normal(0.0, sigma, size=p0.shape)
        p1 = p1 + rng.normal(0.0, sigma, size=p1.shape)

    lab = tuple(labels) if labels is not None else None
    return CloudPair(PointCloud(p0, lab), PointCloud(p1, lab), correspondence=True)
