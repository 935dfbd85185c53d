"""Composite templates built by union of posed basic primitives.

A composite shares one parameter vector across its children: the child
placement rules and any derived child parameters are functions of that
vector, so the whole shape stays differentiable in it.  The implicit value
of a composite is the min over its children (set union).
"""

from __future__ import annotations

import numpy as np

from .. import dual as dm
from ..cloud import TriMesh, merge_meshes
from ..errors import UnknownAffordanceError
from ..geometry import Pose, compose, rotation_x, rotation_y
from .base import DEFAULT_MAX_GRIP_WIDTH, Affordance, ParamSchema, Template
from .primitives import (
    Cuboid,
    Cylinder,
    Ring,
    _half_ranges,
    _length_entry,
    principal_frame,
    _right_handed,
)

_CUBOID = Cuboid()
_CYLINDER = Cylinder()
_RING = Ring()


def proportional_counts(weights, n: int) -> np.ndarray:
    """Deterministic largest-remainder split of n into len(weights) parts."""
    w = np.asarray(weights, dtype=float)
    raw = w / w.sum() * n
    counts = np.floor(raw).astype(int)
    remainder = n - int(counts.sum())
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:remainder]] += 1
    return counts


def _scalar(v) -> float:
    return float(dm.value_of(v)[0]) if isinstance(v, dm.Dual) else float(v)


class _Composite(Template):
    """Shared machinery: sampling, meshing and coverage via the child list."""

    # local rotations (besides identity) mapping the composite onto itself
    extra_symmetries: tuple[np.ndarray, ...] = ()

    def child_templates(self):
        raise NotImplementedError

    def children(self, params):
        """[(template, child params, relative Pose)] for plain float params."""
        raise NotImplementedError

    def surface_area(self, params) -> float:
        return float(
            sum(t.surface_area(p) for t, p, _ in self.children(params))
        )

    def sample_local(self, params, n, rng):
        kids = self.children(params)
        counts = proportional_counts(
            [t.surface_area(p) for t, p, _ in kids], n
        )
        pts, labels = [], []
        for (tpl, p, rel), cnt in zip(kids, counts):
            if cnt == 0:
                continue
            local, _ = tpl.sample_local(p, cnt, rng)
            pts.append(local @ rel.rotation.T + rel.translation)
            labels.extend([tpl.id] * cnt)
        return np.vstack(pts), tuple(labels)

    def mesh_local(self, params, resolution: int = 64) -> TriMesh:
        kids = self.children(params)
        meshes = [
            tpl.mesh_local(p, resolution).transformed(rel) for tpl, p, rel in kids
        ]
        return merge_meshes(meshes, [tpl.id for tpl, _, _ in kids])

    def coverage_draws(self, n, rng):
        alloc = rng.random(n)
        return alloc, tuple(t.coverage_draws(n, rng) for t in self.child_templates())

    def _child_areas(self, params):
        vals = [_scalar(p) for p in params]
        return np.array([t.surface_area(p) for t, p, _ in self.children(vals)])

    def coverage_points(self, params, draws):
        alloc, child_draws = draws
        areas = self._child_areas(params)
        cdf = np.cumsum(areas)
        cdf /= cdf[-1]
        which = np.searchsorted(cdf, alloc, side="right")
        coords = self._child_coverage(params, child_draws)
        x, y, z = coords[0]
        for i in range(1, len(coords)):
            m = which == i
            x = dm.where(m, coords[i][0], x)
            y = dm.where(m, coords[i][1], y)
            z = dm.where(m, coords[i][2], z)
        return x, y, z

    def _child_coverage(self, params, child_draws):
        """Per-child coverage points mapped into the composite frame (dual)."""
        raise NotImplementedError

    def canonical(self, params, pose):
        best_key, best = None, pose.rotation
        for g in (np.eye(3),) + self.extra_symmetries:
            r = pose.rotation @ g
            key = tuple(np.round(r, 12).ravel())
            if best_key is None or key > best_key:
                best_key, best = key, r
        return np.asarray(params, dtype=float), Pose(best, pose.translation)


class Handle(_Composite):
    """Ring mounted tangent to the top cap of a cylindrical stem.

    Parameters: ring major radius, shared tube/stem radius, stem half-length.
    The ring lies in the local x-z plane, tangent to the stem cap at
    (0, 0, stem_half_length).
    """

    id = "handle"
    kind = "geometric"
    schema = ParamSchema(
        (
            _length_entry("major_radius"),
            _length_entry("tube_radius"),
            _length_entry("stem_half_length"),
        )
    )
    affordances = (Affordance("loop_pinch", "grasp"), Affordance("stem_pinch", "grasp"))
    extra_symmetries = (np.diag([-1.0, -1.0, 1.0]),)  # pi about the stem axis

    def child_templates(self):
        return (_RING, _CYLINDER)

    def _ring_offset(self, params):
        big_r, tube, stem = params
        return stem + big_r + tube

    def children(self, params):
        big_r, tube, stem = (float(v) for v in params)
        ring_pose = Pose(rotation_x(np.pi / 2.0), [0.0, 0.0, stem + big_r + tube])
        return [
            (_RING, np.array([big_r, tube]), ring_pose),
            (_CYLINDER, np.array([tube, stem]), Pose()),
        ]

    def structure(self, params, x, y, z):
        big_r, tube, stem = params
        offset = self._ring_offset(params)
        f_ring = _RING.structure((big_r, tube), x, z - offset, -y)
        f_stem = _CYLINDER.structure((tube, stem), x, y, z)
        return dm.minimum(f_ring, f_stem)

    def distance(self, params, x, y, z):
        big_r, tube, stem = params
        offset = self._ring_offset(params)
        d_ring = dm.absolute(_RING.distance((big_r, tube), x, z - offset, -y))
        d_stem = dm.absolute(_CYLINDER.distance((tube, stem), x, y, z))
        return dm.minimum(d_ring, d_stem)

    def _child_coverage(self, params, child_draws):
        big_r, tube, stem = params
        offset = self._ring_offset(params)
        rx, ry, rz = _RING.coverage_points((big_r, tube), child_draws[0])
        ring = (rx, -rz, ry + offset)  # Rx(90) then translate along z
        cyl = _CYLINDER.coverage_points((tube, stem), child_draws[1])
        return [ring, cyl]

    def moment_init(self, points):
        mu, evals, axes, degenerate = principal_frame(points)
        if degenerate:
            half = _half_ranges(points, np.eye(3))
            size = float(np.max(half))
            params = self.schema.project([0.45 * size, 0.1 * size, 0.45 * size])
            return params, Pose(np.eye(3), mu), True
        z_axis = axes[:, 2]
        centered = points - mu
        proj = centered @ z_axis
        perp = np.linalg.norm(centered - proj[:, None] * z_axis, axis=1)
        hi, lo = proj > np.percentile(proj, 60), proj < np.percentile(proj, 40)
        if perp[lo].mean() > perp[hi].mean():
            z_axis = -z_axis
            proj = -proj
        rot = _right_handed(axes[:, 1], z_axis)
        span = (proj.max() - proj.min()) / 2.0
        stem = 0.45 * span
        big_r = 0.45 * span
        tube = 0.10 * span
        translation = mu + (proj.min() + stem) * z_axis
        params = self.schema.project([big_r, tube, stem])
        return params, Pose(rot, translation), False

    def refine_groups(self):
        return [np.array([0, 1]), np.array([1, 2])]

    def grasp(self, params, affordance_id, selector,
              max_width=DEFAULT_MAX_GRIP_WIDTH):
        big_r, tube, stem = (float(v) for v in params)
        kids = dict(loop_pinch=0, stem_pinch=1)
        if affordance_id not in kids:
            raise UnknownAffordanceError(affordance_id)
        tpl, child_params, rel = self.children(params)[kids[affordance_id]]
        inner = tpl.grasp(child_params, tpl.affordances[0].id, selector, max_width)
        if inner is None:
            return None
        lifted = compose(rel, inner.pose)
        return type(inner)(lifted, inner.width, rel.rotation @ inner.grip_axis)

    def force_field(self, params, affordance_id):
        raise UnknownAffordanceError(affordance_id)


class Lever(_Composite):
    """Cuboid plate with a cylindrical arm through the +x face center.

    Parameters: plate half-extents a, b, c and arm half-length; the arm
    radius is tied to half the plate's thinnest cross extent.
    """

    id = "lever"
    kind = "geometric"
    schema = ParamSchema(
        (
            _length_entry("a"),
            _length_entry("b"),
            _length_entry("c"),
            _length_entry("arm_half_length"),
        )
    )
    affordances = (Affordance("plate_pinch", "grasp"), Affordance("knob_pinch", "grasp"))
    extra_symmetries = (np.diag([1.0, -1.0, -1.0]),)  # pi about the arm axis

    def child_templates(self):
        return (_CUBOID, _CYLINDER)

    def children(self, params):
        a, b, c, arm = (float(v) for v in params)
        radius = 0.5 * min(b, c)
        arm_pose = Pose(rotation_y(np.pi / 2.0), [a + arm, 0.0, 0.0])
        return [
            (_CUBOID, np.array([a, b, c]), Pose()),
            (_CYLINDER, np.array([radius, arm]), arm_pose),
        ]

    def structure(self, params, x, y, z):
        a, b, c, arm = params
        radius = dm.minimum(b, c) * 0.5
        f_plate = _CUBOID.structure((a, b, c), x, y, z)
        # Ry(90) child frame: x_c = -z, y_c = y, z_c = x - (a + arm)
        f_arm = _CYLINDER.structure((radius, arm), -z, y, x - (a + arm))
        return dm.minimum(f_plate, f_arm)

    def distance(self, params, x, y, z):
        a, b, c, arm = params
        radius = dm.minimum(b, c) * 0.5
        d_plate = dm.absolute(_CUBOID.distance((a, b, c), x, y, z))
        d_arm = dm.absolute(
            _CYLINDER.distance((radius, arm), -z, y, x - (a + arm))
        )
        return dm.minimum(d_plate, d_arm)

    def _child_coverage(self, params, child_draws):
        a, b, c, arm = params
        radius = dm.minimum(b, c) * 0.5
        plate = _CUBOID.coverage_points((a, b, c), child_draws[0])
        cx, cy, cz = _CYLINDER.coverage_points((radius, arm), child_draws[1])
        arm_pts = (cz + (a + arm), cy, -cx)  # inverse of the child-frame map
        return [plate, arm_pts]

    def moment_init(self, points):
        mu, evals, axes, degenerate = principal_frame(points)
        if degenerate:
            half = _half_ranges(points, np.eye(3))
            params = self.schema.project(
                [0.6 * half[0], half[1], half[2], 0.4 * half[0]]
            )
            return params, Pose(np.eye(3), mu), True
        x_axis = axes[:, 2]
        centered = points - mu
        proj = centered @ x_axis
        perp = np.linalg.norm(centered - proj[:, None] * x_axis, axis=1)
        hi, lo = proj > np.percentile(proj, 75), proj < np.percentile(proj, 25)
        if perp[lo].mean() < perp[hi].mean():
            x_axis = -x_axis
            proj = -proj
        rot = _right_handed(x_axis, axes[:, 0])  # columns: arm dir, -, plate normal
        local = centered @ rot
        span_x = (proj.max() - proj.min()) / 2.0
        a0 = 0.65 * span_x
        arm0 = 0.35 * span_x
        b0 = (local[:, 1].max() - local[:, 1].min()) / 2.0
        c0 = (local[:, 2].max() - local[:, 2].min()) / 2.0
        translation = mu + (proj.min() + a0) * x_axis
        params = self.schema.project([a0, b0, c0, arm0])
        return params, Pose(rot, translation), False

    def refine_groups(self):
        return [np.array([0, 1, 2]), np.array([3])]

    def grasp(self, params, affordance_id, selector,
              max_width=DEFAULT_MAX_GRIP_WIDTH):
        kids = dict(plate_pinch=0, knob_pinch=1)
        if affordance_id not in kids:
            raise UnknownAffordanceError(affordance_id)
        tpl, child_params, rel = self.children(params)[kids[affordance_id]]
        inner = tpl.grasp(child_params, tpl.affordances[0].id, selector, max_width)
        if inner is None:
            return None
        lifted = compose(rel, inner.pose)
        return type(inner)(lifted, inner.width, rel.rotation @ inner.grip_axis)

    def force_field(self, params, affordance_id):
        raise UnknownAffordanceError(affordance_id)
