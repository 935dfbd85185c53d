"""Template instances and the operations that use them in world coordinates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NoAffordanceError
from ..geometry import Pose, compose, transform_point
from .base import DEFAULT_MAX_GRIP_WIDTH, Grasp, Template
from .registry import get_template


@dataclass(frozen=True, eq=False)
class Instance:
    """A template id plus concrete parameters and a world pose."""

    template_id: str
    params: np.ndarray
    pose: Pose

    def __post_init__(self):
        tpl = get_template(self.template_id)
        p = tpl.schema.validate(self.params)
        p.setflags(write=False)
        object.__setattr__(self, "params", p)
        if not self.pose.is_valid(tol=1e-6):
            raise ValueError(f"invalid pose for instance of {self.template_id!r}")

    @property
    def template(self) -> Template:
        return get_template(self.template_id)


def _local_coords(inst: Instance, x: np.ndarray):
    inv = inst.pose.inverse()
    pts = transform_point(inv, np.asarray(x, dtype=float))
    if pts.ndim == 1:
        return pts[0], pts[1], pts[2], True
    return pts[:, 0], pts[:, 1], pts[:, 2], False


def eval_structure(inst: Instance, x: np.ndarray):
    """Implicit structure value at world point(s): negative inside, zero on
    the surface, positive outside.  Composites take the min over children."""
    lx, ly, lz, single = _local_coords(inst, x)
    out = inst.template.structure(inst.params, lx, ly, lz)
    return float(out) if single else np.asarray(out)


def surface_distance(inst: Instance, x: np.ndarray):
    """Signed (basic) or unsigned (composite) exact distance to the surface."""
    lx, ly, lz, single = _local_coords(inst, x)
    out = inst.template.distance(inst.params, lx, ly, lz)
    return float(out) if single else np.asarray(out)


def ground_affordance(inst: Instance, affordance_id: str, selector: float = 0.5,
                      max_width: float = DEFAULT_MAX_GRIP_WIDTH):
    """Map a template-local affordance into world coordinates.

    Grasp affordances return a world-frame :class:`Grasp` (or None when the
    gripper cannot open wide enough); force affordances return a callable
    mapping world points to world unit force directions.
    """
    tpl = inst.template
    kinds = {a.id: a.kind for a in tpl.affordances}
    if affordance_id not in kinds:
        from ..errors import UnknownAffordanceError

        raise UnknownAffordanceError(affordance_id)
    if kinds[affordance_id] == "grasp":
        local = tpl.grasp(inst.params, affordance_id, selector, max_width)
        if local is None:
            return None
        return Grasp(
            compose(inst.pose, local.pose),
            local.width,
            inst.pose.rotation @ local.grip_axis,
        )
    field = tpl.force_field(inst.params, affordance_id)
    inv = inst.pose.inverse()
    rot = inst.pose.rotation

    def world_field(x):
        local_pts = transform_point(inv, np.asarray(x, dtype=float))
        d = field(local_pts)
        return d @ rot.T if d.ndim == 2 else rot @ d

    return world_field


def grounded_grasps(inst: Instance, selectors, max_width=DEFAULT_MAX_GRIP_WIDTH):
    """All feasible world grasps over a selector grid: (affordance id,
    selector, Grasp) triples.  Raises when nothing is feasible."""
    out = []
    for aff in inst.template.affordances:
        if aff.kind != "grasp":
            continue
        for s in selectors:
            g = ground_affordance(inst, aff.id, float(s), max_width)
            if g is not None:
                out.append((aff.id, float(s), g))
    if not out:
        raise NoAffordanceError(
            f"no feasible grasp on {inst.template_id!r} at max width {max_width}"
        )
    return out


def canonicalize(inst: Instance) -> Instance:
    """Unique representative of the instances describing the same point set."""
    params, pose = inst.template.canonical(inst.params, inst.pose)
    return Instance(inst.template_id, params, pose)
