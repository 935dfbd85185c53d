"""Kinematic joint templates: revolute and prismatic.

These templates have no surface; their payload is a force-direction
affordance derived from the joint geometry.  Axis directions are stored as
yaw/pitch angles so every schema entry is an independent box-bounded scalar.
"""

from __future__ import annotations

import numpy as np

from ..errors import OntofitError, UnknownAffordanceError
from .base import (
    ANGLE,
    Affordance,
    KinematicParams,
    LENGTH,
    ParamEntry,
    ParamSchema,
    Template,
    kinematic_force_direction,
)


def direction_from_angles(yaw: float, pitch: float) -> np.ndarray:
    cp = np.cos(pitch)
    return np.array([cp * np.cos(yaw), cp * np.sin(yaw), np.sin(pitch)])


class _Kinematic(Template):
    kind = "kinematic"

    def structure(self, params, x, y, z):
        raise OntofitError(f"{self.id!r} is a kinematic template; it has no surface")

    distance = structure

    def to_joint(self, params) -> KinematicParams:
        raise NotImplementedError

    def grasp(self, params, affordance_id, selector, max_width=None):
        raise UnknownAffordanceError(affordance_id)

    def force_field(self, params, affordance_id):
        if affordance_id != "drive":
            raise UnknownAffordanceError(affordance_id)
        joint = self.to_joint(params)
        return lambda pts: kinematic_force_direction(joint, pts)


class Revolute(_Kinematic):
    id = "revolute"
    schema = ParamSchema(
        (
            ParamEntry("yaw", -np.pi, np.pi, ANGLE),
            ParamEntry("pitch", -np.pi / 2.0, np.pi / 2.0, ANGLE),
            ParamEntry("pivot_x", -10.0, 10.0, LENGTH),
            ParamEntry("pivot_y", -10.0, 10.0, LENGTH),
            ParamEntry("pivot_z", -10.0, 10.0, LENGTH),
            ParamEntry("span", 0.01, 2.0 * np.pi, ANGLE),
        )
    )
    affordances = (Affordance("drive", "force"),)

    def to_joint(self, params) -> KinematicParams:
        yaw, pitch, px, py, pz, span = (float(v) for v in params)
        return KinematicParams(
            "revolute",
            direction_from_angles(yaw, pitch),
            np.array([px, py, pz]),
            (0.0, span),
        )


class Prismatic(_Kinematic):
    id = "prismatic"
    schema = ParamSchema(
        (
            ParamEntry("yaw", -np.pi, np.pi, ANGLE),
            ParamEntry("pitch", -np.pi / 2.0, np.pi / 2.0, ANGLE),
            ParamEntry("span", 0.01, 10.0, LENGTH),
        )
    )
    affordances = (Affordance("drive", "force"),)

    def to_joint(self, params) -> KinematicParams:
        yaw, pitch, span = (float(v) for v in params)
        return KinematicParams(
            "prismatic", direction_from_angles(yaw, pitch), np.zeros(3), (0.0, span)
        )
