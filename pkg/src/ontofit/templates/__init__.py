"""Concept template registry: basic and composite geometric templates,
kinematic joint templates, world-coordinate evaluation and affordance
grounding, symmetry canonicalization, and instance serialization."""

from .base import (
    ANGLE,
    DEFAULT_MAX_GRIP_WIDTH,
    LENGTH,
    UNITLESS,
    Affordance,
    Grasp,
    KinematicParams,
    ParamEntry,
    ParamSchema,
    Template,
    kinematic_force_direction,
)
from .instance import (
    Instance,
    canonicalize,
    eval_structure,
    ground_affordance,
    grounded_grasps,
    surface_distance,
)
from .registry import (
    basic_geometric_templates,
    builtin_registry,
    geometric_templates,
    get_template,
    registry_index,
)
from .serde import (
    instance_from_dict,
    instance_to_dict,
    parse_instance,
    serialize_instance,
)

__all__ = [
    "ANGLE",
    "DEFAULT_MAX_GRIP_WIDTH",
    "LENGTH",
    "UNITLESS",
    "Affordance",
    "Grasp",
    "Instance",
    "KinematicParams",
    "ParamEntry",
    "ParamSchema",
    "Template",
    "basic_geometric_templates",
    "builtin_registry",
    "canonicalize",
    "eval_structure",
    "geometric_templates",
    "get_template",
    "ground_affordance",
    "grounded_grasps",
    "instance_from_dict",
    "instance_to_dict",
    "kinematic_force_direction",
    "parse_instance",
    "registry_index",
    "serialize_instance",
    "surface_distance",
]
