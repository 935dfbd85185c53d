"""ontofit: differentiable geometric and kinematic concept templates.

Define parameterized implicit-surface templates with interaction
affordances, render them to point clouds and meshes, recover template
parameters from raw clouds by multi-start optimization, estimate joints
from motion pairs, and run the closed-loop discovery benchmark.
"""

__version__ = "0.1.0"

from . import cloud, dual, geometry, templates  # noqa: F401
from .cloud import CloudPair, PointCloud, TriMesh  # noqa: F401
from .geometry import Pose, compose, transform_point  # noqa: F401
from .templates import (  # noqa: F401
    Instance,
    KinematicParams,
    builtin_registry,
    canonicalize,
    eval_structure,
    get_template,
    ground_affordance,
    parse_instance,
    serialize_instance,
)
