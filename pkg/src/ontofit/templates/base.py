"""Core template/instance types shared by all concept templates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DegeneratePointError, ParamBoundsError
from ..geometry import Pose

# Parallel-jaw opening limit used by grasp feasibility checks (scene units).
DEFAULT_MAX_GRIP_WIDTH = 0.08

LENGTH = "length"
ANGLE = "angle"
UNITLESS = "unitless"


@dataclass(frozen=True)
class ParamEntry:
    name: str
    lower: float
    upper: float
    unit: str = LENGTH

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"parameter {self.name!r}: lower bound must be < upper")


@dataclass(frozen=True)
class ParamSchema:
    entries: tuple[ParamEntry, ...]

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names: {names}")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    @property
    def lower(self) -> np.ndarray:
        return np.array([e.lower for e in self.entries])

    @property
    def upper(self) -> np.ndarray:
        return np.array([e.upper for e in self.entries])

    def validate(self, params) -> np.ndarray:
        p = np.asarray(params, dtype=float).reshape(-1)
        if p.shape[0] != len(self.entries):
            raise ParamBoundsError(
                f"expected {len(self.entries)} parameters, got {p.shape[0]}"
            )
        for entry, v in zip(self.entries, p):
            if not np.isfinite(v) or v < entry.lower or v > entry.upper:
                raise ParamBoundsError(
                    f"parameter {entry.name!r}={v} outside bounds "
                    f"[{entry.lower}, {entry.upper}]"
                )
        return p

    def project(self, params) -> np.ndarray:
        """Clip a raw vector into the bounds box (used by the optimizer)."""
        return np.clip(np.asarray(params, dtype=float), self.lower, self.upper)


@dataclass(frozen=True)
class Grasp:
    """Local-frame parallel-jaw grasp.

    ``pose.rotation[:, 2]`` is the grip axis (the fingers close along it),
    ``width`` is the required opening.
    """

    pose: Pose
    width: float
    grip_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))


@dataclass(frozen=True)
class Affordance:
    """Interaction-site generator attached to a template.

    ``kind`` is "grasp" (selector in [0, 1] -> local Grasp, or None when the
    gripper cannot open wide enough) or "force" (params -> local unit
    direction field).
    """

    id: str
    kind: str  # "grasp" | "force"


@dataclass(frozen=True)
class KinematicParams:
    """One-DOF joint: revolute (axis, pivot, angle range) or prismatic."""

    kind: str  # "revolute" | "prismatic"
    axis: np.ndarray
    pivot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        u = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(u)
        if abs(n - 1.0) > 1e-9:
            if n < 1e-12:
                raise ValueError("joint axis must be a nonzero vector")
            u = u / n
        p = np.asarray(self.pivot, dtype=float).reshape(3)
        u.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "axis", u)
        object.__setattr__(self, "pivot", p)
        object.__setattr__(self, "range", (float(self.range[0]), float(self.range[1])))
        if self.kind not in ("revolute", "prismatic"):
            raise ValueError(f"unknown joint kind {self.kind!r}")
        if not self.range[0] < self.range[1]:
            raise ValueError("joint range must satisfy lo < hi")

    @property
    def span(self) -> float:
        return self.range[1] - self.range[0]

    def displacement(self, value: float) -> Pose:
        """Rigid transform moving the part from joint value 0 to ``value``."""
        from ..geometry import rotation_about_line, translation_along

        if self.kind == "revolute":
            return rotation_about_line(self.axis, self.pivot, value)
        return translation_along(self.axis, value)


def kinematic_force_direction(joint: KinematicParams, x: np.ndarray) -> np.ndarray:
    """Unit force direction producing positive joint motion at point(s) x.

    Revolute points must be off the axis line (distance > 1e-9).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x.reshape(-1, 3)
    if joint.kind == "prismatic":
        out = np.broadcast_to(joint.axis, pts.shape).copy()
    else:
        rel = pts - joint.pivot
        tang = np.cross(joint.axis, rel)
        norms = np.linalg.norm(tang, axis=1)
        if np.any(norms <= 1e-9):
            raise DegeneratePointError("query point lies on the revolute axis")
        out = tang / norms[:, None]
    return out[0] if single else out


class Template:
    """A parameterized, differentiable concept template.

    Subclasses define the implicit structure formula, an exact surface
    distance, surface sampling, meshing, a moment-based fit initializer,
    affordance generators and a symmetry canonicalization.  Geometric
    formulas accept dual inputs for params and coordinates.
    """

    id: str = ""
    kind: str = "geometric"  # "geometric" | "kinematic"
    schema: ParamSchema
    affordances: tuple[Affordance, ...] = ()

    # (child template id, child params fn, relative pose fn); empty for basics
    def children(self, params):
        return []

    @property
    def n_params(self) -> int:
        return len(self.schema)

    # -- structure ---------------------------------------------------------

    def structure(self, params, x, y, z):
        """Implicit formula: negative inside, zero on surface, positive outside."""
        raise NotImplementedError

    def distance(self, params, x, y, z):
        """Exact signed Euclidean distance to the surface (local frame)."""
        raise NotImplementedError

    # -- rendering hooks -----------------------------------------------------

    def surface_area(self, params) -> float:
        raise NotImplementedError

    def sample_local(self, params, n: int, rng: np.random.Generator):
        """n exact surface points, area-uniform; returns (points, labels|None)."""
        raise NotImplementedError

    def coverage_draws(self, n: int, rng: np.random.Generator):
        """Parameter-independent random draws reused across loss evaluations."""
        raise NotImplementedError

    def coverage_points(self, params, draws):
        """Map fixed draws to on-surface points, differentiable in params."""
        raise NotImplementedError

    def mesh_local(self, params, resolution: int = 64):
        raise NotImplementedError

    # -- fitting hooks -------------------------------------------------------

    def moment_init(self, points: np.ndarray):
        """First (params, Pose) guess from cloud moments."""
        raise NotImplementedError

    def refine_groups(self) -> list[np.ndarray]:
        """Parameter-index groups refined one child at a time (composites)."""
        return []

    # -- affordances ---------------------------------------------------------

    def grasp(self, params, affordance_id: str, selector: float,
              max_width: float = DEFAULT_MAX_GRIP_WIDTH):
        raise NotImplementedError

    def force_field(self, params, affordance_id: str):
        raise NotImplementedError

    # -- symmetry --------------------------------------------------------------

    def canonical(self, params: np.ndarray, pose: Pose):
        """Canonical (params, pose) describing the identical point set."""
        return params, pose
