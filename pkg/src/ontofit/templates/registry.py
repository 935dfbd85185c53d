"""The built-in template registry.

Registry order is part of the public contract: identification ties break
toward the earlier entry.
"""

from __future__ import annotations

from ..errors import UnknownTemplateError
from .base import Template
from .composites import Handle, Lever
from .kinematic import Prismatic, Revolute
from .primitives import Cuboid, Cylinder, Ring

_REGISTRY: tuple[Template, ...] = (
    Cuboid(),
    Cylinder(),
    Ring(),
    Revolute(),
    Prismatic(),
    Handle(),
    Lever(),
)
_BY_ID = {t.id: t for t in _REGISTRY}


def builtin_registry() -> tuple[Template, ...]:
    return _REGISTRY


def get_template(template_id: str) -> Template:
    try:
        return _BY_ID[template_id]
    except KeyError:
        raise UnknownTemplateError(template_id) from None


def registry_index(template_id: str) -> int:
    for i, t in enumerate(_REGISTRY):
        if t.id == template_id:
            return i
    raise UnknownTemplateError(template_id)


def geometric_templates() -> tuple[Template, ...]:
    return tuple(t for t in _REGISTRY if t.kind == "geometric")


def basic_geometric_templates() -> tuple[Template, ...]:
    return tuple(
        t for t in _REGISTRY if t.kind == "geometric" and not t.children(t.schema.lower)
    )
