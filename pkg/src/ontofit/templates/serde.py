"""Instance (de)serialization: human-readable JSON with full-precision floats.

Floats are written with 17 significant digits so parsing reproduces every
field bit-for-bit.  Parsing validates the template id, the parameter bounds
and the pose matrix, raising :class:`~ontofit.errors.ParseError` with field
context.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import OntofitError, ParamBoundsError, ParseError, UnknownTemplateError
from ..geometry import Pose
from .instance import Instance
from .registry import get_template


def format_float(v: float) -> str:
    return f"{float(v):.17g}"


def serialize_instance(inst: Instance) -> str:
    tpl = inst.template
    params = ",\n".join(
        f'    "{name}": {format_float(v)}'
        for name, v in zip(tpl.schema.names, inst.params)
    )
    pose_entries = ", ".join(format_float(v) for v in inst.pose.as_affine().ravel())
    return (
        "{\n"
        f'  "template": "{inst.template_id}",\n'
        '  "params": {\n'
        f"{params}\n"
        "  },\n"
        f'  "pose": [{pose_entries}]\n'
        "}\n"
    )


def parse_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return instance_from_dict(doc)


def instance_from_dict(doc) -> Instance:
    if not isinstance(doc, dict):
        raise ParseError("instance document must be an object")
    for key in ("template", "params", "pose"):
        if key not in doc:
            raise ParseError(f"missing field {key!r}")
    template_id = doc["template"]
    try:
        tpl = get_template(template_id)
    except UnknownTemplateError:
        raise ParseError(f"field 'template': unknown template id {template_id!r}") from None

    raw = doc["params"]
    if not isinstance(raw, dict):
        raise ParseError("field 'params': must be an object of name -> value")
    params = []
    for name in tpl.schema.names:
        if name not in raw:
            raise ParseError(f"field 'params.{name}': missing")
        try:
            params.append(float(raw[name]))
        except (TypeError, ValueError):
            raise ParseError(f"field 'params.{name}': not a number") from None
    extra = set(raw) - set(tpl.schema.names)
    if extra:
        raise ParseError(f"field 'params': unknown names {sorted(extra)}")

    pose_entries = doc["pose"]
    if not isinstance(pose_entries, list) or len(pose_entries) != 16:
        raise ParseError("field 'pose': must be a list of 16 affine entries")
    try:
        mat = np.array([float(v) for v in pose_entries], dtype=float).reshape(4, 4)
    except (TypeError, ValueError):
        raise ParseError("field 'pose': entries must be numbers") from None
    try:
        pose = Pose.from_affine(mat)
    except OntofitError as exc:
        raise ParseError(f"field 'pose': {exc}") from exc

    try:
        return Instance(template_id, np.array(params), pose)
    except ParamBoundsError as exc:
        raise ParseError(f"field 'params': {exc}") from exc


def instance_to_dict(inst: Instance) -> dict:
    """Plain-dict form used inside manifests and reports."""
    tpl = inst.template
    return {
        "template": inst.template_id,
        "params": {n: float(v) for n, v in zip(tpl.schema.names, inst.params)},
        "pose": [float(v) for v in inst.pose.as_affine().ravel()],
    }
