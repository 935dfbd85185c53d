import json

import numpy as np
import pytest

from ontofit.errors import ParseError
from ontofit.templates import Instance, parse_instance, serialize_instance
from conftest import random_instance


def test_round_trip_bitwise(rng):
    for tid in ("cuboid", "cylinder", "ring", "handle", "lever", "revolute",
                "prismatic"):
        if tid in ("revolute", "prismatic"):
            inst = Instance(tid, _mid_params(tid), _random_valid_pose(rng))
        else:
            inst = random_instance(tid, rng)
        text = serialize_instance(inst)
        back = parse_instance(text)
        assert back.template_id == inst.template_id
        assert np.array_equal(back.params, inst.params)
        assert np.array_equal(back.pose.as_affine(), inst.pose.as_affine())


def _mid_params(tid):
    from ontofit.templates import get_template

    schema = get_template(tid).schema
    return (schema.lower + schema.upper) / 2.0


def _random_valid_pose(rng):
    from ontofit.geometry import random_pose

    return random_pose(rng)


def test_serialized_floats_carry_17_significant_digits(rng):
    inst = random_instance("cuboid", rng)
    text = serialize_instance(inst)
    doc = json.loads(text)
    # re-format through the same rule and compare round trips
    for name, value in doc["params"].items():
        assert float(f"{value:.17g}") == value


def test_out_of_bounds_param_is_a_parse_error():
    text = json.dumps({
        "template": "cuboid",
        "params": {"a": -5.0, "b": 1.0, "c": 1.0},
        "pose": list(np.eye(4).ravel()),
    })
    with pytest.raises(ParseError, match="params"):
        parse_instance(text)


def test_unknown_template_is_a_parse_error():
    text = json.dumps({
        "template": "widget",
        "params": {},
        "pose": list(np.eye(4).ravel()),
    })
    with pytest.raises(ParseError, match="widget"):
        parse_instance(text)


def test_malformed_text_reports_line():
    with pytest.raises(ParseError, match="line"):
        parse_instance("{ not json")


def test_missing_and_extra_params_rejected():
    base = {
        "template": "cuboid",
        "params": {"a": 1.0, "b": 1.0, "c": 1.0},
        "pose": list(np.eye(4).ravel()),
    }
    missing = dict(base, params={"a": 1.0, "b": 1.0})
    with pytest.raises(ParseError, match="params.c"):
        parse_instance(json.dumps(missing))
    extra = dict(base, params=dict(base["params"], d=2.0))
    with pytest.raises(ParseError, match="unknown names"):
        parse_instance(json.dumps(extra))


def test_bad_pose_rejected():
    base = {
        "template": "cuboid",
        "params": {"a": 1.0, "b": 1.0, "c": 1.0},
        "pose": list(np.eye(4).ravel())[:12],
    }
    with pytest.raises(ParseError, match="pose"):
        parse_instance(json.dumps(base))
    skewed = np.eye(4)
    skewed[3, 0] = 0.5
    with pytest.raises(ParseError, match="pose"):
        parse_instance(json.dumps(dict(base, pose=list(skewed.ravel()))))
