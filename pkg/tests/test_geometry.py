import numpy as np
import pytest

from ontofit import dual as dm
from ontofit.errors import GeometryError
from ontofit.geometry import (
    Pose,
    axis_angle_to_matrix,
    compose,
    identity,
    matrix_to_axis_angle,
    random_pose,
    random_rotation,
    rotation_about_line,
    rotation_entries,
    rotation_x,
    rotation_y,
    rotation_z,
    transform_point,
)
from conftest import pose_allclose


def test_pose_invariants(rng):
    for _ in range(50):
        p = random_pose(rng)
        r = p.rotation
        assert np.max(np.abs(r @ r.T - np.eye(3))) < 1e-9
        assert abs(np.linalg.det(r) - 1.0) < 1e-9
        assert np.allclose(p.as_affine()[3], [0, 0, 0, 1])
        assert pose_allclose(compose(p, p.inverse()), identity(), 1e-9)
        assert pose_allclose(p.inverse().inverse(), p, 1e-9)


def test_compose_identity_and_matrix_product(rng):
    p = random_pose(rng)
    assert pose_allclose(compose(identity(), p), p, 0.0)
    q = random_pose(rng)
    assert np.allclose(compose(p, q).as_affine(), p.as_affine() @ q.as_affine(),
                       atol=1e-12)
    # two quarter turns equal a half turn
    quarter = Pose(rotation_z(np.pi / 2.0))
    half = compose(quarter, quarter)
    assert np.allclose(half.rotation, rotation_z(np.pi), atol=1e-12)


def test_compose_associative(rng):
    for _ in range(100):
        a, b, c = (random_pose(rng) for _ in range(3))
        lhs = compose(compose(a, b), c)
        rhs = compose(a, compose(b, c))
        assert pose_allclose(lhs, rhs, 1e-9)


def test_transform_point_examples():
    assert np.allclose(transform_point(identity(), [1, 2, 3]), [1, 2, 3])
    shift = Pose(np.eye(3), [1, 0, 0])
    assert np.allclose(transform_point(shift, [0, 0, 0]), [1, 0, 0])
    quarter = Pose(rotation_z(np.pi / 2.0))
    assert np.allclose(transform_point(quarter, [1, 0, 0]), [0, 1, 0], atol=1e-12)


def test_transform_point_batch(rng):
    p = random_pose(rng)
    pts = rng.normal(size=(17, 3))
    batch = transform_point(p, pts)
    single = np.stack([transform_point(p, x) for x in pts])
    assert np.allclose(batch, single, atol=1e-14)


def test_from_affine_validates():
    with pytest.raises(GeometryError):
        Pose.from_affine(np.diag([1.0, 1.0, 1.0, 2.0]))
    bad = np.eye(4)
    bad[:3, :3] = 2.0 * np.eye(3)
    with pytest.raises(GeometryError):
        Pose.from_affine(bad)


def test_axis_angle_round_trip(rng):
    for _ in range(200):
        w = rng.normal(size=3)
        w = w / np.linalg.norm(w) * rng.uniform(1e-8, np.pi - 1e-6)
        r = axis_angle_to_matrix(w)
        assert np.allclose(matrix_to_axis_angle(r), w, atol=1e-7)
    # near zero and near pi
    assert np.allclose(matrix_to_axis_angle(np.eye(3)), np.zeros(3))
    r = axis_angle_to_matrix(np.array([0.0, 0.0, np.pi]))
    w = matrix_to_axis_angle(r)
    assert abs(np.linalg.norm(w) - np.pi) < 1e-6
    assert np.allclose(axis_angle_to_matrix(w), r, atol=1e-9)


def test_basic_rotations_match_exponential_map():
    for builder, axis in ((rotation_x, [1, 0, 0]), (rotation_y, [0, 1, 0]),
                          (rotation_z, [0, 0, 1])):
        for ang in (0.3, -1.2, 2.9):
            assert np.allclose(builder(ang),
                               axis_angle_to_matrix(np.array(axis) * ang),
                               atol=1e-12)


def test_rotation_entries_dual_gradient(rng):
    # every entry of the exponential map has correct dual partials
    for _ in range(20):
        w = rng.normal(size=3) * rng.choice([0.3, 2.0])
        for idx in range(9):
            err = dm.grad_check(
                lambda p, idx=idx: rotation_entries(p[0], p[1], p[2])[idx],
                w, h=1e-6,
            )
            assert err < 1e-5


def test_rotation_entries_gradient_at_identity():
    # the Taylor branch: dR/dw_i at w = 0 is the skew generator of axis i
    entries = rotation_entries(*dm.seed([0.0, 0.0, 0.0]))
    grads = np.array([dm.gradient(e) for e in entries]).T.reshape(3, 3, 3)
    for i in range(3):
        e_i = np.zeros(3)
        e_i[i] = 1.0
        k = np.array([[0, -e_i[2], e_i[1]], [e_i[2], 0, -e_i[0]],
                      [-e_i[1], e_i[0], 0]])
        assert np.allclose(grads[i], k, atol=1e-12)


def test_rotation_about_line():
    pose = rotation_about_line([0, 0, 1], [1, 0, 0], np.pi / 2.0)
    # the pivot stays fixed
    assert np.allclose(transform_point(pose, [1, 0, 0]), [1, 0, 0], atol=1e-12)
    assert np.allclose(transform_point(pose, [2, 0, 0]), [1, 1, 0], atol=1e-12)
    with pytest.raises(GeometryError):
        rotation_about_line([0, 0, 0], [0, 0, 0], 1.0)


def test_random_rotation_uniform_determinant(rng):
    for _ in range(20):
        r = random_rotation(rng)
        assert abs(np.linalg.det(r) - 1.0) < 1e-12
        assert np.max(np.abs(r @ r.T - np.eye(3))) < 1e-12
