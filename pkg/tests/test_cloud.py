import numpy as np
import pytest

from ontofit.cloud import (
    CloudPair,
    PointCloud,
    TriMesh,
    merge_meshes,
    read_obj,
    read_ply,
    write_obj,
    write_ply,
)
from ontofit.errors import ParseError


def test_ply_round_trip_bitwise(tmp_path, rng):
    pts = rng.normal(size=(257, 3))
    path = tmp_path / "c.ply"
    write_ply(path, PointCloud(pts))
    back = read_ply(path)
    assert np.array_equal(back.points, pts)


def test_ply_write_deterministic(tmp_path, rng):
    pts = rng.normal(size=(64, 3))
    a, b = tmp_path / "a.ply", tmp_path / "b.ply"
    write_ply(a, PointCloud(pts))
    write_ply(b, PointCloud(pts))
    assert a.read_bytes() == b.read_bytes()


def test_truncated_ply_rejected(tmp_path, rng):
    path = tmp_path / "c.ply"
    write_ply(path, PointCloud(rng.normal(size=(50, 3))))
    blob = path.read_bytes()
    path.write_bytes(blob[:-16])
    with pytest.raises(ParseError, match="truncated"):
        read_ply(path)


def test_non_ply_rejected(tmp_path):
    path = tmp_path / "c.ply"
    path.write_bytes(b"hello world")
    with pytest.raises(ParseError):
        read_ply(path)


def test_obj_round_trip(tmp_path):
    mesh = TriMesh(
        np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]),
        np.array([[0, 1, 2], [0, 1, 3]]),
    )
    path = tmp_path / "m.obj"
    write_obj(path, mesh)
    back = read_obj(path)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)


def test_cloud_invariants(rng):
    with pytest.raises(ValueError):
        PointCloud(np.array([[np.nan, 0, 0]]))
    with pytest.raises(ValueError):
        PointCloud(np.ones((3, 3)), labels=("a",))
    with pytest.raises(ValueError):
        CloudPair(PointCloud(np.ones((3, 3))), PointCloud(np.ones((4, 3))),
                  correspondence=True)


def test_mesh_area_and_transform(rng):
    tri = TriMesh(np.array([[0.0, 0, 0], [2, 0, 0], [0, 2, 0]]),
                  np.array([[0, 1, 2]]))
    assert tri.area() == pytest.approx(2.0)
    from ontofit.geometry import random_pose

    pose = random_pose(rng)
    moved = tri.transformed(pose)
    assert moved.area() == pytest.approx(2.0)


def test_merge_meshes_offsets_indices():
    a = TriMesh(np.eye(3), np.array([[0, 1, 2]]))
    b = TriMesh(np.eye(3) * 2.0, np.array([[0, 1, 2]]))
    merged = merge_meshes([a, b], ["a", "b"])
    assert merged.vertices.shape == (6, 3)
    assert np.array_equal(merged.triangles[1], [3, 4, 5])
    assert merged.labels == ("a", "b")
