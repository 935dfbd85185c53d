import numpy as np
import pytest

from ontofit import dual as dm
from ontofit.errors import (
    DegeneratePointError,
    OntofitError,
    ParamBoundsError,
    UnknownAffordanceError,
    UnknownTemplateError,
)
from ontofit.geometry import Pose, compose, random_pose, rotation_z, transform_point
from ontofit.templates import (
    Instance,
    KinematicParams,
    builtin_registry,
    canonicalize,
    eval_structure,
    get_template,
    ground_affordance,
    kinematic_force_direction,
    surface_distance,
)
from conftest import pose_allclose, random_instance


# -- registry ---------------------------------------------------------------------


def test_registry_contents():
    reg = builtin_registry()
    ids = [t.id for t in reg]
    assert len(set(ids)) == len(ids)
    for required in ("cuboid", "cylinder", "ring", "revolute", "prismatic",
                     "handle", "lever"):
        assert required in ids

    cuboid = get_template("cuboid")
    assert cuboid.schema.names == ("a", "b", "c")
    for entry in cuboid.schema.entries:
        assert entry.unit == "length"
        assert (entry.lower, entry.upper) == (0.01, 10.0)

    assert get_template("revolute").kind == "kinematic"
    assert get_template("prismatic").kind == "kinematic"

    handle = get_template("handle")
    child_ids = [tpl.id for tpl, _, _ in handle.children(handle.schema.lower * 3)]
    assert child_ids == ["ring", "cylinder"]

    with pytest.raises(UnknownTemplateError):
        get_template("widget")


# -- structure evaluation ------------------------------------------------------------


def test_eval_structure_cuboid_examples():
    inst = Instance("cuboid", [1, 1, 1], Pose())
    assert eval_structure(inst, [0, 0, 0]) == pytest.approx(-1.0)
    assert eval_structure(inst, [1, 0, 0]) == pytest.approx(0.0, abs=1e-15)
    moved = Instance("cuboid", [1, 1, 1], Pose(np.eye(3), [5, 0, 0]))
    assert eval_structure(moved, [5, 0, 0]) == pytest.approx(-1.0)


def test_out_of_bounds_params_rejected():
    with pytest.raises(ParamBoundsError):
        Instance("cuboid", [-5.0, 1.0, 1.0], Pose())
    with pytest.raises(ParamBoundsError):
        Instance("cuboid", [1.0, 1.0, 99.0], Pose())


def test_kinematic_templates_have_no_surface():
    rev = get_template("revolute")
    with pytest.raises(OntofitError):
        rev.structure(rev.schema.lower, 0.0, 0.0, 0.0)


def test_pose_equivariance(rng):
    for tid in ("cuboid", "cylinder", "ring", "handle", "lever"):
        inst = random_instance(tid, rng, lo=0.2, hi=1.5)
        base = Instance(tid, inst.params, Pose())
        pts = rng.uniform(-2, 2, (200, 3))
        posed_vals = eval_structure(inst, transform_point(inst.pose, pts))
        local_vals = eval_structure(base, pts)
        assert np.max(np.abs(posed_vals - local_vals)) < 1e-12


def test_composite_min_rule(rng):
    for tid, params in (("handle", [0.12, 0.02, 0.2]),
                        ("lever", [0.2, 0.12, 0.02, 0.15])):
        tpl = get_template(tid)
        pts = rng.uniform(-0.6, 0.6, (2000, 3))
        combined = tpl.structure(params, pts[:, 0], pts[:, 1], pts[:, 2])
        child_vals = []
        for ctpl, cp, rel in tpl.children(params):
            local = transform_point(rel.inverse(), pts)
            child_vals.append(ctpl.structure(cp, local[:, 0], local[:, 1],
                                             local[:, 2]))
        assert np.max(np.abs(combined - np.minimum(*child_vals))) < 1e-12


def test_structure_gradients_match_finite_differences(rng):
    # away from the non-smooth loci of max/abs
    tpl = get_template("cuboid")
    checked = 0
    while checked < 20:
        p = rng.uniform(0.3, 2.0, 3)
        x = rng.uniform(-2.5, 2.5, 3)
        q = np.abs(x) - p
        gaps = [abs(q[0] - q[1]), abs(q[0] - q[2]), abs(q[1] - q[2])]
        if min(gaps) < 1e-3 or np.min(np.abs(x)) < 1e-3:
            continue
        err = dm.grad_check(
            lambda pp: tpl.structure(pp, float(x[0]), float(x[1]), float(x[2])),
            p, h=1e-6,
        )
        assert err < 1e-4
        checked += 1


# -- affordances -------------------------------------------------------------------


def test_ground_affordance_identity_equals_local():
    inst = Instance("ring", [2.0, 0.3], Pose())
    grasp = ground_affordance(inst, "tube_pinch", selector=0.0, max_width=1.0)
    assert np.allclose(grasp.pose.translation, [2.0, 0.0, 0.0], atol=1e-15)
    assert np.linalg.norm(grasp.pose.translation) == pytest.approx(2.0)


def test_ground_affordance_composes_with_pose(rng):
    quarter = Pose(rotation_z(np.pi / 2.0))
    local = Instance("ring", [2.0, 0.3], Pose())
    posed = Instance("ring", [2.0, 0.3], quarter)
    g_local = ground_affordance(local, "tube_pinch", 0.25, max_width=1.0)
    g_posed = ground_affordance(posed, "tube_pinch", 0.25, max_width=1.0)
    assert pose_allclose(g_posed.pose, compose(quarter, g_local.pose), 1e-12)


def test_grasp_equivariance_random_poses(rng):
    for _ in range(50):
        inst = random_instance("cuboid", rng, lo=0.02, hi=0.04)
        base = Instance("cuboid", inst.params, Pose())
        g0 = ground_affordance(base, "face_pinch", 0.3)
        g1 = ground_affordance(inst, "face_pinch", 0.3)
        assert pose_allclose(g1.pose, compose(inst.pose, g0.pose), 1e-12)


def test_unknown_affordance():
    inst = Instance("cuboid", [1, 1, 1], Pose())
    with pytest.raises(UnknownAffordanceError):
        ground_affordance(inst, "nope")


def test_cuboid_grasp_feasibility_and_axis():
    tpl = get_template("cuboid")
    # approach/grip axis is always the smallest extent axis
    for half in ([0.3, 0.2, 0.03], [0.02, 0.3, 0.1], [0.2, 0.015, 0.4]):
        g = tpl.grasp(np.array(half), "face_pinch", 0.5, max_width=0.08)
        thin = int(np.argmin(half))
        expect = np.zeros(3)
        expect[thin] = 1.0
        assert g is not None
        assert np.allclose(np.abs(g.grip_axis), expect)
        assert g.width == pytest.approx(2.0 * min(half))
        assert 2.0 * min(half) <= 0.08
    # emitted only when the gripper can open wide enough
    assert tpl.grasp(np.array([0.3, 0.2, 0.05]), "face_pinch", 0.5, 0.08) is None


def test_cylinder_and_ring_grasp_width_gate():
    cyl = get_template("cylinder")
    assert cyl.grasp([0.03, 0.5], "diameter_pinch", 0.5, 0.08) is not None
    assert cyl.grasp([0.05, 0.5], "diameter_pinch", 0.5, 0.08) is None
    ring = get_template("ring")
    assert ring.grasp([0.2, 0.03], "tube_pinch", 0.5, 0.08) is not None
    assert ring.grasp([0.2, 0.05], "tube_pinch", 0.5, 0.08) is None


def test_force_field_grounding():
    joint_inst = Instance(
        "revolute", [0.0, np.pi / 2.0, 0.0, 0.0, 0.0, 1.0], Pose()
    )  # axis +z through the origin
    field = ground_affordance(joint_inst, "drive")
    d = field(np.array([1.0, 0.0, 0.0]))
    assert np.allclose(d, [0.0, 1.0, 0.0], atol=1e-12)
    batch = field(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    assert np.allclose(batch[1], [-1.0, 0.0, 0.0], atol=1e-12)


def test_force_field_equivariance(rng):
    inst_local = Instance("prismatic", [0.3, 0.2, 1.0], Pose())
    pose = random_pose(rng)
    inst_posed = Instance("prismatic", [0.3, 0.2, 1.0], pose)
    pts = rng.normal(size=(10, 3))
    f_local = ground_affordance(inst_local, "drive")(pts)
    f_posed = ground_affordance(inst_posed, "drive")(transform_point(pose, pts))
    assert np.allclose(f_posed, f_local @ pose.rotation.T, atol=1e-12)


def test_kinematic_force_direction_examples():
    prism = KinematicParams("prismatic", [0, 0, 1])
    assert np.allclose(kinematic_force_direction(prism, [5.0, -2.0, 7.0]), [0, 0, 1])
    rev = KinematicParams("revolute", [0, 0, 1], [0, 0, 0], (0, 1))
    assert np.allclose(kinematic_force_direction(rev, [1.0, 0.0, 0.0]), [0, 1, 0])
    with pytest.raises(DegeneratePointError):
        kinematic_force_direction(rev, [0.0, 0.0, 5.0])


# -- canonicalization -----------------------------------------------------------------


def _assert_same_point_set(a: Instance, b: Instance, rng, tol=1e-9, scale=3.0):
    pts = rng.uniform(-scale, scale, (1000, 3))
    va = eval_structure(a, pts)
    vb = eval_structure(b, pts)
    assert np.max(np.abs(va - vb)) < tol


def test_canonicalize_cylinder_spin_removed(rng):
    spin = Pose(rotation_z(np.radians(37.0)))
    inst = Instance("cylinder", [0.5, 1.0], spin)
    canon = canonicalize(inst)
    assert pose_allclose(canon.pose, Pose(), 1e-12)
    _assert_same_point_set(inst, canon, rng)


def test_canonicalize_idempotent(rng):
    for tid in ("cuboid", "cylinder", "ring", "handle", "lever"):
        inst = random_instance(tid, rng, lo=0.2, hi=1.0)
        c1 = canonicalize(inst)
        c2 = canonicalize(c1)
        assert np.allclose(c1.params, c2.params)
        assert pose_allclose(c1.pose, c2.pose, 1e-12)


def test_canonicalize_cuboid_sorts_extents(rng):
    inst = Instance("cuboid", [1.0, 3.0, 2.0], Pose())
    canon = canonicalize(inst)
    assert np.allclose(canon.params, [3.0, 2.0, 1.0])
    _assert_same_point_set(inst, canon, rng, scale=4.0)


def test_canonicalize_preserves_surface(rng):
    from ontofit.render import sample_surface

    for tid in ("cuboid", "cylinder", "ring", "handle", "lever"):
        inst = random_instance(tid, rng, lo=0.2, hi=1.0)
        canon = canonicalize(inst)
        cloud = sample_surface(inst, 1000, seed=5)
        vals = eval_structure(canon, cloud.points)
        assert np.max(np.abs(vals)) < 1e-9


def test_canonicalize_resolves_symmetric_poses(rng):
    # a cylinder spun arbitrarily about its axis maps to one representative
    base = random_pose(rng)
    insts = [
        Instance("cylinder", [0.4, 0.8],
                 compose(base, Pose(rotation_z(ang))))
        for ang in (0.0, 0.9, -2.4)
    ]
    canons = [canonicalize(i) for i in insts]
    for c in canons[1:]:
        assert pose_allclose(c.pose, canons[0].pose, 1e-9)
