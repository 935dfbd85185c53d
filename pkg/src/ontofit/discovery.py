"""End-to-end articulated concept discovery and closed-loop evaluation.

Pipeline per observation pair: segment the moving part, identify and fit its
geometric template, estimate the joint, ground a grasp, plan a hold-then-move
interaction, and score the plan against the ground-truth scene.  Evaluation
is kinematic consistency: the plan succeeds iff its grasp touches the true
moving part and its waypoints track the true one-DOF joint manifold over
more than the success fraction of the range.
"""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cloud import CloudPair, PointCloud
from .config import BenchmarkConfig, FitConfig, Tolerances
from .errors import NoMotionError, OntofitError, PlanningError
from .geometry import Pose, compose, rotation_about_line
from .kinematics import (
    JointDiagnostics,
    SegmentMask,
    estimate_joint,
    estimate_rigid,
    segment_moving_part,
)
from .fit import IdentificationResult, identify_ontology
from .render import SceneSpec
from .templates import (
    Grasp,
    Instance,
    KinematicParams,
    get_template,
    grounded_grasps,
    surface_distance,
)


@dataclass(frozen=True)
class DiscoveryResult:
    mask: SegmentMask
    identification: IdentificationResult
    instance: Instance  # top-ranked fit
    joint: KinematicParams
    grasp_affordance: str
    grasp_selector: float
    grasp: Grasp  # world frame
    joint_diagnostics: JointDiagnostics
    diagnostics: dict


@dataclass(frozen=True)
class InteractionPlan:
    """Gripper waypoints along the discovered screw; waypoint 0 is the grasp."""

    grasp_pose: Pose
    waypoints: tuple[Pose, ...]
    joint: KinematicParams
    displacement: float  # total screw displacement covered by the plan


@dataclass(frozen=True)
class EvalOutcome:
    success: bool
    fraction: float  # achieved fraction of the true joint range
    deviation: float  # max waypoint distance from the true joint manifold
    grasp_distance: float  # grasp center to the true moving-part surface
    grasp_feasible: bool
    reason: str  # "bad-grasp" | "off-manifold" | "insufficient-range" | "none"


def _adaptive_tau(pair: CloudPair, base_tau: float) -> float:
    disp = np.linalg.norm(pair.final.points - pair.initial.points, axis=1) \
        if pair.correspondence else None
    if disp is None:
        return base_tau
    robust_max = float(np.percentile(disp, 98.0))
    return max(base_tau, 0.3 * robust_max)


def _trimmed_joint(pair: CloudPair, mask: SegmentMask,
                   tol: Tolerances, ground_truth):
    """Joint estimate with one residual-trimming pass against stray points."""
    joint, diag = estimate_joint(pair, mask, tol.theta_min, tol.d_min, ground_truth)
    idx = np.flatnonzero(mask.moving)
    src = pair.initial.points[idx]
    dst = pair.final.points[mask.pairing[idx]]
    motion, _ = estimate_rigid(src, dst)
    residual = np.linalg.norm(src @ motion.rotation.T + motion.translation - dst,
                              axis=1)
    cutoff = max(3.0 * float(np.median(residual)), 1e-12)
    keep = residual <= cutoff
    if np.all(keep) or np.count_nonzero(keep) < 3:
        return joint, diag, mask
    moving = mask.moving.copy()
    moving[idx[~keep]] = False
    trimmed = SegmentMask(moving, mask.displacement, mask.pairing,
                          mask.approximate, mask.threshold)
    joint, diag = estimate_joint(pair, trimmed, tol.theta_min, tol.d_min,
                                 ground_truth)
    return joint, diag, trimmed


def discover(pair: CloudPair, candidates, fit_cfg: FitConfig = FitConfig(),
             tol: Tolerances = Tolerances(), selector_grid: int = 9,
             adaptive_tau: bool = True,
             ground_truth_joint: KinematicParams | None = None) -> DiscoveryResult:
    """Full concept discovery on one observation pair.

    Raises :class:`NoMotionError` when nothing moves and
    :class:`~ontofit.errors.NoAffordanceError` when no grasp is feasible.
    """
    tau = _adaptive_tau(pair, tol.move_tau) if adaptive_tau else tol.move_tau
    mask = segment_moving_part(pair, tau)
    if mask.moving_count < 3:
        raise NoMotionError(
            f"moving segment has {mask.moving_count} points above tau={tau:.4g}"
        )
    joint, joint_diag, mask = _trimmed_joint(pair, mask, tol, ground_truth_joint)

    moving_cloud = pair.initial.take(np.flatnonzero(mask.moving))
    identification = identify_ontology(moving_cloud, candidates, fit_cfg)
    if identification.best_fit is None:
        from .errors import OptimizationFailure

        raise OptimizationFailure(
            f"every candidate fit failed on the moving part "
            f"({identification.ranking})"
        )
    inst = identification.best_fit.instance

    centroid = moving_cloud.centroid()
    selectors = np.linspace(0.0, 1.0, selector_grid)
    options = grounded_grasps(inst, selectors, tol.max_grip_width)
    best = None
    for aff_id, selector, grasp in options:
        dist = float(np.linalg.norm(grasp.pose.translation - centroid))
        if best is None or dist < best[0]:
            best = (dist, aff_id, selector, grasp)
    _, aff_id, selector, grasp = best

    diagnostics = {
        "loss": identification.best_fit.loss,
        "score": identification.ranking[0][2],
        "low_confidence": identification.low_confidence,
        "segmentation": mask.stats(),
        "rms": joint_diag.rms,
    }
    return DiscoveryResult(
        mask=mask,
        identification=identification,
        instance=inst,
        joint=joint,
        grasp_affordance=aff_id,
        grasp_selector=float(selector),
        grasp=grasp,
        joint_diagnostics=joint_diag,
        diagnostics=diagnostics,
    )


def joint_step(joint: KinematicParams, value: float) -> Pose:
    """Screw displacement by ``value`` along the joint from its zero state."""
    return joint.displacement(value)


def plan_interaction(result_or_grasp, joint: KinematicParams | None = None,
                     target_fraction: float = 1.0,
                     waypoints: int = 32) -> InteractionPlan:
    """Waypoints conjugating the grasp by uniform screw increments.

    Accepts a :class:`DiscoveryResult` or an explicit (grasp pose, joint)
    pair.  ``target_fraction`` scales the joint's estimated range.
    """
    if isinstance(result_or_grasp, DiscoveryResult):
        grasp_pose = result_or_grasp.grasp.pose
        joint = result_or_grasp.joint
    else:
        grasp_pose = result_or_grasp
        if joint is None:
            raise ValueError("planning from a bare grasp requires the joint")
    if not 0.0 < target_fraction <= 1.0:
        raise ValueError("target fraction must lie in (0, 1]")
    total = target_fraction * joint.span
    if joint.kind == "revolute":
        radial = grasp_pose.translation - joint.pivot
        radial = radial - np.dot(radial, joint.axis) * joint.axis
        if np.linalg.norm(radial) <= 1e-9:
            raise PlanningError("grasp center lies on the revolute axis")
    poses = []
    for k in range(waypoints + 1):
        step = joint.displacement(total * k / waypoints)
        poses.append(compose(step, grasp_pose))
    return InteractionPlan(grasp_pose, tuple(poses), joint, float(total))


def _project_waypoint(x: np.ndarray, x0: np.ndarray, scene: SceneSpec,
                      v0: float) -> tuple[float, np.ndarray]:
    """Closest joint value (clamped to the true range) and its manifold point."""
    joint = scene.joint
    span = joint.span
    if joint.kind == "prismatic":
        v = v0 + float(np.dot(joint.axis, x - x0))
        v = min(max(v, 0.0), span)
        proj = x0 + (v - v0) * joint.axis
        return v, proj
    u, p = joint.axis, joint.pivot
    r0 = (x0 - p) - np.dot(x0 - p, u) * u
    rj = (x - p) - np.dot(x - p, u) * u
    if np.linalg.norm(r0) <= 1e-9:
        return v0, x0
    delta = float(np.arctan2(np.dot(u, np.cross(r0, rj)), np.dot(r0, rj)))
    v = min(max(v0 + delta, 0.0), span)
    proj = rotation_about_line(u, p, v - v0)
    return v, proj.rotation @ x0 + proj.translation


def evaluate(plan: InteractionPlan, scene: SceneSpec,
             tol: Tolerances = Tolerances()) -> EvalOutcome:
    """Kinematic-consistency scoring of a plan against the true scene.

    Failures are outcomes, not errors.  Success requires a valid grasp, all
    waypoints within ``track_eps`` of the true joint manifold after
    projection, and more than ``success_fraction`` of the range covered.
    """
    s0 = scene.states[0]
    moving_now = Instance(
        scene.moving.template_id, scene.moving.params, scene.moving_pose_at(s0)
    )
    center = plan.waypoints[0].translation
    grasp_distance = abs(float(surface_distance(moving_now, center)))
    try:
        grounded_grasps(moving_now, [0.5], tol.max_grip_width)
        feasible = True
    except OntofitError:
        feasible = False
    grasp_ok = grasp_distance <= tol.grasp_eps and feasible

    v0 = s0 * scene.joint.span
    x0 = center
    values, deviations = [], []
    for pose in plan.waypoints:
        v, proj = _project_waypoint(pose.translation, x0, scene, v0)
        values.append(v)
        deviations.append(float(np.linalg.norm(pose.translation - proj)))
    deviation = float(max(deviations))
    fraction = float((max(values) - min(values)) / scene.joint.span)

    on_manifold = deviation <= tol.track_eps
    enough = fraction > tol.success_fraction
    success = grasp_ok and on_manifold and enough
    if success:
        reason = "none"
    elif not grasp_ok:
        reason = "bad-grasp"
    elif not on_manifold:
        reason = "off-manifold"
    else:
        reason = "insufficient-range"
    return EvalOutcome(
        success=success,
        fraction=fraction,
        deviation=deviation,
        grasp_distance=grasp_distance,
        grasp_feasible=feasible,
        reason=reason,
    )


# -- benchmark ---------------------------------------------------------------------


def _gt_plan(scene: SceneSpec, bench: BenchmarkConfig, tol: Tolerances
             ) -> InteractionPlan:
    """Upper-bound plan straight from ground truth (skips discovery)."""
    s0 = scene.states[0]
    moving_now = Instance(
        scene.moving.template_id, scene.moving.params, scene.moving_pose_at(s0)
    )
    selectors = np.linspace(0.0, 1.0, bench.selector_grid)
    options = grounded_grasps(moving_now, selectors, tol.max_grip_width)
    centroid = moving_now.pose.translation
    best = min(options, key=lambda o: float(
        np.linalg.norm(o[2].pose.translation - centroid)))
    span = scene.joint.span * (scene.states[1] - scene.states[0])
    joint = KinematicParams(scene.joint.kind, scene.joint.axis, scene.joint.pivot,
                            (0.0, max(span, 1e-9)))
    return plan_interaction(best[2].pose, joint,
                            bench.target_fraction, bench.waypoints)


def _benchmark_row(args) -> dict:
    manifest_path, entry, cfg, gt_bypass = args
    from .config import benchmark_config, fit_config, tolerances
    from .dataset import load_scene_pair, scene_from_dict

    bench = benchmark_config(cfg)
    tol = tolerances(cfg)
    scene = scene_from_dict(entry["scene"])
    row = {
        "id": entry["id"],
        "template_true": scene.moving.template_id,
        "joint_true": scene.joint.kind,
        "template_identified": None,
        "identified_correct": None,
        "score": None,
        "loss": None,
        "cosine_distance": None,
        "pivot_distance": None,
        "fraction": None,
        "deviation": None,
        "grasp_distance": None,
        "outcome": "failure",
        "reason": None,
    }
    try:
        if gt_bypass:
            plan = _gt_plan(scene, bench, tol)
            row["template_identified"] = scene.moving.template_id
            row["identified_correct"] = True
        else:
            pair = load_scene_pair(manifest_path, entry)
            fit_cfg = dataclasses.replace(fit_config(cfg), seed=int(entry["seed"]))
            candidates = [get_template(t) for t in bench.candidates]
            result = discover(
                pair, candidates, fit_cfg, tol,
                selector_grid=bench.selector_grid,
                adaptive_tau=bench.adaptive_tau,
                ground_truth_joint=scene.joint,
            )
            row["template_identified"] = result.instance.template_id
            row["identified_correct"] = (
                result.instance.template_id == scene.moving.template_id
            )
            row["score"] = result.diagnostics["score"]
            row["loss"] = result.diagnostics["loss"]
            row["cosine_distance"] = result.joint_diagnostics.axis_cosine_distance
            row["pivot_distance"] = result.joint_diagnostics.pivot_line_distance
            plan = plan_interaction(result, target_fraction=bench.target_fraction,
                                    waypoints=bench.waypoints)
        outcome = evaluate(plan, scene, tol)
        row["fraction"] = outcome.fraction
        row["deviation"] = outcome.deviation
        row["grasp_distance"] = outcome.grasp_distance
        row["outcome"] = "success" if outcome.success else "failure"
        row["reason"] = outcome.reason
    except OntofitError as exc:
        row["outcome"] = "failure"
        row["reason"] = f"error:{type(exc).__name__}"
    return row


def aggregate_rows(rows: list[dict]) -> dict:
    n = len(rows)
    successes = sum(1 for r in rows if r["outcome"] == "success")
    identified = [r for r in rows if r["identified_correct"] is not None]
    cosines = [r["cosine_distance"] for r in rows if r["cosine_distance"] is not None]
    pivots = [r["pivot_distance"] for r in rows if r["pivot_distance"] is not None]
    fractions = [r["fraction"] for r in rows if r["fraction"] is not None]
    reasons = {}
    for r in rows:
        if r["outcome"] != "success":
            key = r["reason"] or "unknown"
            reasons[key] = reasons.get(key, 0) + 1
    return {
        "scenes": n,
        "success_rate": successes / n if n else 0.0,
        "identification_accuracy": (
            sum(1 for r in identified if r["identified_correct"]) / len(identified)
            if identified else None
        ),
        "mean_cosine_distance": float(np.mean(cosines)) if cosines else None,
        "mean_pivot_distance": float(np.mean(pivots)) if pivots else None,
        "mean_fraction": float(np.mean(fractions)) if fractions else None,
        "failure_reasons": dict(sorted(reasons.items())),
    }


def run_benchmark(manifest_path, cfg: dict, jobs: int | None = None,
                  gt_bypass: bool = False, out_path=None) -> dict:
    """Discover -> plan -> evaluate across a dataset manifest.

    Per-scene work is independent (per-scene seeds), so the report is
    byte-identical for any job count.  Per-scene errors become failure rows.
    """
    from .config import benchmark_config
    from .dataset import load_manifest

    manifest = load_manifest(manifest_path)
    bench = benchmark_config(cfg)
    if jobs is None:
        jobs = bench.jobs
    tasks = [(manifest_path, entry, cfg, gt_bypass) for entry in manifest["scenes"]]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_benchmark_row, tasks, chunksize=4))
    else:
        rows = [_benchmark_row(t) for t in tasks]
    rows.sort(key=lambda r: r["id"])
    report = {
        "kind": "ontofit-benchmark",
        "config": cfg,
        "gt_bypass": bool(gt_bypass),
        "manifest": os.path.basename(str(manifest_path)),
        "scenes": rows,
        "aggregate": aggregate_rows(rows),
    }
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return report
