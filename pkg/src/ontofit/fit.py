"""Resolving raw point clouds into template instances.

The objective is the mean squared exact distance from cloud points to the
instance surface plus a coverage term: for a fixed reparameterized surface
sample of the instance, the mean squared distance-to-cloud in excess of a
dead-zone margin (a small multiple of the cloud's own median neighbor
spacing).  The margin makes the coverage term vanish whenever the surface
is fully covered by the cloud at its sampling density, while surface
regions that stray far from the cloud (the degenerate inflated or slid
fits) are still punished quadratically.  Gradients come from forward-mode
duals over [shape params, axis-angle, translation]; steps are accepted only
when they decrease the objective (plateau halves the step), and parameters
are projected onto their schema bounds every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import dual as dm
from .cloud import CloudPair, PointCloud
from .config import FitConfig
from .errors import NoMotionError, OptimizationFailure
from .geometry import (
    Pose,
    axis_angle_to_matrix,
    matrix_to_axis_angle,
    rotation_entries,
)
from .kinematics import DEFAULT_D_MIN, DEFAULT_THETA_MIN, estimate_rigid
from .templates import Instance, Template, canonicalize
from .templates.registry import registry_index

_ACCEPT_MARGIN = 1e-15
_MIN_STEP = 1e-12


def _scalar(out) -> float:
    return float(out.value[0]) if isinstance(out, dm.Dual) else float(out)


def chamfer(a: PointCloud, b: PointCloud) -> float:
    """Symmetric mean-of-min squared distance between two clouds."""
    pa = a.points if isinstance(a, PointCloud) else np.asarray(a, float)
    pb = b.points if isinstance(b, PointCloud) else np.asarray(b, float)
    if pa.shape[0] == 0 or pb.shape[0] == 0:
        raise ValueError("chamfer requires non-empty clouds")
    d_ab, _ = cKDTree(pb).query(pa)
    d_ba, _ = cKDTree(pa).query(pb)
    return float(np.mean(d_ab**2) + np.mean(d_ba**2))


# -- objective ---------------------------------------------------------------


def _unpack(template: Template, x):
    n = template.n_params
    return x[:n], x[n:n + 3], x[n + 3:n + 6]


def coverage_margin(points: np.ndarray, tree: cKDTree | None = None,
                    factor: float = 2.0) -> float:
    """Dead-zone radius: ``factor`` times the cloud's median neighbor spacing."""
    if points.shape[0] < 2:
        return 0.0
    if tree is None:
        tree = cKDTree(points)
    d, _ = tree.query(points, k=2)
    return factor * float(np.median(d[:, 1]))


def make_objective(template: Template, cloud_points: np.ndarray,
                   coverage_weight: float, coverage_draws, nn_tree: cKDTree | None,
                   margin: float = 0.0):
    """Objective over [params, rotation vector, translation].

    Accepts plain floats (value only) or duals (value plus gradient); the
    discrete nearest-neighbor assignment of the coverage term is recomputed
    from values on every call.
    """
    px = cloud_points[:, 0]
    py = cloud_points[:, 1]
    pz = cloud_points[:, 2]

    def objective(x):
        params, w, t = _unpack(template, x)
        r00, r01, r02, r10, r11, r12, r20, r21, r22 = rotation_entries(*w)
        dx = px - t[0]
        dy = py - t[1]
        dz = pz - t[2]
        qx = r00 * dx + r10 * dy + r20 * dz
        qy = r01 * dx + r11 * dy + r21 * dz
        qz = r02 * dx + r12 * dy + r22 * dz
        dist = template.distance(params, qx, qy, qz)
        loss = dm.mean(dist * dist)
        if coverage_weight > 0.0 and coverage_draws is not None:
            sx, sy, sz = template.coverage_points(params, coverage_draws)
            wx = r00 * sx + r01 * sy + r02 * sz + t[0]
            wy = r10 * sx + r11 * sy + r12 * sz + t[1]
            wz = r20 * sx + r21 * sy + r22 * sz + t[2]
            sample_vals = np.column_stack(
                [dm.value_of(wx), dm.value_of(wy), dm.value_of(wz)]
            )
            _, nn = nn_tree.query(sample_vals)
            tx, ty, tz = (cloud_points[nn, i] for i in range(3))
            ex, ey, ez = wx - tx, wy - ty, wz - tz
            gap = dm.sqrt(ex * ex + ey * ey + ez * ez)
            excess = dm.maximum(gap - margin, 0.0)
            loss = loss + coverage_weight * dm.mean(excess * excess)
        return loss

    return objective


def point_to_surface_loss(inst: Instance, cloud: PointCloud,
                          coverage_weight: float = 1.0,
                          coverage_samples: int = 512, seed: int = 0,
                          margin_factor: float = 3.0) -> float:
    """The fitting objective at a concrete instance (see module docstring).

    The fixed surface sample is drawn from ``seed`` with the same generator
    the surface sampler uses, so a cloud that is an exact surface sample of
    the instance yields a loss of zero in both terms.
    """
    if len(cloud) == 0:
        raise ValueError("loss requires a non-empty cloud")
    tpl = inst.template
    draws = None
    tree = None
    margin = 0.0
    if coverage_weight > 0.0:
        draws = tpl.coverage_draws(coverage_samples, np.random.default_rng(seed))
        tree = cKDTree(cloud.points)
        margin = coverage_margin(cloud.points, tree, margin_factor)
    objective = make_objective(tpl, cloud.points, coverage_weight, draws, tree, margin)
    x = np.concatenate(
        [inst.params, matrix_to_axis_angle(inst.pose.rotation), inst.pose.translation]
    )
    return float(objective(list(x)))


# -- initialization -------------------------------------------------------------


def init_guesses(template: Template, cloud: PointCloud, starts: int, seed,
                 max_rotation: float = np.pi / 6.0, max_scale: float = 1.5):
    """Moment-based first guess plus rotation/log-param perturbed restarts.

    Returns (guesses, degenerate) where degenerate flags a rank-deficient
    covariance (identity rotation fallback).
    """
    params0, pose0, degenerate = template.moment_init(cloud.points)
    guesses = [(np.asarray(params0, float), pose0)]
    rng = np.random.default_rng(seed)
    log_cap = np.log(max_scale)
    for _ in range(starts - 1):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(0.0, max_rotation)
        rot = pose0.rotation @ axis_angle_to_matrix(axis * angle)
        factors = np.exp(rng.uniform(-log_cap, log_cap, size=template.n_params))
        params = template.schema.project(params0 * factors)
        guesses.append((params, Pose(rot, pose0.translation)))
    return guesses, degenerate


# -- optimizer -----------------------------------------------------------------


def _wrap_rotation(x: np.ndarray, n_params: int) -> np.ndarray:
    w = x[n_params:n_params + 3]
    theta = np.linalg.norm(w)
    if theta > np.pi:
        x = x.copy()
        x[n_params:n_params + 3] = w * ((theta - 2.0 * np.pi) / theta)
    return x


def _descend(objective, x0: np.ndarray, lower: np.ndarray, upper: np.ndarray,
             cfg: FitConfig, n_params: int, free: np.ndarray | None = None,
             max_iters: int | None = None):
    """Monotone projected descent with RMS-scaled steps and plateau decay.

    ``free`` optionally restricts updates to a coordinate subset.  Returns
    (x, loss, iterations); loss is +inf when every evaluation diverged.
    """
    if max_iters is None:
        max_iters = cfg.max_iters
    x = np.clip(x0, lower, upper)
    f = _scalar(objective(list(x)))
    if not np.isfinite(f):
        return x, float("inf"), 0
    step = cfg.base_step
    rms = np.zeros_like(x)
    history = [f]
    it = 0
    for it in range(1, max_iters + 1):
        out = objective(dm.seed(x))
        g = dm.gradient(out)
        if not np.all(np.isfinite(g)):
            return x, float("inf"), it
        if free is not None:
            mask = np.zeros_like(x)
            mask[free] = 1.0
            g = g * mask
        rms = 0.9 * rms + 0.1 * g * g
        direction = g / np.sqrt(rms + 1e-12)
        accepted = False
        while step >= _MIN_STEP:
            x_new = np.clip(x - step * direction, lower, upper)
            x_new = _wrap_rotation(x_new, n_params)
            f_new = _scalar(objective(list(x_new)))
            if np.isfinite(f_new) and f_new < f - _ACCEPT_MARGIN:
                accepted = True
                break
            step *= cfg.plateau_decay
        if not accepted:
            break
        x, f = x_new, f_new
        step = min(step * 1.3, cfg.base_step)
        history.append(f)
        if len(history) > cfg.converge_window:
            ref = history[-1 - cfg.converge_window]
            if (ref - f) <= cfg.converge_rel * max(abs(ref), 1e-30):
                break
    return x, f, it


# -- fitting -----------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    instance: Instance
    loss: float
    traces: tuple[tuple[int, float], ...]  # (start index, final optimizer loss)
    residual_mean: float
    residual_max: float
    degenerate_init: bool = False
    start_index: int = 0


def _subsample(points: np.ndarray, cap: int, rng: np.random.Generator) -> np.ndarray:
    if points.shape[0] <= cap:
        return points
    idx = np.sort(rng.permutation(points.shape[0])[:cap])
    return points[idx]


def fit_parameters(template: Template, cloud: PointCloud,
                   cfg: FitConfig = FitConfig()) -> FitResult:
    """Multi-start descent; returns the lowest-loss run, canonicalized.

    The reported loss and residual statistics are evaluated on the full
    cloud with the public objective, so
    ``point_to_surface_loss(result.instance, cloud, ...)`` reproduces
    ``result.loss`` exactly.
    """
    if len(cloud) == 0:
        raise ValueError("cannot fit an empty cloud")
    if template.kind != "geometric":
        raise ValueError(f"cannot fit surface of kinematic template {template.id!r}")
    rng = np.random.default_rng(cfg.seed)
    pts = _subsample(cloud.points, cfg.max_cloud_points, rng)
    pts_coarse = pts[::2] if pts.shape[0] > 256 else pts
    draws = draws_coarse = None
    tree = tree_coarse = None
    margin = margin_coarse = 0.0
    if cfg.coverage_weight > 0.0:
        draw_rng = np.random.default_rng(cfg.seed)
        draws = template.coverage_draws(cfg.coverage_samples, draw_rng)
        draws_coarse = template.coverage_draws(
            max(cfg.coverage_samples // 2, 32), draw_rng
        )
        tree = cKDTree(pts)
        tree_coarse = cKDTree(pts_coarse)
        margin = coverage_margin(pts, tree, cfg.coverage_margin_factor)
        margin_coarse = coverage_margin(pts_coarse, tree_coarse,
                                        cfg.coverage_margin_factor)
    objective = make_objective(template, pts, cfg.coverage_weight, draws, tree, margin)
    objective_coarse = make_objective(
        template, pts_coarse, cfg.coverage_weight, draws_coarse, tree_coarse,
        margin_coarse,
    )

    n = template.n_params
    lower = np.concatenate([template.schema.lower, np.full(6, -np.inf)])
    upper = np.concatenate([template.schema.upper, np.full(6, np.inf)])
    guesses, degenerate = init_guesses(template, cloud, cfg.starts, cfg.seed)

    # every start explores on a short budget over a thinned cloud; only the
    # winner is polished to full convergence on the full budget
    traces = []
    best = None
    explore = min(cfg.explore_iters, cfg.max_iters)
    for i, (params, pose) in enumerate(guesses):
        x0 = np.concatenate(
            [params, matrix_to_axis_angle(pose.rotation), pose.translation]
        )
        x, f, _ = _descend(objective_coarse, x0, lower, upper, cfg, n,
                           max_iters=explore)
        traces.append((i, f))
        if np.isfinite(f) and (best is None or f < best[1]):
            best = (i, f, x)

    if best is None:
        raise OptimizationFailure(
            f"all {cfg.starts} starts diverged fitting {template.id!r}",
            traces=traces,
        )

    idx, f, x = best
    x, f, _ = _descend(objective, x, lower, upper, cfg, n)
    groups = template.refine_groups()
    if groups and np.isfinite(f):
        for _ in range(cfg.refine_passes):
            for group in groups:
                x, f, _ = _descend(objective, x, lower, upper, cfg, n, free=group)
    traces[idx] = (idx, f)
    params, w, t = _unpack(template, x)
    inst = canonicalize(
        Instance(template.id, params, Pose(axis_angle_to_matrix(np.asarray(w)), t))
    )
    final_loss = point_to_surface_loss(
        inst, cloud, cfg.coverage_weight, cfg.coverage_samples, cfg.seed,
        cfg.coverage_margin_factor,
    )
    from .templates.instance import surface_distance

    residual = np.abs(surface_distance(inst, cloud.points))
    return FitResult(
        instance=inst,
        loss=float(final_loss),
        traces=tuple(traces),
        residual_mean=float(residual.mean()),
        residual_max=float(residual.max()),
        degenerate_init=degenerate,
        start_index=idx,
    )


# -- identification ---------------------------------------------------------------


@dataclass(frozen=True)
class IdentificationResult:
    """Templates ranked ascending by loss + model_penalty * param count."""

    ranking: tuple[tuple[str, FitResult | None, float], ...]
    low_confidence: bool

    @property
    def best_id(self) -> str:
        return self.ranking[0][0]

    @property
    def best_fit(self) -> FitResult:
        return self.ranking[0][1]


def identify_ontology(cloud: PointCloud, candidates, cfg: FitConfig = FitConfig()
                      ) -> IdentificationResult:
    """Fit every candidate template and rank by penalized loss.

    Per-template fit failures score +inf instead of aborting; ties break by
    registry order.
    """
    candidates = [t for t in candidates]
    if not candidates:
        raise ValueError("identification requires a non-empty candidate set")
    entries = []
    for tpl in candidates:
        if tpl.kind != "geometric":
            raise ValueError(f"cannot identify against kinematic template {tpl.id!r}")
        try:
            result = fit_parameters(tpl, cloud, cfg)
            score = result.loss + cfg.model_penalty * tpl.n_params
        except OptimizationFailure:
            result, score = None, float("inf")
        entries.append((tpl.id, result, float(score)))
    entries.sort(key=lambda e: (e[2], registry_index(e[0])))
    low_confidence = all(score > cfg.low_confidence for _, _, score in entries)
    return IdentificationResult(tuple(entries), low_confidence)


# -- kinematic kind classification ----------------------------------------------


def classify_kinematic(pair: CloudPair, theta_min: float = DEFAULT_THETA_MIN,
                       d_min: float = DEFAULT_D_MIN) -> str:
    """Joint kind of a corresponding pair from its relative rigid motion:
    rotation-dominant -> revolute, else translation -> prismatic."""
    if not pair.correspondence:
        raise ValueError("classification requires recovered correspondences")
    motion, _ = estimate_rigid(pair.initial, pair.final)
    theta = float(np.linalg.norm(matrix_to_axis_angle(motion.rotation)))
    if theta >= theta_min:
        return "revolute"
    if float(np.linalg.norm(motion.translation)) >= d_min:
        return "prismatic"
    raise NoMotionError(
        f"angle {theta:.2e} < {theta_min} and translation "
        f"{float(np.linalg.norm(motion.translation)):.2e} < {d_min}"
    )
