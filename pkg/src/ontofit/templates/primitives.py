"""Basic geometric templates: cuboid, cylinder, ring (torus).

Each template fixes an implicit structure formula (negative inside, zero on
the surface), an exact Euclidean signed distance used by the fitting
objective, analytic area-uniform surface sampling, a watertight mesh, a
moment-based initial guess, parallel-jaw grasp generators and a symmetry
canonicalization.  Formula code is written against :mod:`ontofit.dual`
dispatchers so it evaluates on plain numpy or dual inputs alike.
"""

from __future__ import annotations

import itertools

import numpy as np

from .. import dual as dm
from ..errors import UnknownAffordanceError
from ..geometry import Pose
from ..cloud import TriMesh
from .base import (
    DEFAULT_MAX_GRIP_WIDTH,
    Affordance,
    Grasp,
    LENGTH,
    ParamEntry,
    ParamSchema,
    Template,
)

_LEN_LO, _LEN_HI = 0.01, 10.0


def _length_entry(name: str) -> ParamEntry:
    return ParamEntry(name, _LEN_LO, _LEN_HI, LENGTH)


# -- shared moment machinery ---------------------------------------------------


def principal_frame(points: np.ndarray):
    """Centroid, ascending-variance eigenpairs, deterministic right-handed axes.

    Returns (centroid, eigenvalues ascending, axes as columns, degenerate).
    Degenerate rank < 3 falls back to identity axes.
    """
    pts = np.asarray(points, dtype=float)
    mu = pts.mean(axis=0)
    x = pts - mu
    cov = x.T @ x / max(len(pts), 1)
    evals, evecs = np.linalg.eigh(cov)
    degenerate = bool(evals[0] <= 1e-12 * max(evals[-1], 1e-30)) or len(pts) < 4
    if degenerate:
        return mu, evals, np.eye(3), True
    for i in range(3):
        j = int(np.argmax(np.abs(evecs[:, i])))
        if evecs[j, i] < 0:
            evecs[:, i] = -evecs[:, i]
    if np.linalg.det(evecs) < 0:
        evecs[:, 0] = -evecs[:, 0]
    return mu, evals, evecs, False


def _right_handed(x_axis, z_axis) -> np.ndarray:
    z = z_axis / np.linalg.norm(z_axis)
    x = x_axis - np.dot(x_axis, z) * z
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def _half_ranges(points: np.ndarray, axes: np.ndarray) -> np.ndarray:
    proj = (points - points.mean(axis=0)) @ axes
    return (proj.max(axis=0) - proj.min(axis=0)) / 2.0


# -- signed permutation orbit for box symmetry ---------------------------------


def _proper_signed_permutations() -> list[np.ndarray]:
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            g = np.zeros((3, 3))
            for col, row in enumerate(perm):
                g[row, col] = signs[col]
            if np.linalg.det(g) > 0:
                mats.append(g)
    return mats


_BOX_ORBIT = _proper_signed_permutations()


def _axis_sign_canonical(axis: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    for comp in axis:
        if abs(comp) > tol:
            return axis if comp > 0 else -axis
    return axis


def _minimal_rotation_to(axis: np.ndarray) -> np.ndarray:
    """Smallest rotation taking +z to ``axis`` (unit)."""
    z = np.array([0.0, 0.0, 1.0])
    c = float(np.dot(z, axis))
    if c > 1.0 - 1e-14:
        return np.eye(3)
    if c < -1.0 + 1e-14:
        return np.diag([1.0, -1.0, -1.0])  # pi about x
    v = np.cross(z, axis)
    k = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0.0]])
    return np.eye(3) + k + k @ k / (1.0 + c)


def _spin_canonical_pose(pose: Pose) -> Pose:
    """Zero the rotation about the local z symmetry axis; fix the axis sign."""
    axis = _axis_sign_canonical(pose.rotation @ np.array([0.0, 0.0, 1.0]))
    return Pose(_minimal_rotation_to(axis / np.linalg.norm(axis)), pose.translation)


# -- cuboid ---------------------------------------------------------------------


class Cuboid(Template):
    """Axis-aligned box with half-extents (a, b, c) in its local frame."""

    id = "cuboid"
    kind = "geometric"
    schema = ParamSchema((_length_entry("a"), _length_entry("b"), _length_entry("c")))
    affordances = (Affordance("face_pinch", "grasp"),)

    def structure(self, params, x, y, z):
        a, b, c = params
        return dm.maximum(
            dm.maximum(dm.absolute(x) - a, dm.absolute(y) - b), dm.absolute(z) - c
        )

    def distance(self, params, x, y, z):
        a, b, c = params
        qx = dm.absolute(x) - a
        qy = dm.absolute(y) - b
        qz = dm.absolute(z) - c
        ox = dm.maximum(qx, 0.0)
        oy = dm.maximum(qy, 0.0)
        oz = dm.maximum(qz, 0.0)
        outside = dm.sqrt(ox * ox + oy * oy + oz * oz)
        inside = dm.minimum(dm.maximum(dm.maximum(qx, qy), qz), 0.0)
        return outside + inside

    def surface_area(self, params) -> float:
        a, b, c = params
        return float(8.0 * (a * b + b * c + c * a))

    def sample_local(self, params, n, rng):
        a, b, c = params
        weights = np.array([b * c, b * c, a * c, a * c, a * b, a * b])
        cdf = np.cumsum(weights)
        cdf /= cdf[-1]
        face = np.searchsorted(cdf, rng.random(n), side="right")
        s = rng.uniform(-1.0, 1.0, n)
        t = rng.uniform(-1.0, 1.0, n)
        pts = np.empty((n, 3))
        half = np.array([a, b, c])
        for f in range(6):
            m = face == f
            axis, sign = f // 2, 1.0 if f % 2 == 0 else -1.0
            u_axis, v_axis = [i for i in range(3) if i != axis]
            pts[m, axis] = sign * half[axis]
            pts[m, u_axis] = s[m] * half[u_axis]
            pts[m, v_axis] = t[m] * half[v_axis]
        return pts, None

    def coverage_draws(self, n, rng):
        return rng.random(n), rng.uniform(-1.0, 1.0, n), rng.uniform(-1.0, 1.0, n)

    def coverage_points(self, params, draws):
        u, s, t = draws
        a, b, c = params
        av, bv, cv = (float(dm.value_of(p)[0]) if isinstance(p, dm.Dual) else float(p)
                      for p in params)
        weights = np.array([bv * cv, bv * cv, av * cv, av * cv, av * bv, av * bv])
        cdf = np.cumsum(weights)
        cdf /= cdf[-1]
        face = np.searchsorted(cdf, u, side="right")
        n = u.shape[0]
        coef = np.empty((3, n))
        for f in range(6):
            m = face == f
            axis, sign = f // 2, 1.0 if f % 2 == 0 else -1.0
            u_axis, v_axis = [i for i in range(3) if i != axis]
            coef[axis, m] = sign
            coef[u_axis, m] = s[m]
            coef[v_axis, m] = t[m]
        return a * coef[0], b * coef[1], c * coef[2]

    def mesh_local(self, params, resolution: int = 64) -> TriMesh:
        a, b, c = params
        verts = np.array(
            [
                [sx * a, sy * b, sz * c]
                for sx in (-1.0, 1.0)
                for sy in (-1.0, 1.0)
                for sz in (-1.0, 1.0)
            ]
        )
        tris = []
        for axis in range(3):
            for sign in (1.0, -1.0):
                idx = [i for i, v in enumerate(verts) if v[axis] * sign > 0]
                center = verts[idx].mean(axis=0)
                normal = np.zeros(3)
                normal[axis] = sign
                u_axis, v_axis = [i for i in range(3) if i != axis]
                ang = np.arctan2(verts[idx][:, v_axis] * sign, verts[idx][:, u_axis])
                order = [idx[i] for i in np.argsort(ang)]
                tris.append([order[0], order[1], order[2]])
                tris.append([order[0], order[2], order[3]])
        return TriMesh(verts, np.array(tris))

    def moment_init(self, points):
        mu, _, axes, degenerate = principal_frame(points)
        half = _half_ranges(points, axes)
        params = self.schema.project(half)
        return params, Pose(axes, mu), degenerate

    def grasp(self, params, affordance_id, selector,
              max_width=DEFAULT_MAX_GRIP_WIDTH):
        if affordance_id != "face_pinch":
            raise UnknownAffordanceError(affordance_id)
        half = np.asarray(params, dtype=float)
        thin = int(np.argmin(half))
        wide = int(np.argmax(half))
        if wide == thin:  # all equal
            wide = (thin + 1) % 3
        mid = next(i for i in range(3) if i not in (thin, wide))
        if 2.0 * half[thin] > max_width:
            return None
        center = np.zeros(3)
        center[wide] = half[wide]
        center[mid] = (2.0 * selector - 1.0) * 0.8 * half[mid]
        e = np.eye(3)
        grip = e[thin]
        x_col = e[wide]
        y_col = np.cross(grip, x_col)
        rot = np.column_stack([x_col, y_col, grip])
        return Grasp(Pose(rot, center), 2.0 * half[thin], grip)

    def force_field(self, params, affordance_id):
        raise UnknownAffordanceError(affordance_id)

    def canonical(self, params, pose):
        half = np.asarray(params, dtype=float)
        candidates = []
        for g in _BOX_ORBIT:
            permuted = np.abs(g).T @ half
            if permuted[0] >= permuted[1] >= permuted[2]:
                candidates.append((g, permuted))
        best_key, best = None, None
        for g, permuted in candidates:
            r = pose.rotation @ g
            key = tuple(np.round(r, 12).ravel())
            if best_key is None or key > best_key:
                best_key, best = key, (permuted, r)
        ext, rot = best
        return ext, Pose(rot, pose.translation)


# -- cylinder --------------------------------------------------------------------


class Cylinder(Template):
    """Capped cylinder: radius ``r``, half-height ``h``, axis +z."""

    id = "cylinder"
    kind = "geometric"
    schema = ParamSchema((_length_entry("radius"), _length_entry("half_height")))
    affordances = (Affordance("diameter_pinch", "grasp"),)

    def structure(self, params, x, y, z):
        r, h = params
        return dm.maximum(dm.sqrt(x * x + y * y) - r, dm.absolute(z) - h)

    def distance(self, params, x, y, z):
        r, h = params
        dr = dm.sqrt(x * x + y * y) - r
        dz = dm.absolute(z) - h
        pr = dm.maximum(dr, 0.0)
        pz = dm.maximum(dz, 0.0)
        outside = dm.sqrt(pr * pr + pz * pz)
        inside = dm.minimum(dm.maximum(dr, dz), 0.0)
        return outside + inside

    def surface_area(self, params) -> float:
        r, h = params
        return float(4.0 * np.pi * r * h + 2.0 * np.pi * r * r)

    def sample_local(self, params, n, rng):
        r, h = params
        lateral = 4.0 * np.pi * r * h
        cap = np.pi * r * r
        cdf = np.cumsum([lateral, cap, cap])
        cdf /= cdf[-1]
        region = np.searchsorted(cdf, rng.random(n), side="right")
        phi = 2.0 * np.pi * rng.random(n)
        v = rng.random(n)
        pts = np.empty((n, 3))
        m = region == 0
        pts[m, 0] = r * np.cos(phi[m])
        pts[m, 1] = r * np.sin(phi[m])
        pts[m, 2] = h * (2.0 * v[m] - 1.0)
        for reg, sign in ((1, 1.0), (2, -1.0)):
            m = region == reg
            rho = r * np.sqrt(v[m])
            pts[m, 0] = rho * np.cos(phi[m])
            pts[m, 1] = rho * np.sin(phi[m])
            pts[m, 2] = sign * h
        return pts, None

    def coverage_draws(self, n, rng):
        return rng.random(n), rng.random(n), rng.random(n)

    def coverage_points(self, params, draws):
        u, uphi, v = draws
        r, h = params
        rv = float(dm.value_of(r)[0]) if isinstance(r, dm.Dual) else float(r)
        hv = float(dm.value_of(h)[0]) if isinstance(h, dm.Dual) else float(h)
        lateral = 4.0 * np.pi * rv * hv
        cap = np.pi * rv * rv
        cdf = np.cumsum([lateral, cap, cap])
        cdf /= cdf[-1]
        region = np.searchsorted(cdf, u, side="right")
        phi = 2.0 * np.pi * uphi
        n = u.shape[0]
        coef_r = np.empty((2, n))  # x, y multipliers of r
        coef_h = np.empty(n)  # z multiplier of h
        m = region == 0
        coef_r[0, m] = np.cos(phi[m])
        coef_r[1, m] = np.sin(phi[m])
        coef_h[m] = 2.0 * v[m] - 1.0
        for reg, sign in ((1, 1.0), (2, -1.0)):
            m = region == reg
            rho = np.sqrt(v[m])
            coef_r[0, m] = rho * np.cos(phi[m])
            coef_r[1, m] = rho * np.sin(phi[m])
            coef_h[m] = sign
        return r * coef_r[0], r * coef_r[1], h * coef_h

    def mesh_local(self, params, resolution: int = 64) -> TriMesh:
        r, h = params
        k = int(resolution)
        phi = 2.0 * np.pi * np.arange(k) / k
        bottom = np.column_stack([r * np.cos(phi), r * np.sin(phi), np.full(k, -h)])
        top = bottom.copy()
        top[:, 2] = h
        verts = np.vstack([bottom, top, [[0.0, 0.0, -h]], [[0.0, 0.0, h]]])
        tris = []
        for i in range(k):
            j = (i + 1) % k
            tris.append([i, j, k + j])
            tris.append([i, k + j, k + i])
            tris.append([2 * k, j, i])  # bottom cap, normal -z
            tris.append([2 * k + 1, k + i, k + j])  # top cap, normal +z
        return TriMesh(verts, np.array(tris))

    def moment_init(self, points):
        mu, evals, axes, degenerate = principal_frame(points)
        if degenerate:
            rot = np.eye(3)
        else:
            # symmetry axis = most isolated eigenvalue
            if evals[1] - evals[0] > evals[2] - evals[1]:
                z_axis, x_axis = axes[:, 0], axes[:, 2]
            else:
                z_axis, x_axis = axes[:, 2], axes[:, 0]
            rot = _right_handed(x_axis, z_axis)
        local = (points - mu) @ rot
        h = (local[:, 2].max() - local[:, 2].min()) / 2.0
        rho = np.hypot(local[:, 0], local[:, 1])
        r = float(np.percentile(rho, 70.0))
        params = self.schema.project([r, h])
        return params, Pose(rot, mu), degenerate

    def grasp(self, params, affordance_id, selector,
              max_width=DEFAULT_MAX_GRIP_WIDTH):
        if affordance_id != "diameter_pinch":
            raise UnknownAffordanceError(affordance_id)
        r, h = (float(v) for v in params)
        if 2.0 * r > max_width:
            return None
        center = np.array([0.0, 0.0, (2.0 * selector - 1.0) * 0.8 * h])
        grip = np.array([1.0, 0.0, 0.0])
        x_col = np.array([0.0, 0.0, 1.0])
        y_col = np.cross(grip, x_col)
        return Grasp(Pose(np.column_stack([x_col, y_col, grip]), center), 2.0 * r, grip)

    def force_field(self, params, affordance_id):
        raise UnknownAffordanceError(affordance_id)

    def canonical(self, params, pose):
        return np.asarray(params, dtype=float), _spin_canonical_pose(pose)


# -- ring (torus) ------------------------------------------------------------------


class Ring(Template):
    """Torus: major radius, tube radius, axis +z."""

    id = "ring"
    kind = "geometric"
    schema = ParamSchema((_length_entry("major_radius"), _length_entry("tube_radius")))
    affordances = (Affordance("tube_pinch", "grasp"),)

    def structure(self, params, x, y, z):
        big_r, tube = params
        q = dm.sqrt(x * x + y * y) - big_r
        return dm.sqrt(q * q + z * z) - tube

    distance = structure

    def surface_area(self, params) -> float:
        big_r, tube = params
        return float(4.0 * np.pi * np.pi * big_r * tube)

    def _tube_angles(self, big_r, tube, u):
        """Inverse-CDF of the torus area density via Newton iteration."""
        psi = 2.0 * np.pi * u
        target = 2.0 * np.pi * big_r * u
        for _ in range(12):
            g = big_r * psi + tube * np.sin(psi) - target
            dg = np.maximum(big_r + tube * np.cos(psi), 1e-9)
            psi = psi - g / dg
        return psi

    def sample_local(self, params, n, rng):
        big_r, tube = params
        phi = 2.0 * np.pi * rng.random(n)
        psi = self._tube_angles(big_r, tube, rng.random(n))
        rho = big_r + tube * np.cos(psi)
        pts = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), tube * np.sin(psi)])
        return pts, None

    def coverage_draws(self, n, rng):
        return rng.random(n), rng.random(n)

    def coverage_points(self, params, draws):
        uphi, upsi = draws
        big_r, tube = params
        rv = float(dm.value_of(big_r)[0]) if isinstance(big_r, dm.Dual) else float(big_r)
        tv = float(dm.value_of(tube)[0]) if isinstance(tube, dm.Dual) else float(tube)
        phi = 2.0 * np.pi * uphi
        psi = self._tube_angles(rv, tv, upsi)
        cphi, sphi = np.cos(phi), np.sin(phi)
        cpsi, spsi = np.cos(psi), np.sin(psi)
        x = big_r * cphi + tube * (cpsi * cphi)
        y = big_r * sphi + tube * (cpsi * sphi)
        z = tube * spsi
        return x, y, z

    def mesh_local(self, params, resolution: int = 64) -> TriMesh:
        big_r, tube = params
        k = int(resolution)
        phi = 2.0 * np.pi * np.arange(k) / k
        psi = 2.0 * np.pi * np.arange(k) / k
        cphi, sphi = np.cos(phi)[:, None], np.sin(phi)[:, None]
        cpsi, spsi = np.cos(psi)[None, :], np.sin(psi)[None, :]
        rho = big_r + tube * cpsi
        verts = np.stack(
            [
                (rho * cphi).ravel(),
                (rho * sphi).ravel(),
                np.broadcast_to(tube * spsi, (k, k)).ravel(),
            ],
            axis=1,
        )
        tris = []
        for i in range(k):
            inext = (i + 1) % k
            for j in range(k):
                jnext = (j + 1) % k
                v00, v01 = i * k + j, i * k + jnext
                v10, v11 = inext * k + j, inext * k + jnext
                tris.append([v00, v10, v11])
                tris.append([v00, v11, v01])
        return TriMesh(verts, np.array(tris))

    def moment_init(self, points):
        mu, evals, axes, degenerate = principal_frame(points)
        if degenerate:
            rot = np.eye(3)
        else:
            rot = _right_handed(axes[:, 2], axes[:, 0])  # axis = least variance
        local = (points - mu) @ rot
        rho = np.hypot(local[:, 0], local[:, 1])
        big_r = float(np.median(rho))
        tube = float(np.mean(np.abs(local[:, 2])) * np.pi / 2.0)
        tube = min(max(tube, _LEN_LO), 0.9 * max(big_r, _LEN_LO * 2))
        params = self.schema.project([big_r, tube])
        return params, Pose(rot, mu), degenerate

    def grasp(self, params, affordance_id, selector,
              max_width=DEFAULT_MAX_GRIP_WIDTH):
        if affordance_id != "tube_pinch":
            raise UnknownAffordanceError(affordance_id)
        big_r, tube = (float(v) for v in params)
        if 2.0 * tube > max_width:
            return None
        theta = 2.0 * np.pi * selector
        center = np.array([big_r * np.cos(theta), big_r * np.sin(theta), 0.0])
        grip = np.array([0.0, 0.0, 1.0])
        x_col = np.array([-np.sin(theta), np.cos(theta), 0.0])
        y_col = np.cross(grip, x_col)
        return Grasp(Pose(np.column_stack([x_col, y_col, grip]), center), 2.0 * tube, grip)

    def force_field(self, params, affordance_id):
        raise UnknownAffordanceError(affordance_id)

    def canonical(self, params, pose):
        return np.asarray(params, dtype=float), _spin_canonical_pose(pose)
