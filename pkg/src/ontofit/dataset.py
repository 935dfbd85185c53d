"""Synthetic articulated-scene dataset generation.

Each scene is one moving instance on a one-DOF joint plus a static base
body, rendered as a corresponding before/after cloud pair.  Scene i derives
its seed as ``seed + i`` so generation is reproducible and order-independent
under any parallel schedule.
"""

from __future__ import annotations

import dataclasses
import json
import os

import numpy as np

from .cloud import CloudPair, read_ply, write_ply
from .config import DatasetConfig, NoiseConfig, config_json
from .errors import ParseError
from .geometry import Pose, random_rotation
from .render import SceneSpec, augment_pair, partial_scan_indices, render_pair
from .templates import Instance, KinematicParams, instance_from_dict, instance_to_dict

_PARAM_RANGES = {
    # thin dimensions stay graspable under the default max grip width
    "cuboid": [(0.15, 0.35), (0.08, 0.2), (0.012, 0.035)],
    "cylinder": [(0.015, 0.035), (0.15, 0.4)],
    "ring": [(0.08, 0.2), (0.012, 0.035)],
    "handle": [(0.06, 0.14), (0.012, 0.03), (0.1, 0.25)],
    "lever": [(0.1, 0.25), (0.05, 0.12), (0.012, 0.03), (0.08, 0.2)],
}


def _random_unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def _bounding_radius(inst: Instance) -> float:
    verts = inst.template.mesh_local(inst.params, resolution=16).vertices
    return float(np.max(np.linalg.norm(verts, axis=1)))


def random_scene(cfg: DatasetConfig, noise: NoiseConfig, rng: np.random.Generator
                 ) -> SceneSpec:
    tid = str(rng.choice(list(cfg.templates), p=np.array(cfg.weights) / sum(cfg.weights)))
    ranges = _PARAM_RANGES[tid]
    params = np.array([rng.uniform(lo, hi) for lo, hi in ranges])
    pose = Pose(random_rotation(rng), rng.uniform(-0.3, 0.3, size=3))
    moving = Instance(tid, params, pose)
    radius = _bounding_radius(moving)

    if rng.random() < cfg.revolute_prob:
        axis = _random_unit(rng)
        side = _random_unit(rng)
        side = side - np.dot(side, axis) * axis
        side /= np.linalg.norm(side)
        pivot = pose.translation + side * (1.05 * radius)
        span = rng.uniform(*cfg.revolute_span)
        joint = KinematicParams("revolute", axis, pivot, (0.0, span))
    else:
        joint = KinematicParams(
            "prismatic", _random_unit(rng), np.zeros(3),
            (0.0, rng.uniform(*cfg.prismatic_span)),
        )

    base_params = rng.uniform(0.15, 0.3, size=3)
    offset_dir = _random_unit(rng)
    base_pose = Pose(
        random_rotation(rng),
        pose.translation + offset_dir * (radius + float(base_params.max()) + 0.15),
    )
    base = Instance("cuboid", base_params, base_pose)

    camera = pose.translation + cfg.camera_distance * _random_unit(rng)
    return SceneSpec(
        moving=moving,
        joint=joint,
        base=(base,),
        states=(0.0, 1.0),
        camera=camera,
        noise=noise if cfg.augment else None,
        partial=cfg.partial,
    )


# -- scene (de)serialization ------------------------------------------------------


def scene_to_dict(scene: SceneSpec) -> dict:
    return {
        "moving": instance_to_dict(scene.moving),
        "base": [instance_to_dict(b) for b in scene.base],
        "joint": {
            "kind": scene.joint.kind,
            "axis": [float(v) for v in scene.joint.axis],
            "pivot": [float(v) for v in scene.joint.pivot],
            "range": [float(v) for v in scene.joint.range],
        },
        "states": [float(s) for s in scene.states],
        "camera": [float(v) for v in scene.camera],
        "noise": dataclasses.asdict(scene.noise) if scene.noise else None,
        "partial": bool(scene.partial),
    }


def scene_from_dict(doc: dict) -> SceneSpec:
    try:
        joint = doc["joint"]
        return SceneSpec(
            moving=instance_from_dict(doc["moving"]),
            joint=KinematicParams(
                joint["kind"],
                np.array(joint["axis"], dtype=float),
                np.array(joint["pivot"], dtype=float),
                (float(joint["range"][0]), float(joint["range"][1])),
            ),
            base=tuple(instance_from_dict(b) for b in doc.get("base", [])),
            states=(float(doc["states"][0]), float(doc["states"][1])),
            camera=np.array(doc["camera"], dtype=float),
            noise=NoiseConfig(**doc["noise"]) if doc.get("noise") else None,
            partial=bool(doc.get("partial", False)),
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed scene record: {exc}") from exc


def render_scene_pair(scene: SceneSpec, n_points: int, seed: int) -> CloudPair:
    """Pair for one scene: sample, optional camera cull, optional corruption."""
    pair = render_pair(scene, n_points, seed)
    if scene.partial:
        # visibility fixed at the initial state so index correspondence holds
        idx = partial_scan_indices(pair.initial, scene.camera)
        pair = CloudPair(pair.initial.take(idx), pair.final.take(idx),
                         correspondence=True)
    if scene.noise is not None:
        pair = augment_pair(pair, scene.noise, seed + 1)
    return pair


def generate_dataset(cfg: dict, count: int, seed: int, out_dir) -> str:
    """Write ``count`` scene pairs plus a manifest; returns the manifest path.

    The manifest embeds the resolved config, the per-scene ground truth and
    the file names; rerunning with the same config and seed is byte-identical.
    """
    from .config import dataset_config, noise_config

    if count < 1:
        raise ValueError("count must be >= 1")
    ds_cfg = dataset_config(cfg)
    noise = noise_config(cfg)
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i in range(count):
        scene_seed = seed + i
        scene = random_scene(ds_cfg, noise, np.random.default_rng(scene_seed))
        pair = render_scene_pair(scene, ds_cfg.n_points, scene_seed)
        stem = f"scene_{i:04d}"
        init_name, final_name = f"{stem}_initial.ply", f"{stem}_final.ply"
        write_ply(os.path.join(out_dir, init_name), pair.initial)
        write_ply(os.path.join(out_dir, final_name), pair.final)
        entries.append(
            {
                "id": stem,
                "seed": scene_seed,
                "initial": init_name,
                "final": final_name,
                "correspondence": bool(pair.correspondence),
                "n_points": ds_cfg.n_points,
                "scene": scene_to_dict(scene),
            }
        )
    manifest = {
        "kind": "ontofit-dataset",
        "config": cfg,
        "seed": seed,
        "count": count,
        "scenes": entries,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def load_manifest(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if doc.get("kind") != "ontofit-dataset":
        raise ParseError(f"{path}: not a dataset manifest")
    return doc


def load_scene_pair(manifest_path, entry: dict) -> CloudPair:
    base_dir = os.path.dirname(os.path.abspath(manifest_path))
    initial = read_ply(os.path.join(base_dir, entry["initial"]))
    final = read_ply(os.path.join(base_dir, entry["final"]))
    return CloudPair(initial, final, correspondence=bool(entry["correspondence"]))
