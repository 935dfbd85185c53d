"""Configuration dataclasses and the defaults <- file <- flags merge.

Every command resolves one nested config dict and embeds it verbatim in its
output manifest/report, so any artifact can be reproduced byte-for-byte
from the config it carries.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

from .errors import ParseError

CONFIG_ENV_VAR = "ONTOFIT_CONFIG"


@dataclass(frozen=True)
class NoiseConfig:
    """Cloud corruption: jitter is relative to the cloud bounding radius."""

    sigma_rel: float = 0.01
    dropout: float = 0.2
    outliers: float = 0.02


@dataclass(frozen=True)
class FitConfig:
    starts: int = 8
    max_iters: int = 500
    explore_iters: int = 120  # per-start budget before the winner is polished
    base_step: float = 0.05
    plateau_decay: float = 0.5
    converge_rel: float = 1e-6
    converge_window: int = 10
    coverage_weight: float = 1.0
    coverage_samples: int = 512
    coverage_margin_factor: float = 3.0  # dead zone in median-neighbor-spacing units
    max_cloud_points: int = 1024  # optimization subsample; reported loss uses all
    model_penalty: float = 1e-4  # per-parameter complexity penalty for ranking
    low_confidence: float = 1e-2  # all scores above this flags the ranking
    refine_passes: int = 2  # composite per-child refinement passes
    seed: int = 0

    def __post_init__(self):
        if self.starts < 1:
            raise ValueError("starts must be >= 1")
        for name in ("max_iters", "converge_window", "coverage_samples",
                     "max_cloud_points"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Tolerances:
    grasp_eps: float = 0.05  # grasp center to true surface
    track_eps: float = 0.05  # waypoint deviation from the true joint manifold
    theta_min: float = 0.05  # rad; rotation below this is not revolute
    d_min: float = 0.01  # units; translation below this is not prismatic
    move_tau: float = 0.02  # per-point displacement threshold for segmentation
    max_grip_width: float = 0.08
    success_fraction: float = 0.8
    hpr_radius_factor: float = 100.0


@dataclass(frozen=True)
class DatasetConfig:
    """Distribution of generated articulated scenes."""

    n_points: int = 2048
    templates: tuple[str, ...] = ("cuboid", "cylinder", "ring", "handle", "lever")
    weights: tuple[float, ...] = (0.3, 0.2, 0.2, 0.15, 0.15)
    revolute_prob: float = 0.5
    revolute_span: tuple[float, float] = (0.5, 1.5707963267948966)
    prismatic_span: tuple[float, float] = (0.2, 0.6)
    camera_distance: float = 5.0
    partial: bool = False  # apply hidden-point removal from the camera
    augment: bool = False  # apply the noise config to each pair


@dataclass(frozen=True)
class BenchmarkConfig:
    jobs: int = 1
    candidates: tuple[str, ...] = ("cuboid", "cylinder", "ring", "handle", "lever")
    selector_grid: int = 9  # grasp selector values tried during discovery
    waypoints: int = 32
    target_fraction: float = 1.0
    adaptive_tau: bool = True  # scale segmentation threshold with displacement


_SECTIONS = {
    "fit": FitConfig,
    "noise": NoiseConfig,
    "tolerances": Tolerances,
    "dataset": DatasetConfig,
    "benchmark": BenchmarkConfig,
}


def default_config() -> dict:
    cfg = {name: dataclasses.asdict(cls()) for name, cls in _SECTIONS.items()}
    cfg["seed"] = 0
    return cfg


def merge_config(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge_config(out[key], value)
        else:
            out[key] = value
    return out


def load_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: config must be a JSON object")
    return doc


def resolve_config(file_path=None, overrides: dict | None = None) -> dict:
    """defaults <- config file (or $ONTOFIT_CONFIG) <- explicit overrides."""
    cfg = default_config()
    if file_path is None:
        file_path = os.environ.get(CONFIG_ENV_VAR) or None
    if file_path:
        cfg = merge_config(cfg, load_config_file(file_path))
    if overrides:
        cfg = merge_config(cfg, overrides)
    return cfg


def _section(cfg: dict, name: str):
    cls = _SECTIONS[name]
    data = dict(cfg.get(name, {}))
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - fields
    if unknown:
        raise ParseError(f"config section {name!r}: unknown keys {sorted(unknown)}")
    for f in dataclasses.fields(cls):
        if f.name in data and isinstance(f.default, tuple):
            data[f.name] = tuple(data[f.name])
    return cls(**data)


def fit_config(cfg: dict) -> FitConfig:
    return _section(cfg, "fit")


def noise_config(cfg: dict) -> NoiseConfig:
    return _section(cfg, "noise")


def tolerances(cfg: dict) -> Tolerances:
    return _section(cfg, "tolerances")


def dataset_config(cfg: dict) -> DatasetConfig:
    return _section(cfg, "dataset")


def benchmark_config(cfg: dict) -> BenchmarkConfig:
    return _section(cfg, "benchmark")


def config_json(cfg: dict) -> str:
    """Canonical serialized form (stable key order) for embedding in outputs."""
    return json.dumps(cfg, sort_keys=True, indent=2)
