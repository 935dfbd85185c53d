"""Command-line entry points.

Commands: generate, fit, discover, bench, export-mesh.  Configuration
resolves defaults <- config file (--config or $ONTOFIT_CONFIG) <- flags, and
the resolved config is embedded in every output artifact so any run can be
reproduced byte-for-byte.  Exit codes: 0 success, 1 runtime failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import __version__
from .config import config_json, fit_config, resolve_config, tolerances
from .errors import OntofitError


def _positive_int(value: str) -> int:
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {value!r}")
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ontofit",
        description="Differentiable concept templates: synthesize, fit, "
                    "discover and benchmark articulated point-cloud scenes.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (or $ONTOFIT_CONFIG)")
    common.add_argument("--seed", type=int, default=None, help="override config seed")

    p = sub.add_parser("generate", parents=[common],
                       help="synthesize an articulated-scene dataset")
    p.add_argument("--count", type=_positive_int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--augment", action="store_true",
                   help="apply the configured noise to every pair")
    p.add_argument("--partial", action="store_true",
                   help="keep only the camera-visible subset")

    p = sub.add_parser("fit", parents=[common],
                       help="fit a template (or identify one) on a cloud")
    p.add_argument("cloud", help="input PLY file")
    p.add_argument("--template", default="auto",
                   help='template id, or "auto" for identification')
    p.add_argument("--out", help="write the fit result JSON here")
    p.add_argument("--mesh", help="also export the fitted mesh as OBJ")

    p = sub.add_parser("discover", parents=[common],
                       help="full concept discovery on an observation pair")
    p.add_argument("initial", help="initial-state PLY")
    p.add_argument("final", help="final-state PLY")
    p.add_argument("--out", help="write the discovery result JSON here")
    p.add_argument("--no-correspondence", action="store_true",
                   help="clouds are not index-aligned")

    p = sub.add_parser("bench", parents=[common],
                       help="closed-loop benchmark over a dataset manifest")
    p.add_argument("manifest", help="dataset manifest.json")
    p.add_argument("--out", help="write the report JSON here")
    p.add_argument("--jobs", type=_positive_int, default=None)
    p.add_argument("--gt-bypass", action="store_true",
                   help="plan from ground truth (sanity upper bound)")

    p = sub.add_parser("export-mesh", parents=[common],
                       help="mesh a serialized instance as OBJ")
    p.add_argument("instance", help="instance JSON file")
    p.add_argument("--out", required=True, help="output OBJ path")
    p.add_argument("--resolution", type=_positive_int, default=64)

    return parser


def _resolved(args) -> dict:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = int(args.seed)
    return resolve_config(args.config, overrides)


def cmd_generate(args) -> int:
    from .dataset import generate_dataset

    cfg = _resolved(args)
    ds = dict(cfg.get("dataset", {}))
    if args.augment:
        ds["augment"] = True
    if args.partial:
        ds["partial"] = True
    cfg["dataset"] = ds
    path = generate_dataset(cfg, args.count, int(cfg["seed"]), args.out)
    print(path)
    return 0


def _instance_payload(result) -> dict:
    from .templates import instance_to_dict

    return {
        "instance": instance_to_dict(result.instance),
        "loss": result.loss,
        "residual_mean": result.residual_mean,
        "residual_max": result.residual_max,
        "start_index": result.start_index,
        "degenerate_init": result.degenerate_init,
        "traces": [[i, loss] for i, loss in result.traces],
    }


def cmd_fit(args) -> int:
    from .cloud import read_ply
    from .fit import fit_parameters, identify_ontology
    from .render import render_mesh
    from .cloud import write_obj
    from .templates import geometric_templates, get_template

    cfg = _resolved(args)
    fc = dataclasses.replace(fit_config(cfg), seed=int(cfg["seed"]))
    cloud = read_ply(args.cloud)
    payload = {
        "kind": "ontofit-fit",
        "config": cfg,
        "cloud": os.path.basename(args.cloud),
        "mode": args.template,
    }
    if args.template == "auto":
        ident = identify_ontology(cloud, geometric_templates(), fc)
        best = ident.best_fit
        payload["ranking"] = [
            {"template": tid, "score": score,
             "loss": None if fr is None else fr.loss}
            for tid, fr, score in ident.ranking
        ]
        payload["low_confidence"] = ident.low_confidence
        result = best
    else:
        result = fit_parameters(get_template(args.template), cloud, fc)
    payload["result"] = _instance_payload(result)

    tpl = result.instance.template
    params = ", ".join(
        f"{n}={v:.6g}" for n, v in zip(tpl.schema.names, result.instance.params)
    )
    print(f"template: {result.instance.template_id}")
    print(f"params: {params}")
    print(f"loss: {result.loss:.6e}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
    if args.mesh:
        write_obj(args.mesh, render_mesh(result.instance))
    return 0


def cmd_discover(args) -> int:
    from .cloud import CloudPair, read_ply
    from .discovery import discover
    from .config import benchmark_config
    from .templates import get_template, instance_to_dict

    cfg = _resolved(args)
    fc = dataclasses.replace(fit_config(cfg), seed=int(cfg["seed"]))
    tol = tolerances(cfg)
    bench = benchmark_config(cfg)
    pair = CloudPair(
        read_ply(args.initial), read_ply(args.final),
        correspondence=not args.no_correspondence,
    )
    candidates = [get_template(t) for t in bench.candidates]
    result = discover(pair, candidates, fc, tol,
                      selector_grid=bench.selector_grid,
                      adaptive_tau=bench.adaptive_tau)
    joint = result.joint
    payload = {
        "kind": "ontofit-discovery",
        "config": cfg,
        "inputs": [os.path.basename(args.initial), os.path.basename(args.final)],
        "template": result.instance.template_id,
        "instance": instance_to_dict(result.instance),
        "joint": {
            "kind": joint.kind,
            "axis": [float(v) for v in joint.axis],
            "pivot": [float(v) for v in joint.pivot],
            "range": [float(v) for v in joint.range],
        },
        "grasp": {
            "affordance": result.grasp_affordance,
            "selector": result.grasp_selector,
            "pose": [float(v) for v in result.grasp.pose.as_affine().ravel()],
            "width": result.grasp.width,
        },
        "diagnostics": result.diagnostics,
    }
    print(f"template: {result.instance.template_id}")
    print(f"joint: {joint.kind} axis=({joint.axis[0]:.4f}, {joint.axis[1]:.4f}, "
          f"{joint.axis[2]:.4f}) range={joint.span:.4f}")
    print(f"grasp: {result.grasp_affordance} @ {result.grasp_selector:.2f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return 0


def cmd_bench(args) -> int:
    from .discovery import run_benchmark

    cfg = _resolved(args)
    report = run_benchmark(args.manifest, cfg, jobs=args.jobs,
                           gt_bypass=args.gt_bypass, out_path=args.out)
    agg = report["aggregate"]
    print(f"scenes: {agg['scenes']}")
    print(f"success rate: {100.0 * agg['success_rate']:.1f}%")
    if agg["identification_accuracy"] is not None:
        print(f"identification: {100.0 * agg['identification_accuracy']:.1f}%")
    return 0


def cmd_export_mesh(args) -> int:
    from .cloud import write_obj
    from .render import render_mesh
    from .templates import parse_instance

    with open(args.instance, "r", encoding="utf-8") as fh:
        inst = parse_instance(fh.read())
    write_obj(args.out, render_mesh(inst, resolution=args.resolution))
    print(args.out)
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "discover": cmd_discover,
    "bench": cmd_bench,
    "export-mesh": cmd_export_mesh,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (OntofitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
