"""Command-line surface: repair, skeleton, edge, metrics, synth.

Parameter precedence is flag > JSON config > built-in default.  Exit
codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .volume import read_nrrd, write_nrrd, NrrdError
from .morphology import skeletonize, edge_map, distance_transform, StructuringElement
from .skeleton import build_graph, graph_to_json_dict
from .metrics import topology_report
from .pipeline import repair, RepairParams
from .synth import SynthParams, generate_tree, fracture


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


_PARAM_DEFAULTS = {
    "epsilon": math.sqrt(2.0),
    "d_max": 30.0,
    "window": 7,
    "sigma": None,
    "delta": 0.05,
    "n_surface_samples": 32,
    "nsd_tolerance": None,
    "seed": 0,
}


def _add_param_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file with parameter defaults")
    p.add_argument("--epsilon", type=float, help=f"TFD acceptance bound (default {_PARAM_DEFAULTS['epsilon']:.8f})")
    p.add_argument("--d-max", type=float, help="endpoint distance gate in voxels (default 30)")
    p.add_argument("--window", type=int, help="endpoint chain window in voxels (default 7)")
    p.add_argument("--sigma", type=float, help="speed-field smoothing in mm (default 2*min spacing)")
    p.add_argument("--delta", type=float, help="speed-field floor (default 0.05)")
    p.add_argument("--n-surface-samples", type=int, help="samples per connector curve (default 32)")
    p.add_argument("--nsd-tolerance", type=float, help="NSD tolerance in mm (default min spacing)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")


def _resolve_params(args) -> dict:
    values = dict(_PARAM_DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path) as fh:
                cfg = json.load(fh)
        except FileNotFoundError:
            raise SystemExit(_fail(2, f"config file not found: {config_path}"))
        except json.JSONDecodeError as exc:
            raise SystemExit(_fail(2, f"malformed config {config_path}: {exc}"))
        unknown = set(cfg) - set(values)
        if unknown:
            raise SystemExit(_fail(1, f"unknown config keys: {sorted(unknown)}"))
        values.update(cfg)
    for key in values:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            values[key] = flag_val
    return values


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load(path):
    try:
        return read_nrrd(path)
    except FileNotFoundError:
        raise SystemExit(_fail(2, f"input file not found: {path}"))
    except NrrdError as exc:
        raise SystemExit(_fail(2, f"cannot read {path}: {exc}"))


def _repair_params(values) -> RepairParams:
    return RepairParams(
        epsilon=values["epsilon"], d_max_vox=values["d_max"], window=values["window"],
        sigma=values["sigma"], delta=values["delta"],
        n_surface=values["n_surface_samples"])


def _cmd_repair(args) -> int:
    values = _resolve_params(args)
    vol = _load(args.input)
    out, report = repair(vol, _repair_params(values))
    write_nrrd(out, args.output, encoding=args.encoding)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
    print(f"repair: {len(report.connections)} connection(s), "
          f"{len(report.trees_unconnected)} tree(s) left unconnected")
    return 0


def _cmd_skeleton(args) -> int:
    vol = _load(args.input)
    skel = skeletonize(vol)
    write_nrrd(skel, args.output, encoding=args.encoding)
    if args.graph_json:
        graph = build_graph(skel, distance_transform(vol))
        with open(args.graph_json, "w") as fh:
            json.dump(graph_to_json_dict(graph), fh, indent=2)
    print(f"skeleton: {int(skel.data.sum())} voxel(s)")
    return 0


def _cmd_edge(args) -> int:
    vol = _load(args.input)
    se = StructuringElement(args.se_shape, args.se_radius)
    out = edge_map(vol, se)
    write_nrrd(out, args.output, encoding=args.encoding)
    print(f"edge: {int(out.data.sum())} boundary voxel(s)")
    return 0


def _cmd_metrics(args) -> int:
    values = _resolve_params(args)
    pred = _load(args.pred)
    gt = _load(args.gt)
    try:
        report = topology_report(pred, gt, tol=values["nsd_tolerance"])
    except ValueError as exc:
        return _fail(2, str(exc))
    text = json.dumps(report.to_dict(), indent=2)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_synth(args) -> int:
    values = _resolve_params(args)
    params = SynthParams(seed=values["seed"], dims=tuple(args.dims),
                         depth=args.depth, radius_root=args.radius_root)
    vol, gt = generate_tree(params)
    cut_log = []
    if args.fractures > 0:
        vol, cut_log = fracture(vol, gt, args.fractures, seed=values["seed"])
    write_nrrd(vol, args.output, encoding=args.encoding)
    if args.gt_json:
        with open(args.gt_json, "w") as fh:
            json.dump(gt.to_dict(), fh, indent=2)
    if args.cut_log:
        with open(args.cut_log, "w") as fh:
            json.dump(cut_log, fh, indent=2)
    print(f"synth: {gt.branch_count} branch(es), {args.fractures} fracture(s), "
          f"{int(vol.data.sum())} foreground voxel(s)")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="vesselmend",
                     description="Repair fractured 3D vessel segmentations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("repair", help="repair a fractured segmentation", parents=[])
    p.add_argument("--input", required=True, help="input segmentation (NRRD mask)")
    p.add_argument("--output", required=True, help="repaired segmentation (NRRD)")
    p.add_argument("--report", help="write the repair report JSON here")
    p.add_argument("--encoding", choices=("raw", "gzip"), default="raw")
    _add_param_flags(p)
    p.set_defaults(func=_cmd_repair)

    p = sub.add_parser("skeleton", help="thin a mask to its skeleton")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--graph-json", help="dump the classified skeleton graph as JSON")
    p.add_argument("--encoding", choices=("raw", "gzip"), default="raw")
    p.set_defaults(func=_cmd_skeleton)

    p = sub.add_parser("edge", help="morphological edge map |dilate - erode|")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--se-shape", choices=("cross6", "cube26"), default="cross6")
    p.add_argument("--se-radius", type=int, default=1)
    p.add_argument("--encoding", choices=("raw", "gzip"), default="raw")
    p.set_defaults(func=_cmd_edge)

    p = sub.add_parser("metrics", help="topology/overlap metrics for a pred/gt pair")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--output", help="write the report JSON here (default: stdout)")
    _add_param_flags(p)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("synth", help="generate a synthetic vessel tree")
    p.add_argument("--output", required=True, help="volume output (NRRD)")
    p.add_argument("--gt-json", help="ground-truth JSON output")
    p.add_argument("--cut-log", help="fracture log JSON output")
    p.add_argument("--dims", type=int, nargs=3, default=[128, 128, 128])
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--radius-root", type=float, default=4.0)
    p.add_argument("--fractures", type=int, default=0)
    p.add_argument("--encoding", choices=("raw", "gzip"), default="raw")
    _add_param_flags(p)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except OSError as exc:
        return _fail(2, str(exc))


if __name__ == "__main__":
    sys.exit(main())
