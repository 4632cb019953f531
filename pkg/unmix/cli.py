# -*- coding: utf-8 -*-
# UnmixStereo - python program that recovers a stereo pair and its disparity maps
# from a single mixture image.
#
# Copyright (C) 2026 The UnmixStereo Development Team.
#
# This file is part of UnmixStereo.
#
# UnmixStereo is free software; you can redistribute it and/or
# modify it under the terms of the GNU General Public License
# as published by the Free Software Foundation; either version 3
# of the License, or (at your option) any later version.
#
# UnmixStereo is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, see <http://www.gnu.org/licenses/>
#
# ---
r"""
Command-line interface ``unmix-stereo``.

Subcommands
-----------
compose   - compose a mixture from a stereo pair.
unmix     - recover the pair and both disparity maps from a mixture.
colorize  - recover the unobserved anaglyph channels from given disparities.
oracle    - brute-force disparities of a clean pair.
evaluate  - compare a prediction directory against ground truth.
bench     - compose, recover and evaluate every pair of a dataset directory.
synth     - write a synthetic dataset with known disparities.

Every command writes ``report.json`` (a RunReport) into ``--out`` and exits with 0 if no error
occurred, 1 otherwise.

"""

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field
from timeit import default_timer as timer

import numpy as np

from unmix._io import (
    load_image, load_kitti_disparity, load_pfm, save_image, save_kitti_disparity, save_pfm,
)
from unmix._version import __version__
from unmix.config import config_from_dict, config_snapshot, load_config
from unmix.image import DepthMap, DisparityMap
from unmix.metrics import (
    bad_pixel_ratio, disparity_to_depth, evaluate_depth, evaluate_disparity, evaluate_separation,
    psnr,
)
from unmix.mixture import Anaglyph, get_operator
from unmix.oracle import colorize_anaglyph, estimate_disparity_pair
from unmix.plot import plot_loss_trace
from unmix.solver import SolverConfig, SolverDivergenceError, ablate_separation_only, solve
from unmix.synthetic import write_scene_suite


__all__ = ["RunReport", "build_parser", "main"]


logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
_OPERATORS = ("anaglyph", "double", "mono-left", "mono-right")
_IMAGE_EXTENSIONS = (".png", ".ppm", ".pgm")


@dataclass
class RunReport:
    r"""
    Record of one command run, written as JSON.

    Attributes
    ----------
    command : str
        The subcommand.
    inputs : dict
        Input paths.
    operator : str or None
        Operator kind, if the command uses one.
    config : dict
        Flat configuration snapshot; reloading it reproduces the run.
    metrics : dict
        Metric objects, possibly nested per item.
    timing : dict
        Wall-clock seconds per phase. The only non-deterministic field.
    artifacts : dict
        Written files.
    checksums : dict
        SHA-256 digests of written files.
    items : list of dict
        Per-item status of multi-item commands.
    warnings, errors : list of str
        Warnings raised and errors caught during the run.
    status : str
        "ok" or "error".

    """

    command: str
    inputs: dict = field(default_factory=dict)
    operator: str = None
    config: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    checksums: dict = field(default_factory=dict)
    items: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    status: str = "ok"
    schema_version: str = SCHEMA_VERSION
    version: str = __version__

    def fail(self, message):
        r"""Record an error and mark the run as failed."""
        logger.error(message)
        self.errors.append(str(message))
        self.status = "error"

    def to_json(self):
        r"""Serialize with sorted keys."""
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_to_builtin)

    def write(self, path):
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.to_json() + "\n")


def _to_builtin(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value)} is not JSON serializable.")


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _record(report, name, path):
    report.artifacts[name] = path
    report.checksums[name] = _sha256(path)


def _resolve_config(args):
    cfg = load_config(args.config) if args.config else SolverConfig()
    overrides = {"seed": args.seed, "d_max": args.d_max, "levels": args.levels,
                 "iters_per_level": args.iters, "step_size": args.step_size}
    return config_from_dict({key: val for key, val in overrides.items() if val is not None}, cfg)


def _load_disparity(path, scale=1.0):
    if path.lower().endswith(".pfm"):
        return load_pfm(path, scale)
    disp = load_kitti_disparity(path)
    if scale != 1.0:
        disp = DisparityMap(disp.values * scale, disp.valid)
    return disp


def _write_trace(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _write_disparities(report, out, d_left, d_right, prefix="disp"):
    for name, disp in (("left", d_left), ("right", d_right)):
        pfm = os.path.join(out, f"{prefix}_{name}.pfm")
        png = os.path.join(out, f"{prefix}_{name}.png")
        save_pfm(disp, pfm)
        save_kitti_disparity(disp, png)
        _record(report, f"{prefix}_{name}_pfm", pfm)
        _record(report, f"{prefix}_{name}_png", png)


def cmd_compose(args, report):
    r"""Compose a mixture from a stereo pair."""
    op = get_operator(args.operator)
    report.operator = op.kind
    report.inputs = {"left": args.left, "right": args.right}
    start = timer()
    left, right = load_image(args.left), load_image(args.right)
    mixture = op.compose(left, right)
    report.timing["compose"] = timer() - start
    path = os.path.join(args.out, args.name)
    save_image(mixture, path, args.bit_depth)
    _record(report, "mixture", path)
    report.metrics["constraint_residual"] = op.constraint_residual(mixture, left, right)


def cmd_unmix(args, report):
    r"""
    Recover the stereo pair and disparities from a mixture and write every output.

    If the solve diverges, the loss trace recorded so far is still written before the error
    propagates.
    """
    op = get_operator(args.operator)
    cfg = _resolve_config(args)
    report.operator = op.kind
    report.inputs = {"mixture": args.mixture}
    report.config = config_snapshot(cfg)
    mixture = load_image(args.mixture)

    start = timer()
    try:
        if args.ablate_separation_only:
            solution = ablate_separation_only(mixture, op, cfg)
        else:
            solution = solve(mixture, op, cfg)
    except SolverDivergenceError as error:
        report.timing["solve"] = timer() - start
        if error.trace:
            trace = os.path.join(args.out, "loss_trace.csv")
            _write_trace(error.trace, trace)
            _record(report, "loss_trace", trace)
        raise
    report.timing["solve"] = timer() - start

    out = args.out
    for name, image in (("left", solution.left), ("right", solution.right)):
        path = os.path.join(out, f"{name}.png")
        save_image(image, path, args.bit_depth)
        _record(report, name, path)
    if isinstance(op, Anaglyph):
        start = timer()
        left, right = colorize_anaglyph(mixture, solution.d_left, solution.d_right)
        report.timing["colorize"] = timer() - start
        for name, image in (("left_colorized", left), ("right_colorized", right)):
            path = os.path.join(out, f"{name}.png")
            save_image(image, path, args.bit_depth)
            _record(report, name, path)
    _write_disparities(report, out, solution.d_left, solution.d_right)

    rows = solution.trace_rows()
    trace = os.path.join(out, "loss_trace.csv")
    _write_trace(rows, trace)
    _record(report, "loss_trace", trace)
    if args.plot:
        figure = os.path.join(out, "loss_trace.png")
        plot_loss_trace(rows, figure)
        report.artifacts["loss_trace_plot"] = figure

    report.metrics.update({
        "initial_loss": solution.initial_loss.as_dict(),
        "final_loss": solution.final_loss.as_dict(),
        "constraint_residual": op.constraint_residual(mixture, solution.left, solution.right),
        "diagnostics": {key: val for key, val in solution.diagnostics.items()
                        if key != "warnings"},
    })


def cmd_colorize(args, report):
    r"""Recover the unobserved anaglyph channels from given disparity maps."""
    report.operator = Anaglyph.kind
    report.inputs = {"mixture": args.mixture, "d_left": args.d_left, "d_right": args.d_right}
    mixture = load_image(args.mixture)
    d_left = _load_disparity(args.d_left, args.scale)
    d_right = _load_disparity(args.d_right, args.scale)
    start = timer()
    left, right = colorize_anaglyph(mixture, d_left, d_right, tau=args.tau)
    report.timing["colorize"] = timer() - start
    for name, image in (("left_colorized", left), ("right_colorized", right)):
        path = os.path.join(args.out, f"{name}.png")
        save_image(image, path, args.bit_depth)
        _record(report, name, path)


def cmd_oracle(args, report):
    r"""Estimate the disparities of a clean pair by exhaustive matching."""
    cfg = _resolve_config(args)
    report.inputs = {"left": args.left, "right": args.right}
    report.config = config_snapshot(cfg)
    left, right = load_image(args.left), load_image(args.right)
    start = timer()
    d_left, d_right = estimate_disparity_pair(left, right, cfg.d_max, cfg.weights,
                                              args.aggregation)
    report.timing["oracle"] = timer() - start
    _write_disparities(report, args.out, d_left, d_right)
    if args.gt:
        report.inputs["gt"] = args.gt
        report.metrics.update(evaluate_disparity(d_left, _load_disparity(args.gt, args.scale)))


def _scene_key(stem):
    for side in ("left", "right"):
        if stem.endswith(f"_{side}"):
            return stem[:-len(side) - 1], side
    return stem, None


def _common_files(pred_dir, gt_dir, extensions, report):
    def _listing(directory):
        if not os.path.isdir(directory):
            raise FileNotFoundError(f"Directory {directory} does not exist.")
        return {name for name in os.listdir(directory)
                if os.path.splitext(name)[1].lower() in extensions}

    pred, gt = _listing(pred_dir), _listing(gt_dir)
    for name in sorted(gt - pred):
        report.fail(f"Prediction {name} is missing from {pred_dir}.")
        report.items.append({"name": name, "status": "missing"})
    common = sorted(pred & gt)
    if not common:
        raise ValueError(f"Directories {pred_dir} and {gt_dir} share no files.")
    return common


def _evaluate_item(args, pred_path, gt_path, name):
    if args.kind == "separation":
        pred, gt = load_image(pred_path), load_image(gt_path)
        scene, side = _scene_key(os.path.splitext(name)[0])
        key = f"psnr_{side}" if side else "psnr"
        return scene, {key: psnr(pred, gt, args.crop)}
    pred = _load_disparity(pred_path, args.scale)
    gt = _load_disparity(gt_path, args.scale)
    scene = _scene_key(os.path.splitext(name)[0])[0]
    if args.kind == "disparity":
        return scene, evaluate_disparity(pred, gt, args.official_d1)
    if args.focal is not None:
        pred = disparity_to_depth(pred, args.focal, args.baseline)
        gt = disparity_to_depth(gt, args.focal, args.baseline)
    else:
        pred, gt = DepthMap(pred.values, pred.valid), DepthMap(gt.values, gt.valid)
    return scene, evaluate_depth(pred, gt, args.min_depth, args.max_depth)


def cmd_evaluate(args, report):
    r"""Evaluate every prediction file against the ground-truth file of the same name."""
    report.inputs = {"pred_dir": args.pred_dir, "gt_dir": args.gt_dir, "kind": args.kind}
    if args.kind == "depth" and (args.focal is None) != (args.baseline is None):
        raise ValueError("Depth evaluation needs both --focal and --baseline, or neither.")
    extensions = _IMAGE_EXTENSIONS if args.kind == "separation" else (".pfm", ".png")
    start = timer()
    per_scene = {}
    for name in _common_files(args.pred_dir, args.gt_dir, extensions, report):
        try:
            scene, metrics = _evaluate_item(args, os.path.join(args.pred_dir, name),
                                            os.path.join(args.gt_dir, name), name)
        except (OSError, ValueError) as error:
            report.fail(f"{name}: {error}")
            report.items.append({"name": name, "status": "error", "error": str(error)})
            continue
        per_scene.setdefault(scene, {}).update(metrics)
        report.items.append({"name": name, "status": "ok"})
    report.timing["evaluate"] = timer() - start
    keys = sorted({key for metrics in per_scene.values() for key in metrics})
    report.metrics["per_item"] = per_scene
    report.metrics["mean"] = {
        key: float(np.mean([m[key] for m in per_scene.values() if key in m])) for key in keys}
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=["scene"] + keys)
            writer.writeheader()
            for scene in sorted(per_scene):
                writer.writerow({"scene": scene, **per_scene[scene]})
        report.artifacts["csv"] = args.csv


def _dataset_pairs(dataset_dir):
    if not os.path.isdir(dataset_dir):
        raise FileNotFoundError(f"Dataset directory {dataset_dir} does not exist.")
    names = set(os.listdir(dataset_dir))
    scenes = sorted(name[:-len("_left.png")] for name in names if name.endswith("_left.png"))
    pairs = []
    for scene in scenes:
        gt = f"{scene}_disp_left.pfm"
        pairs.append((scene, os.path.join(dataset_dir, f"{scene}_left.png"),
                      os.path.join(dataset_dir, f"{scene}_right.png"),
                      os.path.join(dataset_dir, gt) if gt in names else None))
    return pairs


def _bench_scene(left_path, right_path, gt_path, op, cfg, crop):
    left, right = load_image(left_path), load_image(right_path)
    mixture = op.compose(left, right)
    metrics, timing = {}, {}

    start = timer()
    joint = solve(mixture, op, cfg)
    timing["joint"] = timer() - start
    metrics["joint"] = evaluate_separation(joint.left, joint.right, left, right, crop)
    if isinstance(op, Anaglyph):
        colorized = colorize_anaglyph(mixture, joint.d_left, joint.d_right)
        metrics["joint_colorized"] = evaluate_separation(*colorized, left, right, crop)

    start = timer()
    separation = ablate_separation_only(mixture, op, cfg)
    timing["separation"] = timer() - start
    metrics["separation"] = evaluate_separation(separation.left, separation.right, left, right,
                                                crop)

    start = timer()
    reference, _ = estimate_disparity_pair(left, right, cfg.d_max, cfg.weights)
    timing["oracle"] = timer() - start
    if gt_path is not None:
        gt = load_pfm(gt_path)
        metrics["disparity"] = evaluate_disparity(joint.d_left, gt)
        metrics["oracle_bad1"] = bad_pixel_ratio(reference, gt, 1.)
    return metrics, timing


def cmd_bench(args, report):
    r"""Run joint and separation-only recovery over a dataset and compare them."""
    op = get_operator(args.operator)
    cfg = _resolve_config(args)
    report.operator = op.kind
    report.inputs = {"dataset_dir": args.dataset_dir}
    report.config = config_snapshot(cfg)
    pairs = _dataset_pairs(args.dataset_dir)
    if not pairs:
        raise ValueError(f"No pairs found in {args.dataset_dir}.")
    per_scene = {}
    for scene, left_path, right_path, gt_path in pairs:
        logger.info("Benchmarking scene %s.", scene)
        try:
            metrics, timing = _bench_scene(left_path, right_path, gt_path, op, cfg, args.crop)
        except (OSError, ValueError, RuntimeError) as error:
            report.fail(f"{scene}: {error}")
            report.items.append({"name": scene, "status": "error", "error": str(error)})
            continue
        per_scene[scene] = metrics
        report.timing[scene] = timing
        report.items.append({"name": scene, "status": "ok"})

    def _mean_psnr(variant):
        values = [(m[variant]["psnr_left"] + m[variant]["psnr_right"]) / 2.
                  for m in per_scene.values() if variant in m]
        return float(np.mean(values)) if values else None

    summary = {"scenes": len(per_scene), "joint_psnr": _mean_psnr("joint"),
               "separation_psnr": _mean_psnr("separation")}
    if isinstance(op, Anaglyph):
        summary["joint_colorized_psnr"] = _mean_psnr("joint_colorized")
    if per_scene:
        summary["joint_ge_separation"] = bool(summary["joint_psnr"] >= summary["separation_psnr"])
    report.metrics = {"per_scene": per_scene, "summary": summary}

    table = os.path.join(args.out, "bench.csv")
    with open(table, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["scene", "joint_left", "joint_right", "separation_left",
                         "separation_right", "bad1"])
        for scene in sorted(per_scene):
            m = per_scene[scene]
            writer.writerow([scene, m["joint"]["psnr_left"], m["joint"]["psnr_right"],
                             m["separation"]["psnr_left"], m["separation"]["psnr_right"],
                             m.get("disparity", {}).get("bad1", "")])
    _record(report, "bench_csv", table)


def cmd_synth(args, report):
    r"""Write a synthetic dataset in the benchmark layout."""
    report.inputs = {"count": args.count, "seed": args.seed or 0}
    os.makedirs(args.out_dir, exist_ok=True)
    paths = write_scene_suite(args.out_dir, args.count, args.seed or 0, args.height, args.width,
                              args.bit_depth)
    for path in paths:
        _record(report, os.path.basename(path), path)


def build_parser():
    r"""Build the argument parser of ``unmix-stereo``."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--operator", choices=_OPERATORS, default="anaglyph",
                        help="Mixture operator (default: anaglyph).")
    common.add_argument("--config", default=None, help="JSON configuration file.")
    common.add_argument("--seed", type=int, default=None, help="Random seed.")
    common.add_argument("--out", default=".", help="Output directory (default: current).")
    common.add_argument("--json", action="store_true", help="Print the report to stdout.")
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="Log INFO messages; repeat for DEBUG.")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--d-max", type=int, default=None, help="Largest disparity in pixels.")
    solver.add_argument("--levels", type=int, default=None, help="Number of pyramid levels.")
    solver.add_argument("--iters", type=int, default=None, help="Iterations per level.")
    solver.add_argument("--step-size", type=float, default=None, help="RMSProp step size.")

    images = argparse.ArgumentParser(add_help=False)
    images.add_argument("--bit-depth", type=int, choices=(8, 16), default=8,
                        help="Bit depth of written images (default: 8).")

    parser = argparse.ArgumentParser(
        prog="unmix-stereo", description="Recover a stereo pair and its disparities from a "
                                         "single mixture image.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("compose", parents=[common, images], help=cmd_compose.__doc__)
    sub.add_argument("left")
    sub.add_argument("right")
    sub.add_argument("--name", default="mixture.png", help="Output file name.")
    sub.set_defaults(func=cmd_compose)

    sub = commands.add_parser("unmix", parents=[common, solver, images], help=cmd_unmix.__doc__)
    sub.add_argument("mixture")
    sub.add_argument("--ablate-separation-only", action="store_true",
                     help="Disable the stereo losses and disparity initialization.")
    sub.add_argument("--plot", action="store_true", help="Also write loss_trace.png.")
    sub.set_defaults(func=cmd_unmix)

    sub = commands.add_parser("colorize", parents=[common, images], help=cmd_colorize.__doc__)
    sub.add_argument("mixture")
    sub.add_argument("d_left")
    sub.add_argument("d_right")
    sub.add_argument("--tau", type=float, default=1.0, help="Left-right check threshold.")
    sub.add_argument("--scale", type=float, default=1.0, help="Disparity scale factor.")
    sub.set_defaults(func=cmd_colorize)

    sub = commands.add_parser("oracle", parents=[common, solver], help=cmd_oracle.__doc__)
    sub.add_argument("left")
    sub.add_argument("right")
    sub.add_argument("--aggregation", type=int, default=1, help="Odd cost aggregation window.")
    sub.add_argument("--gt", default=None, help="Ground-truth left disparity (PFM or PNG).")
    sub.add_argument("--scale", type=float, default=1.0, help="Ground-truth scale factor.")
    sub.set_defaults(func=cmd_oracle)

    sub = commands.add_parser("evaluate", parents=[common], help=cmd_evaluate.__doc__)
    sub.add_argument("pred_dir")
    sub.add_argument("gt_dir")
    sub.add_argument("--kind", choices=("separation", "disparity", "depth"), required=True)
    sub.add_argument("--crop", type=int, default=0, help="Border excluded from PSNR.")
    sub.add_argument("--official-d1", action="store_true",
                     help="Use the KITTI rule: error > 3 px and > 5%% of the disparity.")
    sub.add_argument("--scale", type=float, default=1.0, help="Disparity scale factor.")
    sub.add_argument("--focal", type=float, default=None, help="Focal length in pixels.")
    sub.add_argument("--baseline", type=float, default=None, help="Baseline in metres.")
    sub.add_argument("--min-depth", type=float, default=1e-3)
    sub.add_argument("--max-depth", type=float, default=80.)
    sub.add_argument("--csv", default=None, help="Write a per-scene CSV table.")
    sub.set_defaults(func=cmd_evaluate)

    sub = commands.add_parser("bench", parents=[common, solver], help=cmd_bench.__doc__)
    sub.add_argument("dataset_dir")
    sub.add_argument("--crop", type=int, default=0, help="Border excluded from PSNR.")
    sub.set_defaults(func=cmd_bench)

    sub = commands.add_parser("synth", parents=[common, images], help=cmd_synth.__doc__)
    sub.add_argument("count", type=int)
    sub.add_argument("out_dir")
    sub.add_argument("--height", type=int, default=96)
    sub.add_argument("--width", type=int, default=128)
    sub.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    r"""
    Run ``unmix-stereo``.

    Returns
    -------
    int :
        0 if the command succeeded, 1 otherwise.

    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=max(logging.DEBUG, logging.WARNING - 10 * args.verbose),
                        format="%(levelname)s %(name)s: %(message)s")
    report = RunReport(command=args.command)
    out = getattr(args, "out_dir", args.out)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            if args.command != "synth" and not os.path.isdir(out):
                raise FileNotFoundError(f"Output directory {out} does not exist.")
            args.func(args, report)
        except (OSError, ValueError, TypeError, RuntimeError) as error:
            report.fail(error)
    report.warnings.extend(str(w.message) for w in caught)
    report_path = os.path.join(out, "report.json")
    if os.path.isdir(out):
        report.write(report_path)
    if args.json:
        sys.stdout.write(report.to_json() + "\n")
    return 0 if report.status == "ok" else 1


if __name__ == "__main__":
    sys.exit(main())
