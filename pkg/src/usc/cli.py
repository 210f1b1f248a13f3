"""Command-line entry point.

Subcommands: ``eval`` (run the protocol and write a report), ``loss``
(per-class loss means over matched pairs), ``synth`` (generate a synthetic
dataset), ``corr`` (correlate report metrics against outcome rates).

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Dict, List, Optional

from . import io as uio
from .errors import UscError, ZeroVariance
from .evaluation import ProtocolConfig, evaluate, pearson, _protocol_match
from .loss import LossConfig, iogt_loss, safety_loss, smooth_l1

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _load_configs(path: Optional[str]):
    if path is None:
        print("warning: no config given, using protocol defaults", file=sys.stderr)
        return ProtocolConfig(), LossConfig()
    try:
        return uio.load_config(path)
    except FileNotFoundError:
        print(f"warning: config {path} not found, using protocol defaults",
              file=sys.stderr)
        return ProtocolConfig(), LossConfig()


def _load_frames(args) -> List[uio.FrameRecord]:
    if args.data:
        return uio.load_dataset(args.data)
    gts = uio.load_dataset(args.gt)
    preds = uio.load_dataset(args.pred)
    return uio.merge_datasets(gts, preds)


def _add_data_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", help="combined dataset (JSONL)")
    parser.add_argument("--gt", help="ground-truth dataset (JSONL)")
    parser.add_argument("--pred", help="prediction dataset (JSONL)")
    parser.add_argument("--config", help="protocol config (JSON)")


def _check_data_arguments(args) -> Optional[str]:
    if args.data and (args.gt or args.pred):
        return "--data excludes --gt/--pred"
    if not args.data and not (args.gt and args.pred):
        return "need --data or both --gt and --pred"
    return None


def cmd_eval(args) -> int:
    problem = _check_data_arguments(args)
    if problem:
        print(f"error: {problem}", file=sys.stderr)
        return EXIT_VALIDATION
    protocol, _ = _load_configs(args.config)
    frames = _load_frames(args)
    report = evaluate(frames, protocol)
    print(uio.format_report_table(report), end="")
    if args.out:
        uio.write_report(report, args.out, args.format)
    return EXIT_OK


def cmd_loss(args) -> int:
    problem = _check_data_arguments(args)
    if problem:
        print(f"error: {problem}", file=sys.stderr)
        return EXIT_VALIDATION
    protocol, loss_config = _load_configs(args.config)
    frames = _load_frames(args)
    pairs_by_class: Dict[str, list] = {}
    pairs, _, _ = _protocol_match(frames, protocol)
    for (class_name, _bucket), class_pairs in pairs.items():
        pairs_by_class.setdefault(class_name, []).extend(class_pairs)
    if not pairs_by_class:
        print("error: no matched pairs", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"lambda={loss_config.blend_lambda:g} "
          f"beta={loss_config.smooth_l1_beta:g}")
    header = f"{'class':<16}{'smooth_l1':>12}{'iogt_loss':>12}{'safety_loss':>13}"
    print(header)
    for class_name in sorted(pairs_by_class):
        class_pairs = pairs_by_class[class_name]
        l1 = sum(smooth_l1(p.detection.box, p.annotation.box,
                           loss_config.smooth_l1_beta, loss_config.yaw_wrapping)
                 for p in class_pairs) / len(class_pairs)
        enclosure = sum(iogt_loss(p.detection.box, p.annotation.box)
                        for p in class_pairs) / len(class_pairs)
        blended = sum(safety_loss(p.detection.box, p.annotation.box, loss_config)
                      for p in class_pairs) / len(class_pairs)
        print(f"{class_name:<16}{l1:>12.6f}{enclosure:>12.6f}{blended:>13.6f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec_kwargs = {}
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as handle:
            spec_kwargs.update(json.load(handle))
    for key in ("seed", "frames", "objects_min", "objects_max", "depth_bias",
                "lateral_noise", "size_noise", "yaw_noise", "miss_rate",
                "fp_rate"):
        value = getattr(args, key)
        if value is not None:
            spec_kwargs[key] = value
    if args.classes is not None:
        spec_kwargs["classes"] = tuple(args.classes.split(","))
    spec = uio.SyntheticSpec(**spec_kwargs)
    frames = uio.generate_synthetic(spec)
    uio.save_dataset(frames, args.out)
    print(f"wrote {len(frames)} frames to {args.out}")
    return EXIT_OK


def cmd_corr(args) -> int:
    with open(args.outcomes, "r", encoding="utf-8") as handle:
        outcomes_map = json.load(handle)
    if not isinstance(outcomes_map, dict):
        print("error: outcomes file must map report names to rates", file=sys.stderr)
        return EXIT_VALIDATION
    series: Dict[str, List[float]] = {"mAP": [], "NDS": [], "mAUSC": [], "USC-NDS": []}
    outcomes: List[float] = []
    for path in args.reports:
        report = uio.load_report(path)
        key = path if path in outcomes_map else os.path.basename(path)
        if key not in outcomes_map:
            print(f"error: no outcome for report {path}", file=sys.stderr)
            return EXIT_VALIDATION
        overall = report.overall
        if overall is None or None in (overall.mean_ap, overall.nds,
                                       overall.mausc, overall.usc_nds):
            print(f"error: report {path} has undefined overall metrics",
                  file=sys.stderr)
            return EXIT_VALIDATION
        series["mAP"].append(overall.mean_ap)
        series["NDS"].append(overall.nds)
        series["mAUSC"].append(overall.mausc)
        series["USC-NDS"].append(overall.usc_nds)
        outcomes.append(float(outcomes_map[key]))
    if len(outcomes) < 2:
        print("error: need at least two reports", file=sys.stderr)
        return EXIT_VALIDATION
    results: Dict[str, Optional[float]] = {}
    for name, values in series.items():
        try:
            results[name] = abs(pearson(values, outcomes))
        except ZeroVariance:
            results[name] = None
    if all(value is None for value in results.values()):
        print("error: zero variance in every metric series", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"{'metric':<10}{'|r|':>10}")
    for name in ("mAP", "NDS", "mAUSC", "USC-NDS"):
        value = results[name]
        print(f"{name:<10}{value:>10.6f}" if value is not None
              else f"{name:<10}{'undefined':>10}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="usc",
        description="Safety-oriented spatial-constraint metrics for 3D "
                    "object detection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="evaluate a dataset and write a report")
    _add_data_arguments(p_eval)
    p_eval.add_argument("--out", help="report output path")
    p_eval.add_argument("--format", choices=("json", "table"), default="json")
    p_eval.set_defaults(func=cmd_eval)

    p_loss = sub.add_parser("loss", help="per-class loss means over matched pairs")
    _add_data_arguments(p_loss)
    p_loss.set_defaults(func=cmd_loss)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--spec", help="SyntheticSpec JSON file")
    p_synth.add_argument("--seed", type=int)
    p_synth.add_argument("--frames", type=int)
    p_synth.add_argument("--objects-min", dest="objects_min", type=int)
    p_synth.add_argument("--objects-max", dest="objects_max", type=int)
    p_synth.add_argument("--classes", help="comma-separated class names")
    p_synth.add_argument("--depth-bias", dest="depth_bias", type=float)
    p_synth.add_argument("--lateral-noise", dest="lateral_noise", type=float)
    p_synth.add_argument("--size-noise", dest="size_noise", type=float)
    p_synth.add_argument("--yaw-noise", dest="yaw_noise", type=float)
    p_synth.add_argument("--miss-rate", dest="miss_rate", type=float)
    p_synth.add_argument("--fp-rate", dest="fp_rate", type=float)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_corr = sub.add_parser("corr", help="correlate report metrics with outcomes")
    p_corr.add_argument("--reports", nargs="+", required=True)
    p_corr.add_argument("--outcomes", required=True,
                        help="JSON mapping report file names to outcome rates")
    p_corr.set_defaults(func=cmd_corr)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UscError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
