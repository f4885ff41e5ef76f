"""Command-line entry point: roofclass <subcommand>."""

from __future__ import annotations

import argparse
import sys

from roofclass.errors import RoofClassError
from roofclass.pipeline import commands
from roofclass.pipeline.config import load_config
from roofclass.pipeline.runlog import setup_run_logging, teardown_run_logging


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML or JSON run configuration file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config value, e.g. --set train.max_epochs=5",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roofclass",
        description="Roof type/material classification from RGB orthophotos and LiDAR height rasters",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on the console")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ndsm", help="derive nDSM = DSM - DTM")
    p.add_argument("--dsm", required=True)
    p.add_argument("--dtm", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-clamp", action="store_true", help="keep negative heights")

    for name, help_text in [
        ("synth", "generate a synthetic packaged dataset"),
        ("extract", "extract patches from rasters + footprints into a dataset"),
        ("split", "assign stratified train/test tags"),
        ("fuse-eval", "run the fusion strategy and evaluate on the test split"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_config_args(p)

    p = sub.add_parser("train", help="train one modality's CNN on the train split")
    _add_config_args(p)
    p.add_argument("--modality", choices=("rgb", "lidar"), required=True)
    p.add_argument("--resume", action="store_true", help="continue from an existing checkpoint")

    p = sub.add_parser("predict-map", help="classify footprints into a GeoJSON map")
    p.add_argument("--footprints", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--strategy",
        default="rgb_only",
        choices=("rgb_only", "lidar_only", "softmax_mean", "feature_concat", "softmax_concat"),
    )
    p.add_argument("--rgb-checkpoint")
    p.add_argument("--rgb-raster")
    p.add_argument("--lidar-checkpoint")
    p.add_argument("--lidar-raster")
    p.add_argument("--downstream", help="directory with a saved downstream classifier")
    p.add_argument("--scale", type=float, default=1.5)

    p = sub.add_parser("report", help="tabulate metrics from one or more runs")
    p.add_argument("paths", nargs="+")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    handlers = []
    try:
        run_dir = None
        config = None
        if hasattr(args, "config"):
            config = load_config(args.config, args.overrides)
            run_dir = config.output_dir
        handlers = setup_run_logging(run_dir, verbose=args.verbose)

        if args.command == "ndsm":
            return commands.cmd_ndsm(args.dsm, args.dtm, args.out, clamp_negative=not args.no_clamp)
        if args.command == "synth":
            return commands.cmd_synth(config)
        if args.command == "extract":
            return commands.cmd_extract(config)
        if args.command == "split":
            return commands.cmd_split(config)
        if args.command == "train":
            return commands.cmd_train(config, args.modality, resume=args.resume)
        if args.command == "fuse-eval":
            return commands.cmd_fuse_eval(config)
        if args.command == "predict-map":
            return commands.cmd_predict_map(
                rgb_checkpoint=args.rgb_checkpoint,
                rgb_raster_path=args.rgb_raster,
                footprints_path=args.footprints,
                out_path=args.out,
                lidar_checkpoint=args.lidar_checkpoint,
                lidar_raster_path=args.lidar_raster,
                downstream_dir=args.downstream,
                strategy=args.strategy,
                scale=args.scale,
            )
        if args.command == "report":
            return commands.cmd_report(args.paths)
        parser.error(f"unknown command {args.command}")
        return 2
    except (RoofClassError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    finally:
        teardown_run_logging(handlers)


if __name__ == "__main__":
    sys.exit(main())
