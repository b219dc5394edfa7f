from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config.logging import get_logger
from .config_model import RunConfig
from .errors import JacobiAnosovError
from .pipeline.staging import COMMANDS, run_pipeline
from .schema_utils import to_builtin

logger = get_logger(__name__)


def _window(text: str) -> list[float]:
    lo, sep, hi = text.partition(":")
    try:
        if not sep:
            raise ValueError
        return [float(lo), float(hi)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None


def _formats(text: str) -> list[str]:
    return [f.strip() for f in text.split(",") if f.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON or TOML run config overriding defaults.")
    common.add_argument("--out", type=Path, default=None, help="Output folder (overrides config).")
    common.add_argument("--seed", type=int, default=None, help="Random seed (overrides config).")
    common.add_argument("--samples", type=int, default=None, help="Number of sampled geodesics (overrides config).")
    common.add_argument("--window", type=_window, default=None, help="Window LO:HI around s = 0; write --window=-6:6.")
    common.add_argument("--format", type=_formats, default=None, help="Comma-separated subset of csv,json.")
    common.add_argument("--tol-slope", type=float, default=None, help="Stable-limit slope tolerance (overrides config).")
    common.add_argument("--gap-tol", type=float, default=None, help="Transversality gap tolerance (overrides config).")

    parser = argparse.ArgumentParser(
        prog="jacobi-anosov",
        description="Decide from sampled geodesics whether a geodesic flow without conjugate points is Anosov.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS:
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    if args.out is not None:
        cfg.output.out_dir = str(args.out)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.samples is not None:
        cfg.check.samples = args.samples
    if args.window is not None:
        cfg.window = args.window
    if args.format is not None:
        cfg.output.formats = args.format
    if args.tol_slope is not None:
        cfg.limit.slope_tol = args.tol_slope
    if args.gap_tol is not None:
        cfg.check.gap_tol = args.gap_tol
    return cfg.validate()


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        cfg = apply_overrides(RunConfig.load(args.config), args)
        context = run_pipeline(args.command, {"config": cfg})
    except JacobiAnosovError as e:
        logger.error(f"{args.command} failed: {e.message}")
        print(json.dumps(to_builtin(e.to_dict())), file=sys.stderr)
        return e.exit_code

    return context["exit_code"]
