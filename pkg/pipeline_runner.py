import argparse
import logging

from src.thinhom.analysis.scripts.main_pipeline import run_pipeline
from src.thinhom.analysis.scripts.settings import STAGES


def parse_eps(text: str):
    return [float(item) for item in text.split(",") if item.strip()]


if __name__ == "__main__":
    parser = argparse.ArgumentParser(
        prog="thinhom_pipeline",
        description="Solve thin-domain problems with concentrated forcing and their homogenized limits",
        epilog=None,
    )
    parser.add_argument(
        "command",
        nargs="?",
        choices=STAGES,
        help="Run a single stage instead of the stages listed in the config file",
    )
    parser.add_argument(
        "-c",
        "--config",
        default="pipeline_config.toml",
        help="Specify a configuration file",
    )
    parser.add_argument("--eps", type=parse_eps, help="Comma-separated eps values, e.g. 0.1,0.08,0.04")
    parser.add_argument("--out", help="Output folder")
    parser.add_argument("--nx", type=int, help="Horizontal mesh cells")
    parser.add_argument("--ny-bulk", type=int, help="Vertical layers below the strip")
    parser.add_argument("--ny-strip", type=int, help="Vertical layers inside the strip")
    parser.add_argument("--grid1d", type=int, help="Nodes of the limit-problem grid")
    parser.add_argument("--tol", type=float, help="Relative CG tolerance")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")

    args = parser.parse_args()
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
    )
    overrides = {
        "eps": args.eps,
        "out": args.out,
        "nx": args.nx,
        "ny_bulk": args.ny_bulk,
        "ny_strip": args.ny_strip,
        "grid1d": args.grid1d,
        "tol": args.tol,
    }
    stages = [args.command] if args.command else None
    run_pipeline(args.config, __name__, overrides, stages)
