#!/usr/bin/env python
import argparse
import logging
import sys
from pprint import pformat
from typing import Any, Dict, Optional, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import compare_epsilons as ce
from . import compute_means as cm
from . import solve_thin_domain as st
from . import verification_chain as vc
from .settings import StudyConfig

logger = logging.getLogger(__name__)

# CLI flag -> location in the [global] table
OVERRIDES = {
    "eps": ("eps",),
    "out": ("output_folder",),
    "nx": ("mesh", "nx"),
    "ny_bulk": ("mesh", "ny_bulk"),
    "ny_strip": ("mesh", "ny_strip"),
    "grid1d": ("grid1d",),
    "tol": ("tol",),
}


def apply_overrides(options: Dict[str, Any], overrides: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """Write non-None override values into the nested option dictionary."""
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in OVERRIDES:
            raise ValueError(f"Unknown override {key}")
        *parents, leaf = OVERRIDES[key]
        table = options
        for parent in parents:
            table = table.setdefault(parent, {})
        table[leaf] = value
    return options


def load_config(
    configfile: str, overrides: Optional[Dict[str, Any]] = None, stages: Optional[Sequence[str]] = None
) -> StudyConfig:
    with open(configfile, "rb") as file:
        configs = tomllib.load(file)
    general_options = apply_overrides(configs["global"], overrides)
    if stages is not None:
        general_options["stages"] = list(stages)
    return StudyConfig(**general_options)


def run_mesh(config: StudyConfig):
    """Generate and export the meshes.

    If config.stages does not contain "mesh", this step is skipped and
    returns None.
    """
    if "mesh" in config.stages:
        logger.info("Generating meshes...")
        return st.run_mesh(config)


def run_solve2d(config: StudyConfig):
    if "solve2d" in config.stages:
        logger.info("Solving the 2D problem...")
        return st.run_solve2d(config)


def run_reduced(config: StudyConfig):
    if "reduced" in config.stages:
        logger.info("Solving the reduced 1D problem...")
        return st.run_reduced(config)


def run_limit(config: StudyConfig):
    if "limit" in config.stages:
        logger.info("Solving the homogenized limit problem...")
        return st.run_limit(config)


def run_study(config: StudyConfig, name: str = "name"):
    """Run the eps sweep.

    Args:
        config: StudyConfig object containing all the necessary settings
        name: protector for the multiprocessing calculations

    Returns: the StudyReport, or None when the stage is not selected.
    """
    if "study" in config.stages:
        logger.info("Running the eps sweep...")
        return ce.run_study(config, name)


def run_chain(config: StudyConfig):
    if "chain" in config.stages:
        logger.info("Running the verification chain...")
        return vc.run_chain(config)


def run_means(config: StudyConfig):
    if "means" in config.stages:
        logger.info("Computing means...")
        return cm.run_means(config)


def run_pipeline(
    configfile: str,
    name: str = "name",
    overrides: Optional[Dict[str, Any]] = None,
    stages: Optional[Sequence[str]] = None,
) -> Dict[str, Any]:
    """Run the selected stages of the pipeline

    Args:
        configfile: path to the configfile
        name: use '__main__' for parallel processing
        overrides: values from the command line replacing config entries
        stages: replaces the stages listed in the config file

    Returns: the result of each stage that ran, keyed by stage name
    """
    config = load_config(configfile, overrides, stages)

    logger.info("Running thin-domain pipeline with the following settings")
    logger.info(pformat(config.model_dump()))

    results = {
        "mesh": run_mesh(config),
        "means": run_means(config),
        "limit": run_limit(config),
        "reduced": run_reduced(config),
        "solve2d": run_solve2d(config),
        "chain": run_chain(config),
        "study": run_study(config, name),
    }
    return {stage: result for stage, result in results.items() if result is not None}


if __name__ == "__main__":
    parser = argparse.ArgumentParser(
        prog="main_pipeline",
        description="Solve thin-domain problems and their homogenized limits",
        epilog=None,
    )
    parser.add_argument(
        "-c",
        "--config",
        default="pipeline_config.toml",
        help="Specify a configuration file",
    )

    args = parser.parse_args()

    run_pipeline(args.config, __name__)
