import json
import logging
import platform
from functools import wraps
from pathlib import Path
from time import perf_counter
from typing import Any, Callable, Dict, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# 17 significant digits round-trip every float64 exactly
FLOAT_FORMAT = "%.17g"


def _describe(result: Any) -> str:
    shape = getattr(result, "shape", None)
    if shape is not None:
        return f"shape {shape}"
    for attr in ("values", "vertices", "nodes"):
        inner = getattr(result, attr, None)
        if inner is not None and hasattr(inner, "shape"):
            return f"{attr} {inner.shape}"
    return type(result).__name__


def log_step(func: Callable):
    """A logging decorator for the numerical steps of the pipeline.

    :param func: the function to be decorated
    :type func: Callable
    """

    @wraps(func)
    def wrapper(*args, **kwargs):
        t0 = perf_counter()
        result = func(*args, **kwargs)
        t1 = perf_counter()
        logger.debug(
            f"Applied {func.__name__:25s} in {(t1 - t0)*1000:8.1f} ms, result {_describe(result)}"
        )
        return result

    return wrapper


def fit_loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x).

    Non-positive or non-finite pairs are ignored; fewer than two usable
    pairs give NaN.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if mask.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)[0])


def write_table(dataf: pd.DataFrame, filename: Path) -> Path:
    """Write a table as CSV with round-trip float formatting."""
    filename = Path(filename)
    filename.parent.mkdir(parents=True, exist_ok=True)
    logger.info(f"Write {filename}")
    dataf.to_csv(filename, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return filename


def write_summary(summary: Dict[str, Any], filename: Path) -> Path:
    """Write a JSON run summary, adding interpreter and package versions."""
    import scipy

    filename = Path(filename)
    filename.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
        },
        **summary,
    }
    logger.info(f"Write {filename}")
    with open(filename, "w") as file:
        json.dump(payload, file, indent=2, sort_keys=True, default=_json_default)
    return filename


def _json_default(value: Any):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Cannot serialise {type(value).__name__}")


def eps_label(eps: float) -> str:
    """Directory-safe label of an epsilon value, e.g. 0.04 -> 'eps_0_04'."""
    return "eps_" + f"{eps:.6g}".replace(".", "_").replace("-", "m")
