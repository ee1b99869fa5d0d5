import json
import logging
import os
from typing import Any, Dict, Iterable, Mapping

import pandas as pd
import psutil
from tabulate import tabulate

from config.settings import LOG_FORMAT, LOG_LEVEL


def setup_logging(name: str, level: str = LOG_LEVEL) -> logging.Logger:
    """Set up the root handler once and return a named logger."""
    root = logging.getLogger()
    if not root.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
    root.setLevel(level.upper())
    return logging.getLogger(name)


def resident_memory_mb() -> float:
    """Resident set size of this process in MB."""
    return psutil.Process(os.getpid()).memory_info().rss / 1024 / 1024


def save_report(report: Dict[str, Any], filename: str):
    """Save a JSON report, creating its directory."""
    try:
        os.makedirs(os.path.dirname(os.path.abspath(filename)), exist_ok=True)
        with open(filename, "w") as f:
            json.dump(report, f, indent=4)
            f.write("\n")
    except Exception as e:
        logging.error(f"Failed to save report: {str(e)}")
        raise


def load_report(filename: str) -> Dict[str, Any]:
    """Load a JSON report."""
    try:
        with open(filename, "r") as f:
            return json.load(f)
    except FileNotFoundError:
        return {}
    except Exception as e:
        logging.error(f"Failed to load report: {str(e)}")
        raise


def size_multiset_frame(sizes: Mapping[int, int]) -> pd.DataFrame:
    """Orbit size / orbit count table with the subspaces each row covers."""
    frame = pd.DataFrame(
        {"orbit_size": list(sizes.keys()), "orbits": list(sizes.values())}
    )
    frame["subspaces"] = frame["orbit_size"] * frame["orbits"]
    return frame


def render_table(rows: Iterable[Mapping[str, Any]]) -> str:
    return tabulate(list(rows), headers="keys", tablefmt="github")


def render_frame(frame: pd.DataFrame) -> str:
    return tabulate(frame, headers="keys", tablefmt="github", showindex=False)
