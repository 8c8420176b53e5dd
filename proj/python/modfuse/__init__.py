"""Modular least-squares fusion for coupled subsystems.

The heavy lifting lives in the compiled ``_core`` module; this package adds
dict-based helpers around the Monte Carlo study runner.
"""

import json
import os

from ._core import (
    ALPHA_MIN,
    ConfigError,
    FusionError,
    IoError,
    ci_fuse,
    inflate_noise,
    landmark_bearing_update,
    method_names,
    modular_fusion_update,
    optimize_alpha,
    robot_bearing_update,
    true_bearing,
    wrap_angle,
)
from . import _core

RESULT_COLUMNS = ("trial_index", "seed", "method", "e_l_T", "robot_pos_err_T", "det_Pl_T", "failed")


def default_config():
    """The built-in scenario as a JSON-style dict."""
    return json.loads(_core._default_config())


def run_study(config=None, threads=None):
    """Run the Monte Carlo study.

    ``config`` takes the same keys as the command-line JSON config; missing
    keys keep their defaults. Returns ``(summary, rows)`` where ``summary`` is
    the summary.json content and ``rows`` is a list of dicts keyed by
    ``RESULT_COLUMNS``.
    """
    if threads is None:
        threads = int(os.environ.get("MODFUSE_THREADS", os.cpu_count() or 1))
    summary, rows = _core._run_study(json.dumps(config or {}), int(threads))
    return json.loads(summary), [dict(zip(RESULT_COLUMNS, r)) for r in rows]


__all__ = [
    "ALPHA_MIN",
    "ConfigError",
    "FusionError",
    "IoError",
    "RESULT_COLUMNS",
    "ci_fuse",
    "default_config",
    "inflate_noise",
    "landmark_bearing_update",
    "method_names",
    "modular_fusion_update",
    "optimize_alpha",
    "robot_bearing_update",
    "run_study",
    "true_bearing",
    "wrap_angle",
]
