"""Artifact writers.

Summaries are JSON with every float printed at 17 significant digits, so a
rerun with the same configuration and seed reproduces the file byte for byte.
Wall-clock timings go to a separate ``timing.json``.
"""
from __future__ import annotations

import json
import math
import re
from pathlib import Path

import numpy as np

_MARK = "@@float:"
_MARK_RE = re.compile(r'"' + _MARK + r'([^"]*)"')


def _prepare(obj):
    if isinstance(obj, dict):
        return {str(k): _prepare(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_prepare(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_prepare(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return _MARK + format(x, ".17g")
    if obj is None or isinstance(obj, str):
        return obj
    return repr(obj)


def dumps(obj) -> str:
    """JSON text with sorted keys and fixed 17-digit floats; NaN/inf become null."""
    text = json.dumps(_prepare(obj), sort_keys=True, indent=2)
    return _MARK_RE.sub(lambda m: m.group(1), text) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def stamp(summary: dict, cfg, version: str) -> dict:
    """Embed the reproducibility header into an artifact."""
    return {"config_hash": cfg.digest(), "seed": cfg.seed, "version": version, **summary}
