"""Deterministic CSV/JSON writers that stamp a reproduction manifest on every file."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
import scipy

from . import __version__

__all__ = ["manifest", "write_csv", "write_json", "to_jsonable"]


def manifest(config, command: str) -> dict:
    """Config digest, seed and library versions; no timestamps or runtimes."""
    return {
        "command": command,
        "config_sha256": config.digest(),
        "seed": config["goe.seed"],
        "versions": {"susyreplica": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
    }


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows, meta: dict):
    """Write ``rows`` under ``header``; ``meta`` goes first as ``# key: value`` lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for key in sorted(meta):
            fh.write(f"# {key}: {json.dumps(meta[key], sort_keys=True)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path, payload: dict, meta: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"manifest": meta, **to_jsonable(payload)}
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
