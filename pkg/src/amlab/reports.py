"""Canonical JSON serialization and config digests shared by reports and the CLI."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, is_dataclass

import numpy as np


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and dataclasses to plain JSON types."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # JSON has no inf/nan literals; keep them readable and parseable
        return v if math.isfinite(v) else str(v)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))


def config_digest(cfg: dict) -> str:
    """sha256 of the canonical JSON form of ``cfg``."""
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(to_jsonable(payload), fh, sort_keys=True, indent=2)
        fh.write("\n")
