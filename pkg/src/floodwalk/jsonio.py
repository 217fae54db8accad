"""Canonical JSON output: sorted keys, fixed float formatting (17 sig digits).

Used for every machine-readable file the CLI writes, so identical inputs and
seeds produce byte-identical outputs.
"""

from __future__ import annotations

import numpy as np


def _fmt(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        f = float(value)
        if not np.isfinite(f):
            raise ValueError(f"non-finite float {f} in canonical JSON")
        return format(f, ".17g")
    if isinstance(value, str):
        import json

        return json.dumps(value)
    if isinstance(value, dict):
        items = sorted(value.items(), key=lambda kv: str(kv[0]))
        inner = ",".join(f"{_fmt(str(k))}:{_fmt(v)}" for k, v in items)
        return "{" + inner + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ",".join(_fmt(v) for v in value) + "]"
    raise TypeError(f"cannot canonicalize {type(value)}")


def dumps(obj) -> str:
    return _fmt(obj)


def dump(obj, path: str) -> None:
    with open(path, "w") as f:
        f.write(dumps(obj))
        f.write("\n")
