"""Deterministic report serialization.

Reports are nested dict/list structures; serialization is bit-stable for a
fixed seed and version: insertion key order is preserved, floats carry 17
significant digits, complex values and arrays become nested [re, im] pairs.
Volatile fields (wall-clock timings) are dropped unless explicitly kept so
identical runs produce identical bytes.
"""

from __future__ import annotations

import math
import sys

import numpy as np

VOLATILE_KEYS = ("runtime_ms",)


def to_jsonable(obj):
    """Reduce report values to plain JSON types, complex as [re, im]."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return to_jsonable(np.stack([obj.real, obj.imag], axis=-1))
        return obj.tolist()
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _fmt(value, parts, drop_volatile):
    if isinstance(value, dict):
        parts.append("{")
        first = True
        for k, v in value.items():
            if drop_volatile and k in VOLATILE_KEYS:
                continue
            if not first:
                parts.append(",")
            first = False
            parts.append(f'"{k}":')
            _fmt(v, parts, drop_volatile)
        parts.append("}")
    elif isinstance(value, list):
        parts.append("[")
        for i, v in enumerate(value):
            if i:
                parts.append(",")
            _fmt(v, parts, drop_volatile)
        parts.append("]")
    elif isinstance(value, bool):
        parts.append("true" if value else "false")
    elif value is None:
        parts.append("null")
    elif isinstance(value, int):
        parts.append(str(value))
    elif isinstance(value, float):
        parts.append(format(value, ".17g") if math.isfinite(value)
                     else f'"{value!r}"')
    elif isinstance(value, str):
        parts.append('"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"')
    else:
        raise TypeError(f"cannot serialize {type(value)!r}")


def canonical_json(report, include_volatile: bool = False) -> str:
    parts: list = []
    _fmt(to_jsonable(report), parts, drop_volatile=not include_volatile)
    return "".join(parts) + "\n"


CAPACITY_CSV_HEADER = "channel_spec,param,C_E,Q_ID1,coh_info,ad_gap"


def capacity_csv(rows) -> str:
    """Fixed-schema CSV for capacity sweeps."""
    lines = [CAPACITY_CSV_HEADER]
    for r in rows:
        lines.append(",".join([
            str(r["channel_spec"]),
            "" if r.get("param") is None else format(float(r["param"]), ".17g"),
            format(float(r["C_E"]), ".17g"),
            format(float(r["Q_ID1"]), ".17g"),
            format(float(r["coh_info"]), ".17g"),
            format(float(r["ad_gap"]), ".17g"),
        ]))
    return "\n".join(lines) + "\n"


def emit_report(report, path: str, fmt: str = "json",
                include_volatile: bool = False) -> None:
    """Write a report to a file or, for path "-", to standard output."""
    if fmt == "json":
        text = canonical_json(report, include_volatile=include_volatile)
    elif fmt == "csv":
        rows = report["rows"] if isinstance(report, dict) and "rows" in report else report
        text = capacity_csv(rows)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as f:
            f.write(text)
