"""Deterministic text serialization helpers.

All floating-point values written by this package use the %.17g format, which
round-trips IEEE doubles exactly; JSON objects are emitted with sorted keys so
identical inputs give byte-identical files.
"""

from __future__ import annotations

import json
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = ["fmt_float", "dumps_json", "dump_json", "write_csv", "load_json"]


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _encode(obj: Any) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not np.isfinite(obj):
            raise ValueError(f"cannot serialize non-finite float {obj!r}")
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = []
        for key in sorted(obj):
            if not isinstance(key, str):
                raise ValueError(f"JSON object keys must be strings, got {key!r}")
            items.append(json.dumps(key) + ": " + _encode(obj[key]))
        return "{" + ", ".join(items) + "}"
    raise ValueError(f"cannot serialize object of type {type(obj).__name__}")


def dumps_json(obj: Any) -> str:
    """JSON text with sorted keys and 17-significant-digit floats."""
    return _encode(obj) + "\n"


def dump_json(obj: Any, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_json(obj))


def load_json(path) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """CSV with %.17g floats; ints and strings written verbatim."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for cell in row:
                if isinstance(cell, (float, np.floating)):
                    cells.append(fmt_float(cell))
                else:
                    cells.append(str(cell))
            fh.write(",".join(cells) + "\n")
