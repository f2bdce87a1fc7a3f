"""CSV/JSON writers with deterministic float formatting.

CSV floats use 17 significant digits in scientific notation; JSON floats use
Python's shortest round-trip repr. Every file carries the resolved run
configuration so it can be reproduced.
"""
from __future__ import annotations

import io
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


def fmt(x) -> str:
    return format(float(x), ".16e")


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps_json(payload: dict) -> str:
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n"


def dumps_csv(meta: dict, columns: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(to_jsonable(meta), sort_keys=True) + "\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_text(text: str, path: Optional[Path]) -> None:
    if path is None:
        import sys

        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def read_csv(path) -> tuple[dict, list[str], np.ndarray]:
    """Inverse of :func:`dumps_csv`: ``(meta, columns, data)``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta = json.loads(lines[0][2:]) if lines and lines[0].startswith("# ") else {}
    body = lines[1:] if meta else lines
    cols = body[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in body[1:]]) if len(body) > 1 else np.empty((0, len(cols)))
    return meta, cols, data
