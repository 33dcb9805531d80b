"""Deterministic CSV and key-value text artifacts."""

from __future__ import annotations

import numbers
from pathlib import Path

import numpy as np

from .errors import ParameterError


def format_value(x) -> str:
    """17 significant digits for floats; ``format`` never consults the locale."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, numbers.Integral):
        return str(int(x))
    if isinstance(x, numbers.Real):
        return format(float(x), ".17g")
    if isinstance(x, str):
        if any(c in x for c in ',"\n'):
            return '"' + x.replace('"', '""') + '"'
        return x
    if x is None:
        return ""
    raise ParameterError(f"cannot write value of type {type(x).__name__}")


def emit_csv(columns, path, meta=None) -> Path:
    """Write named columns to ``path``.

    Parameters
    ----------
    columns : dict or sequence of (name, values)
        All columns must have the same length; zero-length columns give a
        header-only file.
    meta : dict, optional
        Written first as ``# key=value`` comment lines.
    """
    items = list(columns.items()) if isinstance(columns, dict) else list(columns)
    names = [str(n) for n, _ in items]
    data = [list(np.asarray(v, dtype=object).ravel()) if not isinstance(v, list) else v for _, v in items]
    lengths = {len(d) for d in data}
    if len(lengths) > 1:
        raise ParameterError(f"column lengths differ: {dict(zip(names, map(len, data)))}")
    n = lengths.pop() if lengths else 0
    lines = [f"# {k}={format_value(v) if not isinstance(v, str) else v}" for k, v in (meta or {}).items()]
    lines.append(",".join(names))
    for i in range(n):
        lines.append(",".join(format_value(d[i]) for d in data))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def emit_text(pairs, path, meta=None) -> Path:
    """``key = value`` lines, in the given order."""
    lines = [f"# {k}={v}" for k, v in (meta or {}).items()]
    lines += [f"{k} = {format_value(v) if not isinstance(v, str) else v}" for k, v in pairs]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Inverse of ``emit_csv`` for numeric files: ``(meta, {name: array})``."""
    meta = {}
    with Path(path).open(encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = v
        else:
            body.append(line)
    names = body[0].split(",")
    rows = [r.split(",") for r in body[1:]]
    cols = {n: np.array([float(r[i]) if r[i] else np.nan for r in rows]) for i, n in enumerate(names)}
    return meta, cols
