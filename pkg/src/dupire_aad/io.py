"""File formats: surface/vega CSV, fixed-precision JSON, atomic writes."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DataValidationError
from .surface import VolSurface, new_surface


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits.

    Non-finite floats become ``null``.
    """
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return "true" if obj is True else "false" if obj is False else "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in seq):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in seq) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write via a temp file in the target directory and rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def grid_csv(spots: np.ndarray, times: np.ndarray, values: np.ndarray) -> str:
    """Tab-separated matrix: header ``spot`` + times, one row per spot."""
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(["spot", *map(fmt_float, times)])
    for s, row in zip(spots, values):
        w.writerow([fmt_float(s), *map(fmt_float, row)])
    return buf.getvalue()


def surface_csv(surface: VolSurface) -> str:
    return grid_csv(surface.spots, surface.times, surface.vols)


def parse_grid_csv(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = [r for r in csv.reader(io.StringIO(text), delimiter="\t") if r]
    if not rows or rows[0][0].strip() != "spot":
        raise DataValidationError("surface CSV must start with a 'spot' header cell")
    try:
        times = np.array([float(v) for v in rows[0][1:]])
        spots = np.array([float(r[0]) for r in rows[1:]])
        body = [[float(v) for v in r[1:]] for r in rows[1:]]
    except ValueError as exc:
        raise DataValidationError(f"non-numeric entry in surface CSV: {exc}") from None
    if any(len(r) != times.size for r in body):
        raise DataValidationError("every surface CSV row needs one value per time column")
    return spots, times, np.array(body).reshape(spots.size, times.size)


def read_surface(path: str | os.PathLike) -> VolSurface:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataValidationError(f"cannot read surface file {path}: {exc.strerror}") from None
    return new_surface(*parse_grid_csv(text))


def vega_long_csv(surface: VolSurface, vega: np.ndarray, vega_se: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "spot", "time", "vega", "vega_se"])
    for i, s in enumerate(surface.spots):
        for j, t in enumerate(surface.times):
            w.writerow([i, j, fmt_float(s), fmt_float(t), fmt_float(vega[i, j]),
                        fmt_float(vega_se[i, j])])
    return buf.getvalue()


def parse_vega_long_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    return [
        {"i": int(r["i"]), "j": int(r["j"]), **{k: float(r[k]) for k in ("spot", "time", "vega", "vega_se")}}
        for r in reader
    ]


def text_table(header: Iterable[str], rows: list[list[str]]) -> str:
    header = list(header)
    widths = [max(len(h), *(len(r[k]) for r in rows)) if rows else len(h) for k, h in enumerate(header)]

    def line(cells):
        return "  ".join(c.rjust(w) for c, w in zip(cells, widths))

    return "\n".join([line(header), line(["-" * w for w in widths]), *map(line, rows)]) + "\n"
