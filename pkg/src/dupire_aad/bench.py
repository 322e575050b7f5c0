"""Wall-time benchmark over interpolation backends and precision modes.

Each timing wraps one full ``price`` or ``greeks`` call, result
materialization included, file I/O excluded. Reporting only; nothing here
passes or fails.
"""

from __future__ import annotations

import itertools
import statistics
import time

from .adjoint import greeks
from .engine import Payoff, SimConfig, price
from .io import text_table
from .numerics import PrecisionMode
from .surface import InterpBackend, VolSurface

BENCH_SCHEMA = {
    "type": "object",
    "required": ["n_paths", "n_steps", "grid", "repeats", "timing_scope", "rows"],
    "properties": {
        "n_paths": {"type": "integer", "minimum": 1},
        "n_steps": {"type": "integer", "minimum": 1},
        "grid": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        "repeats": {"type": "integer", "minimum": 1},
        "threads": {"type": "integer", "minimum": 0},
        "timing_scope": {"type": "string"},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["mode", "backend", "precision", "timings_ms", "median_ms", "min_ms",
                             "path_steps_per_s", "price"],
                "properties": {
                    "mode": {"enum": ["price", "greeks"]},
                    "backend": {"enum": [b.value for b in InterpBackend]},
                    "precision": {"enum": [p.value for p in PrecisionMode]},
                    "timings_ms": {"type": "array", "items": {"type": "number", "minimum": 0}},
                    "median_ms": {"type": "number", "minimum": 0},
                    "min_ms": {"type": "number", "minimum": 0},
                    "path_steps_per_s": {"type": "number", "minimum": 0},
                    "price": {"type": "number"},
                },
            },
        },
    },
}

TIMING_SCOPE = "compute call incl. result materialization; excludes config/surface loading and file output"


def run_bench(
    config: SimConfig,
    surface: VolSurface,
    payoff: Payoff,
    repeats: int = 11,
    workers: int = 1,
    backends=tuple(InterpBackend),
    precisions=tuple(PrecisionMode),
    modes=("price", "greeks"),
) -> dict:
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rows = []
    work = config.n_paths * config.n_steps
    for mode, backend, precision in itertools.product(modes, backends, precisions):
        cfg = config.evolve(interp_backend=backend, precision=precision)
        timings = []
        for _ in range(repeats):
            start = time.perf_counter()
            if mode == "price":
                value = price(cfg, surface, payoff, workers).mean
            else:
                value = greeks(cfg, surface, payoff, workers).price.mean
            timings.append((time.perf_counter() - start) * 1e3)
        median = statistics.median(timings)
        rows.append({
            "mode": mode,
            "backend": InterpBackend(backend).value,
            "precision": PrecisionMode(precision).value,
            "timings_ms": timings,
            "median_ms": median,
            "min_ms": min(timings),
            "path_steps_per_s": work / (median / 1e3) if median > 0 else 0.0,
            "price": value,
        })
    return {
        "n_paths": config.n_paths,
        "n_steps": config.n_steps,
        "grid": list(surface.shape),
        "repeats": repeats,
        "threads": workers,
        "timing_scope": TIMING_SCOPE,
        "rows": rows,
    }


def format_table(report: dict) -> str:
    header = ["mode", "backend", "precision", "median_ms", "min_ms", "Mpath-steps/s", "price"]
    rows = [
        [r["mode"], r["backend"], r["precision"], f"{r['median_ms']:.1f}", f"{r['min_ms']:.1f}",
         f"{r['path_steps_per_s'] / 1e6:.2f}", f"{r['price']:.6f}"]
        for r in report["rows"]
    ]
    return text_table(header, rows)
