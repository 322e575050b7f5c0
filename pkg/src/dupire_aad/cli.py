"""``dupire-aad`` command line.

Exit codes: 0 ok, 2 usage/config error, 3 data validation error,
4 numerical tolerance failure (``validate``).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, bench, config, io
from .adjoint import greeks
from .bump import bump_all
from .engine import price
from .errors import ConfigError, DataValidationError, DupireError
from .surface import synthetic_surface

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_TOLERANCE = 4

VALIDATE_MAX_NODES = 400

_OVERRIDES = {
    "threads": "run.threads",
    "seed": "simulation.seed",
    "backend": "simulation.interp_backend",
    "precision": "simulation.precision",
    "scheme": "simulation.scheme",
    "eps": "run.eps",
    "tol_rel": "run.tol_rel",
    "tol_abs": "run.tol_abs",
    "stride": "run.stride",
    "repeats": "run.repeats",
}


def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON config or run manifest; built-in demo config if omitted")
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json when --out is set)")
    p.add_argument("--threads", type=int, help="worker threads, 0 = all cores; results do not depend on it")
    p.add_argument("--seed", type=int)
    p.add_argument("--backend", choices=["gather", "onehot"])
    p.add_argument("--precision", choices=["full", "bf16"])
    p.add_argument("--scheme", choices=["euler", "logeuler"])
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="dupire-aad", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("price", parents=[common], help="Monte Carlo price with standard error")

    g = sub.add_parser("greeks", parents=[common], help="price, delta and vega surface by adjoint")
    g.add_argument("--wide", action="store_true", default=None,
                   help="write the vega grid in the surface matrix layout instead of long format")

    v = sub.add_parser("validate", parents=[common], help="adjoint vega vs bumping, node by node")
    v.add_argument("--eps", type=float)
    v.add_argument("--tol-rel", dest="tol_rel", type=float)
    v.add_argument("--tol-abs", dest="tol_abs", type=float)
    v.add_argument("--stride", type=int)
    v.add_argument("--force", action="store_true", default=None,
                   help=f"allow grids above {VALIDATE_MAX_NODES} nodes")

    b = sub.add_parser("bench", parents=[common], help="wall-time table over backends and precisions")
    b.add_argument("--repeats", type=int)

    s = sub.add_parser("gen-surface", help="write a synthetic smile surface CSV")
    s.add_argument("--out")
    s.add_argument("--manifest")
    s.add_argument("--n-spots", dest="n_spots", type=int, default=30)
    s.add_argument("--n-times", dest="n_times", type=int, default=60)
    s.add_argument("--s0", type=float, default=100.0)
    s.add_argument("--maturity", type=float, default=1.5)
    s.add_argument("--lo", type=float, default=0.5, help="lowest spot as a multiple of s0")
    s.add_argument("--hi", type=float, default=2.0, help="highest spot as a multiple of s0")
    s.add_argument("--base", type=float, default=0.2)
    s.add_argument("--skew", type=float, default=0.3)
    return parser


def _resolve(args) -> config.ResolvedConfig:
    raw, base_dir = (None, None)
    if args.config:
        raw, base_dir = config.read_config_file(args.config)
    overrides = {path: getattr(args, name, None) for name, path in _OVERRIDES.items()}
    for flag in ("force", "wide"):
        if getattr(args, flag, None):
            overrides[f"run.{flag}"] = True
    return config.resolve(raw, base_dir, overrides)


def _manifest(args, command: str, resolved: config.ResolvedConfig | None, wall_ms: dict,
              counts: dict, extra: dict | None = None) -> dict:
    return {
        "tool": "dupire-aad",
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "subcommand": command,
        "config": resolved.to_dict() if resolved is not None else None,
        "options": extra or {},
        "wall_ms": wall_ms,
        "simulation_counts": counts,
    }


def _emit(outputs: list[tuple[str | None, str]], manifest: dict, args) -> None:
    """Write every (path, text) pair; a None path goes to stdout. Manifest last."""
    for path, text in outputs:
        if path is None:
            sys.stdout.write(text if text.endswith("\n") else text + "\n")
        else:
            io.atomic_write(path, text if text.endswith("\n") else text + "\n")
    manifest_path = args.manifest or (f"{args.out}.manifest.json" if args.out else None)
    if manifest_path:
        io.atomic_write(manifest_path, io.dumps(manifest) + "\n")


def _timed(fn, *a, **kw):
    start = time.perf_counter()
    result = fn(*a, **kw)
    return result, (time.perf_counter() - start) * 1e3


def cmd_price(args) -> int:
    rc = _resolve(args)
    surface = rc.load_surface()
    est, wall = _timed(price, rc.sim, surface, rc.payoff, rc.run["threads"])
    out = {"price": est.mean, "std_error": est.std_error, "n_paths": est.n_paths, "wall_ms": wall}
    manifest = _manifest(args, "price", rc, {"price": wall}, {"pricings": 1, "paths": rc.sim.n_paths})
    _emit([(args.out, io.dumps(out))], manifest, args)
    return EXIT_OK


def cmd_greeks(args) -> int:
    rc = _resolve(args)
    surface = rc.load_surface()
    rep, wall = _timed(greeks, rc.sim, surface, rc.payoff, rc.run["threads"])
    summary = {
        "price": rep.price.mean,
        "std_error": rep.price.std_error,
        "n_paths": rep.price.n_paths,
        "delta": rep.delta,
        "delta_se": rep.delta_se,
        "vega_total": rep.vega_total,
        "vega_total_se": rep.vega_total_se,
        "grid": list(surface.shape),
        "wall_ms": wall,
    }
    if rc.run["wide"]:
        grid_text = io.grid_csv(surface.spots, surface.times, rep.vega_grid)
    else:
        grid_text = io.vega_long_csv(surface, rep.vega_grid, rep.vega_se_grid)
    manifest = _manifest(args, "greeks", rc, {"greeks": wall}, {"pricings": 1, "paths": rc.sim.n_paths})
    if args.out:
        summary_path = str(Path(args.out).with_suffix(".summary.json"))
        _emit([(args.out, grid_text), (summary_path, io.dumps(summary))], manifest, args)
    else:
        # the grid is the pipeable product; the summary goes beside it on stderr
        _emit([(None, grid_text)], manifest, args)
        print(io.dumps(summary), file=sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    rc = _resolve(args)
    surface = rc.load_surface()
    n_spots, n_times = surface.shape
    if n_spots * n_times > VALIDATE_MAX_NODES and not rc.run["force"]:
        print(f"refusing to bump {n_spots * n_times} nodes (limit {VALIDATE_MAX_NODES}); "
              "pass --force to run anyway", file=sys.stderr)
        return EXIT_USAGE
    run = rc.run
    threads = run["threads"]
    rep, wall_adj = _timed(greeks, rc.sim, surface, rc.payoff, threads)
    bumped = bump_all(rc.sim, surface, rc.payoff, run["eps"], run["stride"], threads)

    nodes = []
    for i in range(n_spots):
        for j in range(n_times):
            ref = bumped.grid[i, j]
            if np.isnan(ref):
                continue
            adj = rep.vega_grid[i, j]
            abs_dev = abs(adj - ref)
            rel_dev = abs_dev / abs(ref) if ref != 0 else (0.0 if abs_dev == 0 else float("inf"))
            ok = abs_dev <= max(run["tol_rel"] * abs(ref), run["tol_abs"])
            nodes.append({"i": i, "j": j, "adjoint": adj, "bump": ref, "abs_dev": abs_dev,
                          "rel_dev": rel_dev, "pass": bool(ok)})
    failed = [n for n in nodes if not n["pass"]]
    abs_devs = [n["abs_dev"] for n in nodes]
    rel_devs = [n["rel_dev"] for n in nodes if np.isfinite(n["rel_dev"])]
    report = {
        "pass": not failed,
        "eps": run["eps"],
        "tol_rel": run["tol_rel"],
        "tol_abs": run["tol_abs"],
        "n_nodes": len(nodes),
        "n_failed": len(failed),
        "max_abs_dev": max(abs_devs),
        "mean_abs_dev": float(np.mean(abs_devs)),
        "max_rel_dev": max(rel_devs) if rel_devs else 0.0,
        "mean_rel_dev": float(np.mean(rel_devs)) if rel_devs else 0.0,
        "n_pricings": bumped.n_pricings,
        "wall_ms": {"adjoint": wall_adj, "bump": bumped.wall_ms},
        "nodes": nodes,
    }
    manifest = _manifest(args, "validate", rc, report["wall_ms"],
                         {"pricings": 1 + bumped.n_pricings,
                          "paths": rc.sim.n_paths * (1 + bumped.n_pricings)})
    _emit([(args.out, io.dumps(report))], manifest, args)
    if failed:
        worst = max(failed, key=lambda n: n["abs_dev"])
        print(f"validation failed: {len(failed)} of {len(nodes)} nodes outside "
              f"max({run['tol_rel']} relative, {run['tol_abs']} absolute); worst node "
              f"({worst['i']}, {worst['j']}) adjoint {worst['adjoint']:.6g} vs bump {worst['bump']:.6g}. "
              f"A bump of eps={run['eps']:g} this large adds central-difference truncation error; "
              "a much smaller one adds rounding noise.", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_bench(args) -> int:
    rc = _resolve(args)
    surface = rc.load_surface()
    backends = [args.backend] if args.backend else ["gather", "onehot"]
    precisions = [args.precision] if args.precision else ["full", "bf16"]
    report = bench.run_bench(rc.sim, surface, rc.payoff, rc.run["repeats"], rc.run["threads"],
                             backends, precisions)
    sys.stdout.write(bench.format_table(report))
    wall = {f"{r['mode']}/{r['backend']}/{r['precision']}": r["median_ms"] for r in report["rows"]}
    n_runs = len(report["rows"]) * report["repeats"]
    manifest = _manifest(args, "bench", rc, wall, {"pricings": n_runs, "paths": n_runs * rc.sim.n_paths})
    outputs = [(args.out, io.dumps(report))] if args.out else []
    _emit(outputs, manifest, args)
    return EXIT_OK


def cmd_gen_surface(args) -> int:
    params = {k: getattr(args, k) for k in ("n_spots", "n_times", "s0", "maturity", "lo", "hi", "base", "skew")}
    try:
        surface = synthetic_surface(**params)
    except (ValueError, DupireError) as exc:
        raise ConfigError(str(exc)) from None
    manifest = _manifest(args, "gen-surface", None, {}, {}, {"synthetic": params})
    _emit([(args.out, io.surface_csv(surface))], manifest, args)
    return EXIT_OK


COMMANDS = {
    "price": cmd_price,
    "greeks": cmd_greeks,
    "validate": cmd_validate,
    "bench": cmd_bench,
    "gen-surface": cmd_gen_surface,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataValidationError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
