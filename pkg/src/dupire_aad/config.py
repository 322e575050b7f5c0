"""Run configuration: a JSON document with ``simulation``, ``payoff``, ``surface`` and ``run`` sections.

The surface section holds exactly one of
``{"file": path}`` (relative to the config file),
``{"spots": [...], "times": [...], "vols": [[...]]}`` or
``{"synthetic": {...synthetic_surface kwargs...}}``.
A run manifest is also accepted as a config: its ``config`` member is used.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

from . import io
from .engine import Payoff, SimConfig
from .errors import ConfigError
from .rng import RngKey
from .surface import VolSurface, new_surface, synthetic_surface

DEFAULT_SURFACE = {"synthetic": {"n_spots": 30, "n_times": 60, "s0": 100.0, "maturity": 1.5}}

DEMO_CONFIG = {
    "simulation": {
        "s0": 100.0,
        "maturity": 1.5,
        "n_steps": 156,
        "n_paths": 500_000,
        "batch_size": 8192,
        "scheme": "euler",
        "seed": 20200521,
        "stream_salt": 0,
        "precision": "full",
        "interp_backend": "onehot",
    },
    "payoff": {"kind": "call", "strike": 110.0, "notional": 1.0},
    "surface": DEFAULT_SURFACE,
    "run": {
        "threads": 1,
        "eps": 1e-4,
        "spot_rel_eps": 1e-6,
        "tol_rel": 0.01,
        "tol_abs": 2e-3,
        "repeats": 11,
        "stride": 1,
        "force": False,
        "wide": False,
    },
}

_SECTIONS = ("simulation", "payoff", "surface", "run")
_SYNTHETIC_KEYS = {"n_spots", "n_times", "s0", "maturity", "lo", "hi", "base", "skew",
                   "vol_min", "vol_max"}


@dataclass
class ResolvedConfig:
    sim: SimConfig
    payoff: Payoff
    surface_source: dict
    run: dict

    def to_dict(self) -> dict:
        s = self.sim
        return {
            "simulation": {
                "s0": s.s0,
                "maturity": s.maturity,
                "n_steps": s.n_steps,
                "n_paths": s.n_paths,
                "batch_size": s.batch_size,
                "scheme": s.scheme.value,
                "seed": s.key.seed,
                "stream_salt": s.key.stream_salt,
                "precision": s.precision.value,
                "interp_backend": s.interp_backend.value,
            },
            "payoff": {
                "kind": self.payoff.kind.value,
                "strike": self.payoff.strike,
                "notional": self.payoff.notional,
            },
            "surface": copy.deepcopy(self.surface_source),
            "run": dict(self.run),
        }

    def load_surface(self) -> VolSurface:
        source = self.surface_source
        if "file" in source:
            return io.read_surface(source["file"])
        if "synthetic" in source:
            return synthetic_surface(**source["synthetic"])
        return new_surface(source["spots"], source["times"], source["vols"])


def read_config_file(path: str | Path) -> tuple[dict, Path]:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "config" in raw and "simulation" not in raw:
        raw = raw["config"]
    return raw, path.resolve().parent


def resolve(raw: dict | None = None, base_dir: Path | None = None, overrides: dict | None = None) -> ResolvedConfig:
    """Merge ``raw`` over the demo defaults, apply flag overrides and validate."""
    raw = raw or {}
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    merged = copy.deepcopy(DEMO_CONFIG)
    for section in ("simulation", "payoff", "run"):
        part = raw.get(section, {})
        if not isinstance(part, dict):
            raise ConfigError(f"section '{section}' must be an object")
        extra = set(part) - set(merged[section])
        if extra:
            raise ConfigError(f"unknown keys in '{section}': {sorted(extra)}")
        merged[section].update(part)
    if "surface" in raw:
        merged["surface"] = copy.deepcopy(raw["surface"])
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        section, name = key.split(".")
        merged[section][name] = value

    sim = merged["simulation"]
    try:
        sim_config = SimConfig(
            s0=float(sim["s0"]),
            maturity=float(sim["maturity"]),
            n_steps=_as_int(sim["n_steps"], "n_steps"),
            n_paths=_as_int(sim["n_paths"], "n_paths"),
            batch_size=_as_int(min(sim["batch_size"], sim["n_paths"]), "batch_size"),
            scheme=sim["scheme"],
            key=RngKey(_as_int(sim["seed"], "seed"), _as_int(sim["stream_salt"], "stream_salt")),
            precision=sim["precision"],
            interp_backend=sim["interp_backend"],
        )
        p = merged["payoff"]
        payoff = Payoff(p["kind"], float(p["strike"]), float(p["notional"]))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return ResolvedConfig(sim_config, payoff, _resolve_surface(merged["surface"], base_dir), merged["run"])


def _as_int(value, name: str) -> int:
    if isinstance(value, bool) or not float(value).is_integer():
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return int(value)


def _resolve_surface(source, base_dir: Path | None) -> dict:
    if not isinstance(source, dict):
        raise ConfigError("surface section must be an object")
    kinds = [k for k in ("file", "synthetic", "vols") if k in source]
    if len(kinds) != 1:
        raise ConfigError("surface needs exactly one of 'file', 'synthetic' or inline 'vols'")
    if "file" in source:
        path = Path(source["file"])
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        return {"file": str(path.resolve())}
    if "synthetic" in source:
        params = source["synthetic"]
        if not isinstance(params, dict) or set(params) - _SYNTHETIC_KEYS:
            raise ConfigError(f"synthetic surface accepts only {sorted(_SYNTHETIC_KEYS)}")
        return {"synthetic": dict(params)}
    if not all(k in source for k in ("spots", "times")):
        raise ConfigError("inline surface needs 'spots', 'times' and 'vols'")
    return {"spots": list(source["spots"]), "times": list(source["times"]), "vols": [list(r) for r in source["vols"]]}
