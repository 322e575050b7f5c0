"""Central finite-difference ("bump and reprice") sensitivities.

Every bumped pricing reuses the base configuration's RNG key, so up and down
runs see identical normals and their difference isolates the parameter effect.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import engine
from .engine import Payoff, SimConfig
from .surface import VolSurface

DEFAULT_VOL_EPS = 1e-4
DEFAULT_SPOT_REL_EPS = 1e-6


@dataclass(frozen=True)
class BumpGrid:
    """Result of :func:`bump_all`: the sensitivity grid plus cost bookkeeping.

    Nodes skipped by ``stride`` hold NaN.
    """

    grid: np.ndarray
    n_pricings: int
    wall_ms: float


def _bumped(surface: VolSurface, vols: np.ndarray) -> VolSurface:
    # skips new_surface's sign check: a zero-vol node bumped down goes slightly
    # negative, and the simulation is polynomial in sigma so the difference stays central
    vols = np.array(vols, dtype=np.float64)
    vols.setflags(write=False)
    return VolSurface(surface.spots, surface.times, vols)


def _central(config, surface_up, surface_dn, payoff, workers) -> float:
    up = engine.price(config, surface_up, payoff, workers).mean
    dn = engine.price(config, surface_dn, payoff, workers).mean
    return up - dn


def bump_node(config: SimConfig, surface: VolSurface, payoff: Payoff, i: int, j: int,
              eps: float = DEFAULT_VOL_EPS, workers: int = 1) -> float:
    n_spots, n_times = surface.shape
    if not (0 <= i < n_spots and 0 <= j < n_times):
        raise IndexError(f"node ({i}, {j}) outside {surface.shape} grid")
    if not eps > 0:
        raise ValueError("eps must be positive")
    up = surface.vols.copy()
    dn = surface.vols.copy()
    up[i, j] += eps / 2
    dn[i, j] -= eps / 2
    return _central(config, _bumped(surface, up), _bumped(surface, dn), payoff, workers) / eps


def bump_all(config: SimConfig, surface: VolSurface, payoff: Payoff,
             eps: float = DEFAULT_VOL_EPS, stride: int = 1, workers: int = 1) -> BumpGrid:
    """Bump every ``stride``-th node in each direction: 2 pricings per node bumped."""
    n_spots, n_times = surface.shape
    grid = np.full((n_spots, n_times), np.nan)
    start = time.perf_counter()
    count = 0
    for i in range(0, n_spots, stride):
        for j in range(0, n_times, stride):
            grid[i, j] = bump_node(config, surface, payoff, i, j, eps, workers)
            count += 2
    return BumpGrid(grid, count, (time.perf_counter() - start) * 1e3)


def bump_spot(config: SimConfig, surface: VolSurface, payoff: Payoff,
              rel_eps: float = DEFAULT_SPOT_REL_EPS, workers: int = 1) -> float:
    if not rel_eps > 0:
        raise ValueError("rel_eps must be positive")
    s_up = config.s0 * (1 + rel_eps / 2)
    s_dn = config.s0 * (1 - rel_eps / 2)
    up = engine.price(config.evolve(s0=s_up), surface, payoff, workers).mean
    dn = engine.price(config.evolve(s0=s_dn), surface, payoff, workers).mean
    # divide by the realized spot difference, not s0 * rel_eps, so linear payoffs come out exact
    return (up - dn) / (s_up - s_dn)


def bump_uniform(config: SimConfig, surface: VolSurface, payoff: Payoff,
                 eps: float = DEFAULT_VOL_EPS, workers: int = 1) -> float:
    """Parallel-shift vega: every node moved by +-eps/2 together."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    up = _bumped(surface, surface.vols + eps / 2)
    dn = _bumped(surface, surface.vols - eps / 2)
    return _central(config, up, dn, payoff, workers) / eps
