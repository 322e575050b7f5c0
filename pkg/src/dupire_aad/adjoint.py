"""Pathwise adjoint of the simulation: delta and the full vega surface in one sweep.

The backward pass walks the recorded tape from maturity to the start,
carrying ``a_n = dPayoff/dX_n`` per path. At every step the sensitivity of
``X_{n+1}`` to the local vol ``sigma_n`` is scattered onto the four grid nodes
that produced ``sigma_n`` with the same bilinear weights the forward pass used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .engine import (
    Payoff,
    PayoffKind,
    PriceEstimate,
    Scheme,
    SimConfig,
    Tape,
    map_batches,
    merge_in_order,
    payoff_value,
    simulate_batch,
)
from .errors import TapeMismatch
from .numerics import Welford
from .surface import VolSurface


@dataclass(frozen=True)
class SensitivityReport:
    price: PriceEstimate
    delta: float
    delta_se: float
    vega_grid: np.ndarray
    vega_se_grid: np.ndarray
    # parallel-shift vega from per-path node sums, with its own standard error
    vega_total: float = 0.0
    vega_total_se: float = 0.0


def payoff_grad(p: Payoff, x_t):
    """Pathwise payoff derivative; exactly at the strike it is 0."""
    if p.kind == PayoffKind.CALL:
        ind = np.where(x_t > p.strike, 1.0, 0.0)
    else:
        ind = np.where(x_t < p.strike, -1.0, 0.0)
    return (p.notional * ind)[()]


def backward_batch(
    tape: Tape,
    config: SimConfig,
    surface: VolSurface,
    payoff: Payoff,
    vega_accum: np.ndarray,
) -> np.ndarray:
    """Reverse sweep over one batch; returns the per-path delta ``a_0``.

    ``vega_accum`` receives the vega contributions. With shape (I, J) it gets
    their sum over the batch; with shape (B, I, J) each path's contribution
    lands in its own slice (needed for per-node standard errors).
    """
    n_steps = config.n_steps
    b = tape.n_paths
    if n_steps != tape.n_steps:
        raise TapeMismatch(f"tape has {tape.n_steps} steps, config {n_steps}")
    tape.check(b, n_steps)
    n_spots, n_times = surface.shape
    if vega_accum.shape == (n_spots, n_times):
        per_path = False
    elif vega_accum.shape == (b, n_spots, n_times):
        per_path = True
    else:
        raise TapeMismatch(f"vega_accum shape {vega_accum.shape} fits neither grid nor batch")
    flat = vega_accum.reshape(-1)
    if not np.shares_memory(flat, vega_accum):
        raise ValueError("vega_accum must be C-contiguous")
    a = payoff_grad(payoff, tape.states[n_steps])
    a = np.array(np.broadcast_to(a, (b,)), dtype=np.float64)
    _sweep(
        tape.states, tape.normals, tape.sigmas, tape.cell_x, tape.wx0, tape.wx1,
        tape.x_clamped, tape.cell_t, tape.ft, tape.wt0, tape.wt1, tape.floored,
        surface.vols, surface.spots, config.dt, config.scheme == Scheme.EULER,
        a, flat, per_path,
    )
    return a


@numba.njit(cache=True, nogil=True)
def _sweep(states, normals, sigmas, cell_x, wx0, wx1, x_clamped, cell_t, ft, wt0, wt1,
           floored, vols, spots, dt, euler, a, out, per_path):
    n_steps, b = normals.shape
    n_times = vols.shape[1]
    n_nodes = vols.shape[0] * n_times
    sqrt_dt = math.sqrt(dt)
    for n in range(n_steps - 1, -1, -1):
        j = cell_t[n]
        f = ft[n]
        t0 = wt0[n]
        t1 = wt1[n]
        for p in range(b):
            x_n = states[n, p]
            sigma = sigmas[n, p]
            dw = sqrt_dt * normals[n, p]
            i = cell_x[n, p]
            if euler:
                if floored[n, p]:
                    a[p] = 0.0
                    continue
                g = a[p] * x_n * dw
            else:
                x_next = states[n + 1, p]
                dlog = dw - sigma * dt
                g = a[p] * x_next * dlog
            node = i * n_times + j
            base = p * n_nodes if per_path else 0
            gx0 = g * wx0[n, p]
            gx1 = g * wx1[n, p]
            out[base + node] += gx0 * t0
            out[base + node + n_times] += gx1 * t0
            out[base + node + 1] += gx0 * t1
            out[base + node + n_times + 1] += gx1 * t1
            if x_clamped[n, p]:
                slope = 0.0
            else:
                slope = ((1 - f) * (vols[i + 1, j] - vols[i, j])
                         + f * (vols[i + 1, j + 1] - vols[i, j + 1])) / (spots[i + 1] - spots[i])
            if euler:
                a[p] = a[p] * (1.0 + sigma * dw + x_n * slope * dw)
            else:
                a[p] = a[p] * (x_next / x_n + x_next * dlog * slope)


def greeks(config: SimConfig, surface: VolSurface, payoff: Payoff, workers: int = 1) -> SensitivityReport:
    """Price, delta and vega surface with per-estimate Monte Carlo standard errors."""
    n_spots, n_times = surface.shape

    def run(batch: int):
        x_t, tape = simulate_batch(config, surface, batch, record_tape=True)
        per_path = np.zeros((tape.n_paths, n_spots, n_times))
        a0 = backward_batch(tape, config, surface, payoff, per_path)
        del tape
        per_path = per_path.reshape(per_path.shape[0], -1)
        return (
            Welford.from_samples(payoff_value(payoff, x_t)),
            Welford.from_samples(a0),
            _node_stats(per_path),
            Welford.from_samples(per_path.sum(axis=1)),
        )

    parts = map_batches(run, config.n_batches, workers)
    price_acc = merge_in_order([p[0] for p in parts])
    delta_acc = merge_in_order([p[1] for p in parts])
    vega_acc = merge_in_order([p[2] for p in parts])
    total_acc = merge_in_order([p[3] for p in parts])
    return SensitivityReport(
        price=PriceEstimate(float(price_acc.mean), float(price_acc.std_error), price_acc.count),
        delta=float(delta_acc.mean),
        delta_se=float(delta_acc.std_error),
        vega_grid=np.asarray(vega_acc.mean).reshape(n_spots, n_times),
        vega_se_grid=np.asarray(vega_acc.std_error).reshape(n_spots, n_times),
        vega_total=float(total_acc.mean),
        vega_total_se=float(total_acc.std_error),
    )


def _node_stats(per_path: np.ndarray) -> Welford:
    """Per-node accumulator over a (B, I*J) block of per-path contributions."""
    mean, m2 = _column_stats(per_path)
    return Welford(per_path.shape[0], mean, m2)


@numba.njit(cache=True, nogil=True)
def _column_stats(values):
    # two passes, shifted by the first row like Welford.from_samples
    b, m = values.shape
    shift = values[0].copy()
    total = np.zeros(m)
    for r in range(b):
        for c in range(m):
            total[c] += values[r, c] - shift[c]
    mean = shift + total / b
    m2 = np.zeros(m)
    for r in range(b):
        for c in range(m):
            d = values[r, c] - mean[c]
            m2[c] += d * d
    return mean, m2
