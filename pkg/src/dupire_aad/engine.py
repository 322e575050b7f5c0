"""Monte Carlo simulation of dX/X = sigma(X, t) dW under explicit time stepping.

Paths are simulated in fixed batches of ``batch_size``. Every batch draws its
normals from the counter-based generator at its global path ids, so results
do not depend on how batches are spread over workers. Batch statistics are
merged in batch-index order.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, TypeVar

import numpy as np

from . import rng
from .errors import ConfigError, DomainError, TapeMismatch
from .numerics import PrecisionMode, Welford, round_bf16, welford_merge
from .surface import InterpBackend, VolSurface, _gather_cells, _onehot_rows, locate, vol_operand

T = TypeVar("T")

FLOOR_FRACTION = 1e-12


class Scheme(str, enum.Enum):
    EULER = "euler"
    LOG_EULER = "logeuler"


class PayoffKind(str, enum.Enum):
    CALL = "call"
    PUT = "put"


@dataclass(frozen=True)
class Payoff:
    kind: PayoffKind
    strike: float
    notional: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PayoffKind(self.kind))
        if not (math.isfinite(self.strike) and self.strike > 0):
            raise ConfigError(f"strike must be positive and finite, got {self.strike}")
        if not math.isfinite(self.notional):
            raise ConfigError("notional must be finite")


@dataclass(frozen=True)
class SimConfig:
    s0: float
    maturity: float
    n_steps: int = 156
    n_paths: int = 500_000
    batch_size: int = 8192
    scheme: Scheme = Scheme.EULER
    key: rng.RngKey = field(default_factory=rng.RngKey)
    precision: PrecisionMode = PrecisionMode.FULL
    interp_backend: InterpBackend = InterpBackend.ONEHOT

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "precision", PrecisionMode(self.precision))
        object.__setattr__(self, "interp_backend", InterpBackend(self.interp_backend))
        for name in ("s0", "maturity"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive and finite, got {v}")
        if self.n_steps < 1:
            raise ConfigError("n_steps must be >= 1")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be >= 1")
        if not 1 <= self.batch_size <= self.n_paths:
            raise ConfigError(f"batch_size must lie in [1, n_paths], got {self.batch_size}")

    @property
    def dt(self) -> float:
        return self.maturity / self.n_steps

    @property
    def floor(self) -> float:
        return FLOOR_FRACTION * self.s0

    @property
    def n_batches(self) -> int:
        return -(-self.n_paths // self.batch_size)

    def batch_bounds(self, batch_index: int) -> tuple[int, int]:
        if not 0 <= batch_index < self.n_batches:
            raise IndexError(f"batch {batch_index} out of range [0, {self.n_batches})")
        start = batch_index * self.batch_size
        return start, min(start + self.batch_size, self.n_paths)

    def evolve(self, **changes) -> SimConfig:
        return replace(self, **changes)


@dataclass(frozen=True)
class PriceEstimate:
    mean: float
    std_error: float
    n_paths: int


@dataclass
class Tape:
    """Forward record of one batch, stored step-major.

    Per (step, path) arrays have shape (N, B); ``states`` has shape (N+1, B).
    Interpolation weights are kept factored: spot weights ``wx0``/``wx1`` per
    (step, path) and time weights ``wt0``/``wt1`` per step, so the corner weight
    of node (i+a, j+b) is ``wx_a * wt_b``. They are the weights the forward
    pass actually multiplied with (bf16-rounded in emulation mode).
    """

    states: np.ndarray
    normals: np.ndarray
    sigmas: np.ndarray
    cell_x: np.ndarray
    wx0: np.ndarray
    wx1: np.ndarray
    x_clamped: np.ndarray
    cell_t: np.ndarray
    ft: np.ndarray
    wt0: np.ndarray
    wt1: np.ndarray
    floored: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.normals.shape[0]

    @property
    def n_paths(self) -> int:
        return self.normals.shape[1]

    def check(self, n_paths: int, n_steps: int) -> None:
        expected = {
            "states": (n_steps + 1, n_paths),
            "normals": (n_steps, n_paths),
            "sigmas": (n_steps, n_paths),
            "cell_x": (n_steps, n_paths),
            "wx0": (n_steps, n_paths),
            "wx1": (n_steps, n_paths),
            "x_clamped": (n_steps, n_paths),
            "floored": (n_steps, n_paths),
            "cell_t": (n_steps,),
            "ft": (n_steps,),
            "wt0": (n_steps,),
            "wt1": (n_steps,),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise TapeMismatch(f"tape.{name} has shape {got}, expected {shape}")


def step_euler(x, sigma, z, dt, floor=0.0):
    """One level-Euler step ``x * (1 + sigma * sqrt(dt) * z)``, floored.

    Returns ``(x_next, floored)``.
    """
    raw = x * (1.0 + sigma * math.sqrt(dt) * z)
    floored = raw < floor
    return np.where(floored, floor, raw)[()], floored


def step_logeuler(x, sigma, z, dt, floor=0.0):
    """One log-Euler step, exact for constant sigma. Never floors.

    ``floor`` is accepted for signature parity with :func:`step_euler`.
    """
    out = x * np.exp(sigma * math.sqrt(dt) * z - 0.5 * sigma * sigma * dt)
    return out, np.zeros(np.shape(out), dtype=bool)[()]


_STEPPERS = {Scheme.EULER: step_euler, Scheme.LOG_EULER: step_logeuler}


def payoff_value(p: Payoff, x_t):
    if p.kind == PayoffKind.CALL:
        intrinsic = np.maximum(x_t - p.strike, 0.0)
    else:
        intrinsic = np.maximum(p.strike - x_t, 0.0)
    return p.notional * intrinsic


def simulate_batch(
    config: SimConfig,
    surface: VolSurface,
    batch_index: int,
    record_tape: bool = False,
    normals: np.ndarray | None = None,
) -> tuple[np.ndarray, Tape | None]:
    """Simulate one batch of paths; returns terminal values and optionally the tape.

    ``normals`` (shape (N, B)) replaces the generator draws, for tests that
    need a hand-chosen shock.
    """
    start, stop = config.batch_bounds(batch_index)
    b = stop - start
    n_steps = config.n_steps
    dt = config.dt
    if normals is None:
        normals = rng.normal_block(config.key, start, b, n_steps)
    elif normals.shape != (n_steps, b):
        raise TapeMismatch(f"normals shape {normals.shape}, expected {(n_steps, b)}")
    step = _STEPPERS[config.scheme]
    floor = config.floor
    onehot = config.interp_backend == InterpBackend.ONEHOT
    precision = config.precision
    vols = surface.vols
    if onehot:
        vols_op = vol_operand(surface, precision)

    x = np.full(b, config.s0)
    tape = None
    if record_tape:
        tape = Tape(
            states=np.empty((n_steps + 1, b)),
            normals=normals,
            sigmas=np.empty((n_steps, b)),
            cell_x=np.empty((n_steps, b), dtype=np.intp),
            wx0=np.empty((n_steps, b)),
            wx1=np.empty((n_steps, b)),
            x_clamped=np.empty((n_steps, b), dtype=bool),
            cell_t=np.empty(n_steps, dtype=np.intp),
            ft=np.empty(n_steps),
            wt0=np.empty(n_steps),
            wt1=np.empty(n_steps),
            floored=np.empty((n_steps, b), dtype=bool),
        )
        tape.states[0] = x

    for n in range(n_steps):
        t = n * dt
        i, fx, x_clamped = locate(surface.spots, x)
        j, ft, _ = locate(surface.times, t)
        wx0, wx1 = 1.0 - fx, fx
        wt0, wt1 = 1.0 - ft, ft
        if onehot:
            wt = np.zeros(surface.times.size)
            wt[j], wt[j + 1] = wt0, wt1
            if precision == PrecisionMode.BF16:
                # _onehot_rows rounds again; rounding is idempotent
                wt = round_bf16(wt)
                wt0, wt1 = wt[j], wt[j + 1]
                wx0, wx1 = round_bf16(wx0), round_bf16(wx1)
            sigma = _onehot_rows(vols_op @ wt, i, wx0, wx1, precision)
        else:
            sigma = _gather_cells(vols, i, fx, j, ft)
        x_next, floored = step(x, sigma, normals[n], dt, floor)
        if tape is not None:
            tape.sigmas[n] = sigma
            tape.cell_x[n] = i
            tape.wx0[n] = wx0
            tape.wx1[n] = wx1
            tape.x_clamped[n] = x_clamped
            tape.cell_t[n] = j
            tape.ft[n] = ft
            tape.wt0[n] = wt0
            tape.wt1[n] = wt1
            tape.floored[n] = floored
            tape.states[n + 1] = x_next
        x = x_next
    return x, tape


def resolve_workers(workers: int) -> int:
    if workers == 0:
        return os.cpu_count() or 1
    return max(1, workers)


def map_batches(fn: Callable[[int], T], n_batches: int, workers: int = 1) -> list[T]:
    """Apply ``fn`` to every batch index; results come back in index order."""
    workers = resolve_workers(workers)
    if workers == 1 or n_batches == 1:
        return [fn(b) for b in range(n_batches)]
    with ThreadPoolExecutor(max_workers=min(workers, n_batches)) as pool:
        return list(pool.map(fn, range(n_batches)))


def merge_in_order(parts: list[Welford]) -> Welford:
    acc = Welford()
    for part in parts:
        acc = welford_merge(acc, part)
    return acc


def price(config: SimConfig, surface: VolSurface, payoff: Payoff, workers: int = 1) -> PriceEstimate:
    def run(b: int) -> Welford:
        x_t, _ = simulate_batch(config, surface, b)
        return Welford.from_samples(payoff_value(payoff, x_t))

    acc = merge_in_order(map_batches(run, config.n_batches, workers))
    return PriceEstimate(float(acc.mean), float(acc.std_error), acc.count)


def terminal_values(config: SimConfig, surface: VolSurface, workers: int = 1) -> np.ndarray:
    """All terminal spots X_N in global path order."""
    parts = map_batches(lambda b: simulate_batch(config, surface, b)[0], config.n_batches, workers)
    return np.concatenate(parts)


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def black_scholes_call(s0: float, k: float, sigma: float, t: float) -> float:
    """Zero-rate, zero-dividend Black-Scholes call."""
    if not all(math.isfinite(v) and v > 0 for v in (s0, k, sigma, t)):
        raise DomainError("black_scholes_call needs positive finite inputs")
    sd = sigma * math.sqrt(t)
    d1 = (math.log(s0 / k) + 0.5 * sd * sd) / sd
    return s0 * _norm_cdf(d1) - k * _norm_cdf(d1 - sd)
