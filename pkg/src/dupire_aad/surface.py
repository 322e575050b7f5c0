"""Local volatility grid and differentiable bilinear interpolation.

Two interchangeable backends evaluate the interpolant for a batch of spots
sharing one time: ``interp_gather`` looks up the four corner vols by index,
``interp_onehot`` expresses the same sum as matrix products against one-hot
scaled weight rows. Outside the grid, queries are clamped to the boundary.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NegativeVol, NonFiniteQuery, NonMonotonicAxis, TooFewNodes
from .numerics import PrecisionMode, round_bf16


class InterpBackend(str, enum.Enum):
    GATHER = "gather"
    ONEHOT = "onehot"


@dataclass(frozen=True, eq=False)
class VolSurface:
    """Local vols ``vols[i, j]`` at spot ``spots[i]`` and time ``times[j]``.

    Build through :func:`new_surface`, which validates the grid. Arrays are
    made read-only so a surface can be shared across workers.
    """

    spots: np.ndarray
    times: np.ndarray
    vols: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.vols.shape

    def with_vols(self, vols: np.ndarray) -> VolSurface:
        return new_surface(self.spots, self.times, vols)


@dataclass(frozen=True)
class BilinearWeights:
    """Lower-left cell index, the four corner weights and their x-derivatives.

    Corner order is (i, j), (i+1, j), (i, j+1), (i+1, j+1).
    """

    cell: tuple[int, int]
    w: tuple[float, float, float, float]
    dwdx: tuple[float, float, float, float]

    def nodes(self) -> tuple[tuple[int, int], ...]:
        i, j = self.cell
        return ((i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1))


def _check_axis(name: str, axis: np.ndarray) -> None:
    if axis.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector, got shape {axis.shape}")
    if axis.size < 2:
        raise TooFewNodes(f"{name} needs at least 2 nodes, got {axis.size}")
    if not np.all(np.isfinite(axis)):
        raise NonMonotonicAxis(f"{name} contains non-finite values")
    if not np.all(np.diff(axis) > 0):
        raise NonMonotonicAxis(f"{name} must be strictly increasing")


def new_surface(spots, times, vols) -> VolSurface:
    spots = np.array(spots, dtype=np.float64)
    times = np.array(times, dtype=np.float64)
    vols = np.array(vols, dtype=np.float64)
    _check_axis("spots", spots)
    _check_axis("times", times)
    if vols.shape != (spots.size, times.size):
        raise DimensionMismatch(
            f"vols has shape {vols.shape}, expected ({spots.size}, {times.size})"
        )
    if not np.all(np.isfinite(vols)):
        raise NegativeVol("vols must be finite")
    if np.any(vols < 0):
        raise NegativeVol(f"vols must be nonnegative, min is {vols.min()}")
    for a in (spots, times, vols):
        a.setflags(write=False)
    return VolSurface(spots, times, vols)


def locate(axis: np.ndarray, q):
    """Cell index, fractional position and clamp flag of ``q`` on ``axis``.

    Cells are half-open ``[a_i, a_{i+1})`` except the last, which is closed.
    Works on scalars and arrays.
    """
    qc = np.clip(q, axis[0], axis[-1])
    i = np.clip(np.searchsorted(axis, qc, side="right") - 1, 0, axis.size - 2)
    lo = axis[i]
    frac = (qc - lo) / (axis[i + 1] - lo)
    clamped = (q < axis[0]) | (q > axis[-1])
    return i, frac, clamped


def _check_query(xs, t) -> None:
    if not np.isfinite(t):
        raise NonFiniteQuery(f"non-finite query time {t}")
    xs = np.asarray(xs)
    bad = ~np.isfinite(xs)
    if np.any(bad):
        k = int(np.flatnonzero(bad.ravel())[0]) if xs.ndim else None
        raise NonFiniteQuery(f"non-finite query spot at index {k}", index=k)


def weights(surface: VolSurface, x: float, t: float) -> BilinearWeights:
    _check_query(x, t)
    i, fx, x_clamped = locate(surface.spots, float(x))
    j, ft, _ = locate(surface.times, float(t))
    fx, ft = float(fx), float(ft)
    w = ((1 - fx) * (1 - ft), fx * (1 - ft), (1 - fx) * ft, fx * ft)
    if x_clamped:
        dwdx = (0.0, 0.0, 0.0, 0.0)
    else:
        inv_h = 1.0 / (surface.spots[i + 1] - surface.spots[i])
        dwdx = (-(1 - ft) * inv_h, (1 - ft) * inv_h, -ft * inv_h, ft * inv_h)
    return BilinearWeights((int(i), int(j)), w, tuple(float(d) for d in dwdx))


def interp_gather(surface: VolSurface, xs, t: float) -> np.ndarray:
    _check_query(xs, t)
    xs = np.asarray(xs, dtype=np.float64)
    i, fx, _ = locate(surface.spots, xs)
    j, ft, _ = locate(surface.times, t)
    return _gather_cells(surface.vols, i, fx, j, ft)


def _gather_cells(vols: np.ndarray, i, fx, j: int, ft: float) -> np.ndarray:
    v = vols
    return (
        (1 - fx) * (1 - ft) * v[i, j]
        + fx * (1 - ft) * v[i + 1, j]
        + (1 - fx) * ft * v[i, j + 1]
        + fx * ft * v[i + 1, j + 1]
    )


def time_weights(surface: VolSurface, t: float, precision=PrecisionMode.FULL) -> np.ndarray:
    """One-hot scaled time row of length J: the two bracketing nodes carry weight."""
    j, ft, _ = locate(surface.times, t)
    row = np.zeros(surface.times.size)
    row[j] = 1 - ft
    row[j + 1] = ft
    if precision == PrecisionMode.BF16:
        row = round_bf16(row)
    return row


def spot_weight_rows(n_spots: int, i, wx0, wx1) -> np.ndarray:
    """Batch of one-hot scaled spot rows, shape (B, I), at most two nonzeros each."""
    rows = np.zeros((np.size(i), n_spots))
    k = np.arange(np.size(i))
    rows[k, i] = wx0
    rows[k, i + 1] = wx1
    return rows


def vol_operand(surface: VolSurface, precision=PrecisionMode.FULL) -> np.ndarray:
    if precision == PrecisionMode.BF16:
        return round_bf16(surface.vols)
    return surface.vols


def interp_onehot(
    surface: VolSurface,
    xs,
    t: float,
    precision: PrecisionMode = PrecisionMode.FULL,
    chunk_rows: int = 65536,
) -> np.ndarray:
    """Interpolate as ``W_x @ (V @ w_t)`` with one-hot scaled weight matrices.

    ``W_x`` (B x I) and ``w_t`` (J) factor the full B x (I*J) weight matrix,
    whose row for query k is ``kron(W_x[k], w_t)``. Rows are materialized
    ``chunk_rows`` at a time. In bf16 mode every matmul operand is rounded to
    bfloat16 and products accumulate in float64.
    """
    _check_query(xs, t)
    xs = np.asarray(xs, dtype=np.float64)
    i, fx, _ = locate(surface.spots, xs)
    wt = time_weights(surface, t, precision)
    column = vol_operand(surface, precision) @ wt
    return _onehot_rows(column, np.atleast_1d(i), np.atleast_1d(1 - fx), np.atleast_1d(fx),
                        precision, chunk_rows).reshape(xs.shape)


def _onehot_rows(column, i, wx0, wx1, precision, chunk_rows=65536) -> np.ndarray:
    if precision == PrecisionMode.BF16:
        column = round_bf16(column)
        wx0 = round_bf16(wx0)
        wx1 = round_bf16(wx1)
    out = np.empty(i.size)
    for start in range(0, i.size, chunk_rows):
        sl = slice(start, start + chunk_rows)
        out[sl] = spot_weight_rows(column.size, i[sl], wx0[sl], wx1[sl]) @ column
    return out


def dvol_dx(surface: VolSurface, x, t: float):
    """Slope of the interpolant in x: constant within a cell, 0 where x is clamped."""
    _check_query(x, t)
    i, _, clamped = locate(surface.spots, np.asarray(x, dtype=np.float64))
    j, ft, _ = locate(surface.times, t)
    out = _cell_slope(surface, i, j, ft)
    out = np.where(clamped, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


def _cell_slope(surface: VolSurface, i, j: int, ft: float):
    v = surface.vols
    s = surface.spots
    dv = (1 - ft) * (v[i + 1, j] - v[i, j]) + ft * (v[i + 1, j + 1] - v[i, j + 1])
    return dv / (s[i + 1] - s[i])


def scatter_node_grads(w: BilinearWeights, upstream: float, grad: np.ndarray) -> None:
    """Reverse of interpolation: ``grad[node_k] += upstream * w_k`` for the four corners."""
    for (a, b), wk in zip(w.nodes(), w.w):
        grad[a, b] += upstream * wk


def synthetic_surface(
    n_spots: int = 30,
    n_times: int = 60,
    s0: float = 100.0,
    maturity: float = 1.5,
    lo: float = 0.5,
    hi: float = 2.0,
    base: float = 0.2,
    skew: float = 0.3,
    vol_min: float = 0.05,
    vol_max: float = 1.0,
) -> VolSurface:
    """Smile with term structure, ``base + skew * ln(x/s0)**2 / (1 + t)``, clipped.

    Sampled on a uniform grid over ``[s0*lo, s0*hi] x [0, maturity]``.
    """
    if n_spots < 2 or n_times < 2:
        raise TooFewNodes(f"need at least a 2x2 grid, got {n_spots}x{n_times}")
    if not (0 < lo < hi and s0 > 0 and maturity > 0 and 0 <= vol_min <= vol_max):
        raise ValueError("invalid synthetic surface parameters")
    spots = np.linspace(s0 * lo, s0 * hi, n_spots)
    times = np.linspace(0.0, maturity, n_times)
    log_m = np.log(spots / s0)[:, None]
    vols = base + skew * log_m**2 / (1.0 + times[None, :])
    return new_surface(spots, times, np.clip(vols, vol_min, vol_max))
